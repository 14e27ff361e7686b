#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repsim/dataio.hpp"
#include "repsim/svcca.hpp"

namespace repsim {

// ---------------------------------------------------------------------------
// Activation store

/// Where a cell lives in the store. The model id is a property of the whole
/// store, so lookups ignore it.
struct CellRef {
    std::string language;
    Modality modality = Modality::text;
    std::string layer_tag;

    friend auto operator<=>(const CellRef&, const CellRef&) = default;
};

std::string describe(const CellRef& c);

/// Read-only (during a run) collection of pooled activation cells. Cells
/// added from disk are pooled on first access and cached; lookups are safe
/// from multiple threads.
class ActivationStore {
public:
    ActivationStore() = default;
    ActivationStore(const ActivationStore&) = delete;
    ActivationStore& operator=(const ActivationStore&) = delete;

    /// Index every *.actv file (with sidecar) under `dir`. Reads store.json
    /// for layer order and language list when present.
    static std::unique_ptr<ActivationStore> open(const std::filesystem::path& dir);

    void add(PooledMatrix pooled);
    void add_file(const CellRef& ref, std::filesystem::path path);

    bool contains(const CellRef& ref) const;
    std::shared_ptr<const PooledMatrix> get(const CellRef& ref) const;

    /// Exhaustive list of refs absent from the store, formatted for diagnostics.
    std::vector<std::string> missing(const std::vector<CellRef>& refs) const;

    std::vector<CellRef> cells() const;
    std::vector<std::string> languages() const;
    /// Layer order from store.json, otherwise tags in natural order.
    std::vector<std::string> layers() const;

    void set_layer_order(std::vector<std::string> order) { layer_order_ = std::move(order); }

private:
    struct Slot {
        std::filesystem::path path;
        mutable std::shared_ptr<const PooledMatrix> pooled;
    };

    std::map<CellRef, Slot> cells_;
    std::vector<std::string> layer_order_;
    mutable std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Similarity records

enum class SimilarityKind {
    intra_lingual_cross_modal,
    cross_lingual_text,
    cross_lingual_speech,
    /// Different language and modality; only produced when the taxonomy is overridden.
    cross_lingual_cross_modal,
};

std::string_view to_string(SimilarityKind k) noexcept;

/// Kind implied by a pair of cells. Throws TaxonomyError for same-cell
/// comparisons and, unless `allow_cross_lingual_cross_modal`, for pairs that
/// differ in both language and modality.
SimilarityKind infer_kind(const CellRef& a, const CellRef& b, bool allow_cross_lingual_cross_modal = false);

struct SimilarityRecord {
    SimilarityKind kind = SimilarityKind::intra_lingual_cross_modal;
    std::string layer_tag;
    std::string lang_a;
    std::string lang_b;
    Modality modality_a = Modality::text;
    Modality modality_b = Modality::text;
    double score = 0.0;
    Eigen::Index m_points = 0;
    std::pair<Eigen::Index, Eigen::Index> kept_dims{0, 0};

    /// Throws TaxonomyError if kind disagrees with the language/modality fields.
    void validate() const;
};

struct AnalysisOptions {
    SvccaConfig svcca;
    /// Cap on aligned data points, applied after sorting ids.
    std::optional<std::size_t> cap;
    std::size_t workers = 1;
    bool allow_cross_lingual_cross_modal = false;
};

SimilarityRecord score_pair(const CellRef& x, const CellRef& y, const ActivationStore& store,
                            const AnalysisOptions& opts = {});

/// Scores every pair; output order follows `pairs` regardless of worker count.
std::vector<SimilarityRecord> score_pairs(const std::vector<std::pair<CellRef, CellRef>>& pairs,
                                          const ActivationStore& store, const AnalysisOptions& opts = {});

// ---------------------------------------------------------------------------
// Layer curves

/// Resource-level membership used to split curves into groups.
using ResourceMap = std::map<std::string, ResourceLevel>;

ResourceMap resource_map(const std::vector<LanguageMeta>& meta);

struct LayerCurve {
    /// "all", "high", "medium" or "low".
    std::string group;
    std::vector<std::string> layers;
    std::vector<double> values;
    std::size_t n_languages = 0;
};

struct CrossModalCurves {
    std::vector<SimilarityRecord> records;  // language-major, layer-minor
    std::vector<LayerCurve> curves;         // "all" first, then present resource levels
};

/// Per layer: mean intra-lingual cross-modal score over languages, overall
/// and per resource level (when `resources` is given).
CrossModalCurves crossmodal_curve(const std::vector<std::string>& languages, const std::vector<std::string>& layers,
                                  const ActivationStore& store, const AnalysisOptions& opts = {},
                                  const ResourceMap* resources = nullptr);

/// Symmetric language x language score matrix with unit diagonal.
struct CrossLingualMatrix {
    std::vector<std::string> languages;
    Modality modality = Modality::text;
    std::string layer_tag;
    Eigen::MatrixXd scores;
    std::vector<SimilarityRecord> records;  // i < j, row-major

    double mean_off_diagonal() const;
    double at(const std::string& a, const std::string& b) const;
};

CrossLingualMatrix crosslingual_matrix(const std::vector<std::string>& languages, Modality modality,
                                       const std::string& layer, const ActivationStore& store,
                                       const AnalysisOptions& opts = {});

/// Every (modality, layer) matrix in one batch of work.
std::vector<CrossLingualMatrix> crosslingual_matrices(const std::vector<std::string>& languages,
                                                      const std::vector<Modality>& modalities,
                                                      const std::vector<std::string>& layers,
                                                      const ActivationStore& store, const AnalysisOptions& opts = {});

/// Mean off-diagonal value of each layer's matrix.
LayerCurve crosslingual_curve(const std::vector<CrossLingualMatrix>& matrices, Modality modality,
                              const std::vector<std::string>& layers);

/// Number of unordered pairs among n languages.
constexpr std::size_t pair_count(std::size_t n) noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }

// ---------------------------------------------------------------------------
// Baseline

struct BaselineStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation over trials
    std::size_t trials = 0;
};

/// SVCCA between independent standard-normal F_x x M and F_y x M matrices.
BaselineStats random_baseline(Eigen::Index fx, Eigen::Index fy, Eigen::Index m, std::size_t n_trials,
                              std::uint64_t seed, const SvccaConfig& cfg = {}, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Token overlap

enum class OverlapMode { jaccard, min_denominator };

OverlapMode parse_overlap_mode(std::string_view s);

/// Shared-token proportion of two token-id lists, treated as sets.
double shared_token_proportion(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                               OverlapMode mode = OverlapMode::jaccard);

struct TokenOverlapRecord {
    std::string lang_a;
    std::string lang_b;
    double shared_proportion = 0.0;
    std::size_t n_sentences = 0;
};

using TokenOverlapStats = std::vector<TokenOverlapRecord>;

/// Per-pair average of shared_token_proportion over parallel sentences.
/// Every language must have the same number of sentences.
TokenOverlapStats token_overlap_stats(const std::map<std::string, std::vector<std::vector<std::int64_t>>>& tokens,
                                      OverlapMode mode = OverlapMode::jaccard);

TokenOverlapStats read_token_overlap_csv(const std::filesystem::path& path);
void write_token_overlap_csv(const TokenOverlapStats& stats, const std::filesystem::path& path);

struct CorrelationResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n_pairs = 0;
};

/// Pearson correlation coefficient. Throws with fewer than 3 values or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Two-sided p-value of r under the null, t-distribution with n - 2 dof.
double pearson_p_value(double r, std::size_t n);

/// Correlate per-pair token overlap with the off-diagonal scores of `sims`.
/// The pair sets must be identical.
CorrelationResult token_overlap_correlation(const TokenOverlapStats& stats, const CrossLingualMatrix& sims);

// ---------------------------------------------------------------------------
// Gap comparison

struct GapReport {
    std::string language;
    std::string layer_tag;
    double cross_modal = 0.0;
    double text_min = 0.0, text_max = 0.0;
    double speech_min = 0.0, speech_max = 0.0;
    std::size_t partners = 0;

    double text_range() const noexcept { return text_max - text_min; }
    double speech_range() const noexcept { return speech_max - speech_min; }
};

/// Intra-lingual cross-modal score of `language` next to the spread of its
/// cross-lingual text and speech scores against every partner.
GapReport gap_comparison(const std::string& language, const std::vector<std::string>& partners,
                         const std::string& layer, const ActivationStore& store, const AnalysisOptions& opts = {});

/// Same report assembled from precomputed matrices at one layer.
GapReport gap_from_matrices(const std::string& language, double cross_modal, const CrossLingualMatrix& text,
                            const CrossLingualMatrix& speech);

// ---------------------------------------------------------------------------
// CSV output

/// Shortest round-trip decimal form.
std::string format_double(double v);

std::string records_csv(const std::vector<SimilarityRecord>& records);
std::string matrix_csv(const CrossLingualMatrix& m);
CrossLingualMatrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace repsim
