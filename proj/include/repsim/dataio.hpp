#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace repsim {

enum class Modality { text, speech };

std::string_view to_string(Modality m) noexcept;
Modality parse_modality(std::string_view s);

enum class ResourceLevel { high, medium, low };

std::string_view to_string(ResourceLevel r) noexcept;
ResourceLevel parse_resource_level(std::string_view s);

/// Identifies one activation cell: which model, which layer, which language
/// and modality the activations were taken from.
struct CellDescriptor {
    std::string model_id;
    std::string layer_tag;
    std::string language;
    Modality modality = Modality::text;

    friend bool operator==(const CellDescriptor&, const CellDescriptor&) = default;
};

/// "lang/modality/layer", used in diagnostics and as a store key.
std::string describe(const CellDescriptor& d);

/// T x F frames of one sentence, row-major to match the on-disk layout.
using FrameMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SentenceSequence {
    std::string id;
    FrameMatrix frames;
};

/// Ragged per-sentence activation sequences for one cell.
///
/// Invariants (checked by validate()): every sequence has feature_dim columns
/// and at least one frame, ids are unique, and all values are finite.
struct ActivationSet {
    CellDescriptor descriptor;
    std::uint32_t feature_dim = 0;
    std::vector<SentenceSequence> sentences;

    void validate() const;
};

/// Non-fatal observations about a set that is legal to store but not to
/// analyze (M < 2).
std::vector<std::string> io_warnings(const ActivationSet& set);

/// F x M meanpooled representations; columns follow sentence_ids.
struct PooledMatrix {
    Eigen::MatrixXd features;
    std::vector<std::string> sentence_ids;
    CellDescriptor descriptor;

    Eigen::Index feature_dim() const noexcept { return features.rows(); }
    Eigen::Index points() const noexcept { return features.cols(); }

    /// Throws unless columns and ids agree, every entry is finite and M >= min_points.
    void validate(Eigen::Index min_points = 2) const;
};

// ---------------------------------------------------------------------------
// ACTV binary format

inline constexpr std::uint32_t kActvVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;

/// Serialize to the canonical ACTV byte layout.
std::vector<std::uint8_t> encode_activation_set(const ActivationSet& set);

/// Parse ACTV bytes. The descriptor is left empty; it lives in the sidecar.
ActivationSet decode_activation_set(std::span<const std::uint8_t> bytes);

/// Reads `path` and, when present, its `<path>.json` sidecar.
ActivationSet read_activation_file(const std::filesystem::path& path);

/// Writes `path` and its `<path>.json` sidecar.
void write_activation_file(const ActivationSet& set, const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& actv_path);

// ---------------------------------------------------------------------------
// Pooling and alignment

/// Column j is the mean of the frames of sentence j, accumulated in double.
PooledMatrix meanpool(const ActivationSet& set);

/// Pooled matrix as a one-frame-per-sentence ActivationSet, for writing back to ACTV.
ActivationSet as_activation_set(const PooledMatrix& pooled);

/// Restrict both matrices to their shared sentence ids in ascending id
/// order, keeping at most `cap` columns.
std::pair<PooledMatrix, PooledMatrix> align_pair(const PooledMatrix& a, const PooledMatrix& b,
                                                 std::optional<std::size_t> cap = std::nullopt);

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
    std::string sentence_id;
    std::string language;
    Modality modality = Modality::text;
    std::string source_uri;
    /// Transcript the duplicate key is derived from.
    std::string text_key;
    std::optional<std::string> is_duplicate_of;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct SentenceManifest {
    std::vector<ManifestEntry> entries;

    /// Duplicate chains must be acyclic and point at existing entries.
    void validate() const;

    friend bool operator==(const SentenceManifest&, const SentenceManifest&) = default;
};

/// Lowercase ASCII, collapse whitespace runs, trim.
std::string normalize_text_key(std::string_view text);

/// Keep exactly one uniformly chosen member per (language, modality,
/// normalized text) group. Survivors keep their input order.
SentenceManifest deduplicate(const SentenceManifest& manifest, std::uint64_t seed);

SentenceManifest read_sentence_manifest(const std::filesystem::path& path);
void write_sentence_manifest(const SentenceManifest& manifest, const std::filesystem::path& path);

struct LanguageMeta {
    std::string code;
    std::string name;
    std::string script;
    std::string family;
    ResourceLevel resource_level = ResourceLevel::high;
    bool seamless_salmonn = false;
    bool sonar = false;
    std::optional<int> sentences_original;
    std::optional<int> sentences_deduplicated;
};

std::vector<LanguageMeta> read_language_meta(const std::filesystem::path& path);
void write_language_meta(const std::vector<LanguageMeta>& meta, const std::filesystem::path& path);

}  // namespace repsim
