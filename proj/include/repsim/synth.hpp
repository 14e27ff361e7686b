#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repsim/dataio.hpp"

namespace repsim::synth {

struct SynthLanguage {
    std::string code;
    ResourceLevel resource_level = ResourceLevel::high;
    std::string family;
};

/// Extra distortion added to the convergence schedule on a layer range
/// (1-based, inclusive).
struct EarlyDip {
    int first_layer = 1;
    int last_layer = 2;
    double extra = 0.0;
};

/// Ground-truth parameters of a synthetic multilingual, multimodal world.
///
/// Sentence s of language l in modality m at layer t is represented as
///
///   P_m [ z_s + a_t r_l ( d_mod u_m g_{s,m}
///                         + d_lang w_m ( c v_fam(l) g_{s,fam} + (1 - c) v_l g_{s,l} ) )
///         + noise ]
///
/// with z_s ~ N(0, I_d), unit directions u, v, standard-normal per-sentence
/// scales g, a_t the schedule (plus any early dip), r_l the resource
/// multiplier, w_m the per-modality language-distortion scale and P_m a
/// lift with orthonormal columns.
struct SynthConfig {
    std::string model_id = "synth";
    int n_sentences = 200;
    int semantic_dim = 16;
    std::vector<SynthLanguage> languages;
    int n_layers = 10;
    /// Optional explicit layer tags; defaults to L1..Ln.
    std::vector<std::string> layer_tags;
    int text_dim = 32;
    int speech_dim = 48;
    double modality_distortion = 1.0;
    double language_distortion = 0.2;
    double text_language_scale = 1.0;
    double speech_language_scale = 1.0;
    double family_coupling = 0.5;
    /// Convergence schedule, one value per layer in [0, 1], nonincreasing outside the dip.
    std::vector<double> alpha;
    std::optional<EarlyDip> early_dip;
    std::map<ResourceLevel, double> resource_scaling{
        {ResourceLevel::high, 1.0}, {ResourceLevel::medium, 1.0}, {ResourceLevel::low, 1.0}};
    double noise_sigma = 0.0;
    /// Per-frame jitter around the sentence representation.
    double frame_jitter = 0.5;
    /// Remove the sample mean of the jitter so pooled frames equal the representation.
    bool center_jitter = true;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<std::string> layers() const;
    /// Schedule value with the early dip applied; layer is 1-based.
    double effective_alpha(int layer) const;
    double resource_multiplier(ResourceLevel level) const;
};

SynthConfig read_config(const std::filesystem::path& path);
void write_config(const SynthConfig& cfg, const std::filesystem::path& path);
SynthConfig config_from_json(const std::string& text);
std::string config_to_json(const SynthConfig& cfg);

/// One ActivationSet per (language, modality, layer), in that nesting order.
std::vector<ActivationSet> generate_world(const SynthConfig& cfg, std::size_t workers = 1);

/// Noise-free pooled representation of one cell (what meanpool should recover
/// when jitter and noise are zero-mean).
Eigen::MatrixXd cell_representation(const SynthConfig& cfg, const std::string& language, Modality modality, int layer,
                                    bool include_noise = true);

/// Writes every cell as `<modality>_<language>_<layer>.actv` plus sidecar,
/// `store.json` (layer order) and `languages.json`.
void write_world(const SynthConfig& cfg, const std::filesystem::path& dir, std::size_t workers = 1);

std::vector<LanguageMeta> language_meta(const SynthConfig& cfg);

/// Per-language token-id lists for every sentence. Languages of one family
/// draw a share of tokens from a family vocabulary that grows with
/// family_coupling, so token overlap tracks the family component of the
/// language distortion.
std::map<std::string, std::vector<std::vector<std::int64_t>>> token_lists(const SynthConfig& cfg,
                                                                         int tokens_per_sentence = 12);

/// Orderings a correct analysis pipeline must reproduce on this world.
struct GroundTruth {
    bool curves_rise = false;
    std::optional<std::pair<int, int>> dip_layers;
    bool minimum_in_dip = false;
    /// Resource levels in expected ascending order of cross-modal score;
    /// empty when all multipliers are equal.
    std::vector<ResourceLevel> resource_order;
    bool modality_gap_dominates = false;
    bool language_gap_dominates = false;
    bool text_above_speech = false;
    std::vector<std::string> statements;
};

GroundTruth ground_truth_summary(const SynthConfig& cfg);
std::string to_json(const GroundTruth& gt, int indent = 2);

}  // namespace repsim::synth
