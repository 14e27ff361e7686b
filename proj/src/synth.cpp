#include "repsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <Eigen/QR>

#include "json.hpp"
#include "repsim/error.hpp"
#include "repsim/parallel.hpp"
#include "repsim/random.hpp"

namespace repsim::synth {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("synth config: " + msg); };
    if (n_sentences < 2) fail("n_sentences must be at least 2");
    if (semantic_dim < 2) fail("semantic_dim must be at least 2");
    if (text_dim < semantic_dim || speech_dim < semantic_dim)
        fail("feature dims must be at least semantic_dim so the lifts have full column rank");
    if (languages.empty()) fail("no languages");
    std::set<std::string> codes;
    for (const auto& l : languages) {
        if (l.code.empty()) fail("empty language code");
        if (!codes.insert(l.code).second) fail("duplicate language '" + l.code + "'");
    }
    if (n_layers < 1) fail("n_layers must be positive");
    if (!layer_tags.empty()) {
        if (static_cast<int>(layer_tags.size()) != n_layers) fail("layer_tags must have n_layers entries");
        if (std::set<std::string>(layer_tags.begin(), layer_tags.end()).size() != layer_tags.size())
            fail("layer_tags must be unique");
    }
    if (static_cast<int>(alpha.size()) != n_layers) fail("alpha must have n_layers entries");
    for (double a : alpha)
        if (!(a >= 0.0 && a <= 1.0)) fail("alpha values must lie in [0, 1]");
    auto in_dip = [&](int layer) {
        return early_dip && layer >= early_dip->first_layer && layer <= early_dip->last_layer;
    };
    for (int t = 1; t < n_layers; ++t)
        if (!in_dip(t) && !in_dip(t + 1) && alpha[t] > alpha[t - 1])
            fail("alpha must be nonincreasing outside the early dip (layer " + std::to_string(t + 1) + ")");
    if (early_dip) {
        if (early_dip->first_layer < 1 || early_dip->last_layer > n_layers ||
            early_dip->first_layer > early_dip->last_layer)
            fail("early_dip layer range is outside 1..n_layers");
        if (!(early_dip->extra >= 0.0)) fail("early_dip extra must be nonnegative");
    }
    for (auto [level, mult] : resource_scaling)
        if (!(mult > 0.0)) fail("resource multiplier for " + std::string(to_string(level)) + " must be positive");
    if (!(modality_distortion >= 0.0) || !(language_distortion >= 0.0)) fail("distortions must be nonnegative");
    if (!(text_language_scale >= 0.0) || !(speech_language_scale >= 0.0))
        fail("language-distortion scales must be nonnegative");
    if (!(family_coupling >= 0.0 && family_coupling <= 1.0)) fail("family_coupling must lie in [0, 1]");
    if (!(noise_sigma >= 0.0) || !(frame_jitter >= 0.0)) fail("noise and jitter must be nonnegative");
}

std::vector<std::string> SynthConfig::layers() const {
    if (!layer_tags.empty()) return layer_tags;
    std::vector<std::string> out;
    for (int t = 1; t <= n_layers; ++t) out.push_back("L" + std::to_string(t));
    return out;
}

double SynthConfig::effective_alpha(int layer) const {
    double a = alpha.at(static_cast<std::size_t>(layer - 1));
    if (early_dip && layer >= early_dip->first_layer && layer <= early_dip->last_layer) a += early_dip->extra;
    return a;
}

double SynthConfig::resource_multiplier(ResourceLevel level) const {
    auto it = resource_scaling.find(level);
    return it == resource_scaling.end() ? 1.0 : it->second;
}

SynthConfig config_from_json(const std::string& text) {
    SynthConfig c;
    try {
        const json j = json::parse(text);
        c.model_id = j.value("model_id", c.model_id);
        c.n_sentences = j.value("n_sentences", c.n_sentences);
        c.semantic_dim = j.value("semantic_dim", c.semantic_dim);
        for (const auto& l : j.at("languages")) {
            SynthLanguage lang;
            lang.code = l.at("code").get<std::string>();
            lang.resource_level = parse_resource_level(l.value("resource_level", std::string("high")));
            lang.family = l.value("family", lang.code);
            c.languages.push_back(std::move(lang));
        }
        c.n_layers = j.value("n_layers", c.n_layers);
        c.layer_tags = j.value("layer_tags", std::vector<std::string>{});
        if (j.contains("feature_dims")) {
            c.text_dim = j["feature_dims"].value("text", c.text_dim);
            c.speech_dim = j["feature_dims"].value("speech", c.speech_dim);
        }
        c.modality_distortion = j.value("modality_distortion", c.modality_distortion);
        c.language_distortion = j.value("language_distortion", c.language_distortion);
        if (j.contains("language_distortion_by_modality")) {
            c.text_language_scale = j["language_distortion_by_modality"].value("text", 1.0);
            c.speech_language_scale = j["language_distortion_by_modality"].value("speech", 1.0);
        }
        c.family_coupling = j.value("family_coupling", c.family_coupling);
        if (j.contains("alpha")) {
            c.alpha = j["alpha"].get<std::vector<double>>();
        } else {
            // Linear convergence from 1 to 0.1.
            for (int t = 0; t < c.n_layers; ++t)
                c.alpha.push_back(c.n_layers == 1 ? 1.0 : 1.0 - 0.9 * t / (c.n_layers - 1));
        }
        if (j.contains("early_dip") && !j["early_dip"].is_null()) {
            const auto& d = j["early_dip"];
            c.early_dip = EarlyDip{d.at("first_layer").get<int>(), d.at("last_layer").get<int>(),
                                   d.at("extra").get<double>()};
        }
        if (j.contains("resource_scaling"))
            for (const auto& [k, v] : j["resource_scaling"].items()) c.resource_scaling[parse_resource_level(k)] = v.get<double>();
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.frame_jitter = j.value("frame_jitter", c.frame_jitter);
        c.center_jitter = j.value("center_jitter", c.center_jitter);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_to_json(const SynthConfig& c) {
    json langs = json::array();
    for (const auto& l : c.languages)
        langs.push_back({{"code", l.code}, {"resource_level", to_string(l.resource_level)}, {"family", l.family}});
    json scaling = json::object();
    for (auto [level, mult] : c.resource_scaling) scaling[std::string(to_string(level))] = mult;
    json j = {
        {"model_id", c.model_id},
        {"n_sentences", c.n_sentences},
        {"semantic_dim", c.semantic_dim},
        {"languages", langs},
        {"n_layers", c.n_layers},
        {"layer_tags", c.layers()},
        {"feature_dims", {{"text", c.text_dim}, {"speech", c.speech_dim}}},
        {"modality_distortion", c.modality_distortion},
        {"language_distortion", c.language_distortion},
        {"language_distortion_by_modality", {{"text", c.text_language_scale}, {"speech", c.speech_language_scale}}},
        {"family_coupling", c.family_coupling},
        {"alpha", c.alpha},
        {"early_dip", c.early_dip ? json{{"first_layer", c.early_dip->first_layer},
                                         {"last_layer", c.early_dip->last_layer},
                                         {"extra", c.early_dip->extra}}
                                  : json(nullptr)},
        {"resource_scaling", scaling},
        {"noise_sigma", c.noise_sigma},
        {"frame_jitter", c.frame_jitter},
        {"center_jitter", c.center_jitter},
        {"seed", c.seed},
    };
    return j.dump(2);
}

SynthConfig read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json(text);
}

void write_config(const SynthConfig& cfg, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << config_to_json(cfg) << '\n';
}

// ---------------------------------------------------------------------------
// Generation

namespace {

Eigen::MatrixXd normal_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = standard_normal(rng);
    return m;
}

Eigen::VectorXd unit_direction(std::uint64_t seed, Eigen::Index dim) {
    Eigen::VectorXd v = normal_matrix(seed, dim, 1).col(0);
    return v / v.norm();
}

Eigen::RowVectorXd sentence_scales(std::uint64_t seed, int n) { return normal_matrix(seed, 1, n).row(0); }

/// F x d matrix with orthonormal columns.
Eigen::MatrixXd lift(std::uint64_t seed, int features, int dim) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(normal_matrix(seed, features, dim));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(features, dim);
    return q;
}

const SynthLanguage& find_language(const SynthConfig& cfg, const std::string& code) {
    for (const auto& l : cfg.languages)
        if (l.code == code) return l;
    throw ConfigError("synth world has no language '" + code + "'");
}

std::string modality_name(Modality m) { return std::string(to_string(m)); }

}  // namespace

Eigen::MatrixXd cell_representation(const SynthConfig& cfg, const std::string& language, Modality modality,
                                    int layer, bool include_noise) {
    const auto& lang = find_language(cfg, language);
    const int d = cfg.semantic_dim;
    const int n = cfg.n_sentences;
    const auto mod = modality_name(modality);

    const Eigen::MatrixXd z = normal_matrix(derive_seed(cfg.seed, "semantics"), d, n);

    const double lang_scale = modality == Modality::text ? cfg.text_language_scale : cfg.speech_language_scale;
    const double a = cfg.effective_alpha(layer) * cfg.resource_multiplier(lang.resource_level);

    Eigen::MatrixXd distortion =
        cfg.modality_distortion * unit_direction(derive_seed(cfg.seed, "dir/modality", mod), d) *
        sentence_scales(derive_seed(cfg.seed, "scale/modality", mod), n);
    const double c = cfg.family_coupling;
    const Eigen::MatrixXd family = unit_direction(derive_seed(cfg.seed, "dir/family", lang.family), d) *
                                   sentence_scales(derive_seed(cfg.seed, "scale/family", lang.family), n);
    const Eigen::MatrixXd own = unit_direction(derive_seed(cfg.seed, "dir/language", lang.code), d) *
                                sentence_scales(derive_seed(cfg.seed, "scale/language", lang.code), n);
    distortion += cfg.language_distortion * lang_scale * (c * family + (1.0 - c) * own);

    Eigen::MatrixXd latent = z + a * distortion;
    if (include_noise && cfg.noise_sigma > 0.0)
        latent += cfg.noise_sigma * normal_matrix(derive_seed(cfg.seed, "noise", lang.code, mod, layer), d, n);

    const int features = modality == Modality::text ? cfg.text_dim : cfg.speech_dim;
    return lift(derive_seed(cfg.seed, "lift", mod), features, d) * latent;
}

namespace {

ActivationSet make_cell(const SynthConfig& cfg, const std::string& language, Modality modality, int layer) {
    const auto layers = cfg.layers();
    const auto mod = modality_name(modality);
    const Eigen::MatrixXd rep = cell_representation(cfg, language, modality, layer, true);

    ActivationSet set;
    set.descriptor = {cfg.model_id, layers[static_cast<std::size_t>(layer - 1)], language, modality};
    set.feature_dim = static_cast<std::uint32_t>(rep.rows());
    set.sentences.reserve(static_cast<std::size_t>(cfg.n_sentences));

    const auto [t_min, t_max] = modality == Modality::speech ? std::pair{4, 12} : std::pair{1, 3};
    Rng jitter_rng(derive_seed(cfg.seed, "jitter", language, mod, layer));
    char id[32];
    for (int s = 0; s < cfg.n_sentences; ++s) {
        // Sentence length is fixed per (language, modality, sentence) across layers.
        Rng len_rng(derive_seed(cfg.seed, "frames", language, mod, s));
        const int frames = t_min + static_cast<int>(uniform_index(len_rng, static_cast<std::uint64_t>(t_max - t_min + 1)));

        Eigen::MatrixXd jitter(frames, rep.rows());
        for (Eigen::Index k = 0; k < jitter.size(); ++k) jitter.data()[k] = cfg.frame_jitter * standard_normal(jitter_rng);
        if (cfg.center_jitter) jitter.rowwise() -= jitter.colwise().mean();

        std::snprintf(id, sizeof id, "s%05d", s);
        FrameMatrix f = (jitter.rowwise() + rep.col(s).transpose()).cast<float>();
        set.sentences.push_back({id, std::move(f)});
    }
    return set;
}

}  // namespace

std::vector<ActivationSet> generate_world(const SynthConfig& cfg, std::size_t workers) {
    cfg.validate();
    struct Task {
        std::string language;
        Modality modality;
        int layer;
    };
    std::vector<Task> tasks;
    for (const auto& l : cfg.languages)
        for (auto m : {Modality::text, Modality::speech})
            for (int t = 1; t <= cfg.n_layers; ++t) tasks.push_back({l.code, m, t});
    return parallel_map(tasks.size(), workers,
                        [&](std::size_t i) { return make_cell(cfg, tasks[i].language, tasks[i].modality, tasks[i].layer); });
}

std::vector<LanguageMeta> language_meta(const SynthConfig& cfg) {
    std::vector<LanguageMeta> out;
    for (const auto& l : cfg.languages) {
        LanguageMeta m;
        m.code = l.code;
        m.name = l.code;
        m.script = "synthetic";
        m.family = l.family;
        m.resource_level = l.resource_level;
        m.sentences_original = cfg.n_sentences;
        m.sentences_deduplicated = cfg.n_sentences;
        out.push_back(std::move(m));
    }
    return out;
}

void write_world(const SynthConfig& cfg, const fs::path& dir, std::size_t workers) {
    cfg.validate();
    fs::create_directories(dir);
    const auto layers = cfg.layers();
    struct Task {
        std::string language;
        Modality modality;
        int layer;
    };
    std::vector<Task> tasks;
    for (const auto& l : cfg.languages)
        for (auto m : {Modality::text, Modality::speech})
            for (int t = 1; t <= cfg.n_layers; ++t) tasks.push_back({l.code, m, t});

    // Generate and write per task so the whole world never sits in memory.
    parallel_map(tasks.size(), workers, [&](std::size_t i) {
        const auto& t = tasks[i];
        const auto set = make_cell(cfg, t.language, t.modality, t.layer);
        write_activation_file(set, dir / (modality_name(t.modality) + "_" + t.language + "_" +
                                          layers[static_cast<std::size_t>(t.layer - 1)] + ".actv"));
        return 0;
    });

    std::vector<std::string> codes;
    for (const auto& l : cfg.languages) codes.push_back(l.code);
    std::ofstream store(dir / "store.json", std::ios::trunc);
    store << json{{"model_id", cfg.model_id}, {"layers", layers}, {"languages", codes}}.dump(2) << '\n';
    write_language_meta(language_meta(cfg), dir / "languages.json");
}

std::map<std::string, std::vector<std::vector<std::int64_t>>> token_lists(const SynthConfig& cfg,
                                                                         int tokens_per_sentence) {
    cfg.validate();
    if (tokens_per_sentence < 1) throw ConfigError("tokens_per_sentence must be positive");
    constexpr std::uint64_t kIdMask = (1ULL << 62) - 1;
    std::map<std::string, std::vector<std::vector<std::int64_t>>> out;
    for (const auto& l : cfg.languages) {
        auto& sents = out[l.code];
        sents.resize(static_cast<std::size_t>(cfg.n_sentences));
        Rng rng(derive_seed(cfg.seed, "tokens", l.code));
        for (int s = 0; s < cfg.n_sentences; ++s) {
            auto& toks = sents[static_cast<std::size_t>(s)];
            for (int p = 0; p < tokens_per_sentence; ++p) {
                const bool shared = uniform_open(rng) < cfg.family_coupling;
                const auto id = shared ? derive_seed(cfg.seed, "token/family", l.family, s, p)
                                       : derive_seed(cfg.seed, "token/language", l.code, s, p);
                toks.push_back(static_cast<std::int64_t>(id & kIdMask));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ground truth

GroundTruth ground_truth_summary(const SynthConfig& cfg) {
    cfg.validate();
    GroundTruth gt;
    const auto layers = cfg.layers();
    auto in_dip = [&](int t) { return cfg.early_dip && t >= cfg.early_dip->first_layer && t <= cfg.early_dip->last_layer; };

    const bool modality_differs = cfg.modality_distortion > 0.0 || cfg.text_language_scale != cfg.speech_language_scale;
    bool decreasing = true;
    int outside = 0;
    for (int t = 1; t <= cfg.n_layers; ++t) {
        if (in_dip(t)) continue;
        ++outside;
        for (int u = t + 1; u <= cfg.n_layers; ++u)
            if (!in_dip(u) && !(cfg.alpha[static_cast<std::size_t>(u - 1)] < cfg.alpha[static_cast<std::size_t>(t - 1)]))
                decreasing = false;
    }
    gt.curves_rise = modality_differs && decreasing && outside >= 2;
    if (gt.curves_rise) gt.statements.push_back("cross-modal curves rise with depth outside the dip layers");

    if (cfg.early_dip && cfg.early_dip->extra > 0.0) {
        gt.dip_layers = std::pair{cfg.early_dip->first_layer, cfg.early_dip->last_layer};
        double peak = -1.0;
        int argpeak = 0;
        for (int t = 1; t <= cfg.n_layers; ++t)
            if (cfg.effective_alpha(t) > peak) {
                peak = cfg.effective_alpha(t);
                argpeak = t;
            }
        gt.minimum_in_dip = modality_differs && in_dip(argpeak);
        if (gt.minimum_in_dip)
            gt.statements.push_back("cross-modal curve minimum lies in layers " + layers[cfg.early_dip->first_layer - 1] +
                                    ".." + layers[cfg.early_dip->last_layer - 1]);
    }

    std::set<ResourceLevel> present;
    for (const auto& l : cfg.languages) present.insert(l.resource_level);
    std::vector<ResourceLevel> levels(present.begin(), present.end());
    std::sort(levels.begin(), levels.end(), [&](ResourceLevel a, ResourceLevel b) {
        return cfg.resource_multiplier(a) > cfg.resource_multiplier(b);
    });
    bool strict = levels.size() >= 2 && cfg.modality_distortion > 0.0;
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(cfg.resource_multiplier(levels[i - 1]) > cfg.resource_multiplier(levels[i]))) strict = false;
    if (strict) {
        gt.resource_order = levels;
        std::string s = "cross-modal score ordering at every layer:";
        for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? " < " : " ") + std::string(to_string(levels[i]));
        gt.statements.push_back(s);
    }

    const double text_lang = cfg.language_distortion * cfg.text_language_scale;
    gt.modality_gap_dominates = cfg.modality_distortion > text_lang;
    gt.language_gap_dominates = cfg.modality_distortion == 0.0 && text_lang > 0.0 &&
                                cfg.text_language_scale == cfg.speech_language_scale;
    if (gt.modality_gap_dominates)
        gt.statements.push_back("intra-lingual cross-modal score below the best cross-lingual text score");
    if (gt.language_gap_dominates)
        gt.statements.push_back("intra-lingual cross-modal score above every cross-lingual score");

    gt.text_above_speech = cfg.language_distortion > 0.0 && cfg.speech_language_scale > cfg.text_language_scale;
    if (gt.text_above_speech) gt.statements.push_back("cross-lingual text curve above the speech curve at every layer");
    return gt;
}

std::string to_json(const GroundTruth& gt, int indent) {
    json order = json::array();
    for (auto l : gt.resource_order) order.push_back(to_string(l));
    json j = {
        {"curves_rise", gt.curves_rise},
        {"dip_layers", gt.dip_layers ? json{gt.dip_layers->first, gt.dip_layers->second} : json(nullptr)},
        {"minimum_in_dip", gt.minimum_in_dip},
        {"resource_order_ascending", order},
        {"modality_gap_dominates", gt.modality_gap_dominates},
        {"language_gap_dominates", gt.language_gap_dominates},
        {"text_above_speech", gt.text_above_speech},
        {"statements", gt.statements},
    };
    return j.dump(indent);
}

}  // namespace repsim::synth
