#include "repsim/study.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"
#include "repsim/error.hpp"
#include "repsim/random.hpp"

namespace repsim {

namespace fs = std::filesystem;
using nlohmann::json;

void RunSpec::validate() const {
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (store_root.empty()) throw ConfigError("no store directory given");
    if (output_dir.empty()) throw ConfigError("no output directory given");
    if (modalities.empty()) throw ConfigError("no modalities selected");
    if (cap_crossmodal && *cap_crossmodal < 2) throw ConfigError("cross-modal cap must be at least 2");
    if (cap_crosslingual && *cap_crosslingual < 2) throw ConfigError("cross-lingual cap must be at least 2");
    svcca.validate();
}

namespace {

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string curve_rows(const std::string& kind, const LayerCurve& c) {
    std::string out;
    for (std::size_t t = 0; t < c.layers.size(); ++t)
        out += kind + ',' + c.group + ',' + c.layers[t] + ',' + format_double(c.values[t]) + ',' +
               std::to_string(c.n_languages) + '\n';
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

StudySummary run_study(const RunSpec& spec) {
    spec.validate();
    const auto store = ActivationStore::open(spec.store_root);

    const auto languages = spec.languages.empty() ? store->languages() : spec.languages;
    const auto layers = spec.layers.empty() ? store->layers() : spec.layers;
    if (languages.empty()) throw ConfigError("store " + spec.store_root.string() + " holds no languages");
    if (layers.empty()) throw ConfigError("store " + spec.store_root.string() + " holds no layers");
    const std::string gap_layer = spec.gap_layer.value_or(layers.back());
    if (std::find(layers.begin(), layers.end(), gap_layer) == layers.end())
        throw ConfigError("gap layer '" + gap_layer + "' is not among the studied layers");

    const bool both_modalities = std::count(spec.modalities.begin(), spec.modalities.end(), Modality::text) &&
                                 std::count(spec.modalities.begin(), spec.modalities.end(), Modality::speech);

    // Every requested cell must exist before any work starts.
    std::vector<CellRef> needed;
    for (const auto& l : languages)
        for (auto m : spec.modalities)
            for (const auto& t : layers) needed.push_back({l, m, t});
    if (auto miss = store->missing(needed); !miss.empty()) throw MissingCellsError(std::move(miss));

    std::optional<ResourceMap> resources;
    if (spec.language_meta) {
        resources = resource_map(read_language_meta(*spec.language_meta));
    } else if (fs::exists(spec.store_root / "languages.json")) {
        resources = resource_map(read_language_meta(spec.store_root / "languages.json"));
    }
    if (resources)
        for (const auto& l : languages)
            if (!resources->count(l)) throw ConfigError("language metadata has no entry for '" + l + "'");

    fs::create_directories(spec.output_dir);
    StudySummary summary;
    json summary_json;
    std::string curves_csv = "kind,group,layer_tag,value,n_languages\n";
    std::vector<SimilarityRecord> all_records;

    AnalysisOptions cm_opts{spec.svcca, spec.cap_crossmodal, spec.workers, false};
    AnalysisOptions cl_opts{spec.svcca, spec.cap_crosslingual, spec.workers, false};

    std::optional<CrossModalCurves> crossmodal;
    if (both_modalities) {
        crossmodal = crossmodal_curve(languages, layers, *store, cm_opts, resources ? &*resources : nullptr);
        summary.crossmodal_records = crossmodal->records.size();
        all_records.insert(all_records.end(), crossmodal->records.begin(), crossmodal->records.end());
        json groups = json::object();
        for (const auto& c : crossmodal->curves) {
            curves_csv += curve_rows("cross_modal", c);
            groups[c.group] = {{"mean", mean_of(c.values)}, {"final_layer", c.values.back()}, {"n_languages", c.n_languages}};
        }
        summary_json["cross_modal"] = groups;
    }

    std::vector<CrossLingualMatrix> matrices;
    if (languages.size() >= 2) {
        matrices = crosslingual_matrices(languages, spec.modalities, layers, *store, cl_opts);
        json cl = json::object();
        for (auto m : spec.modalities) {
            const auto curve = crosslingual_curve(matrices, m, layers);
            const std::string kind = m == Modality::text ? "cross_lingual_text" : "cross_lingual_speech";
            curves_csv += curve_rows(kind, curve);
            cl[kind] = {{"mean", mean_of(curve.values)}, {"final_layer", curve.values.back()}, {"pairs", pair_count(languages.size())}};
        }
        summary_json["cross_lingual"] = cl;
        for (const auto& m : matrices) {
            const auto name = "matrix_" + std::string(to_string(m.modality)) + "_" + m.layer_tag + ".csv";
            write_text(spec.output_dir / name, matrix_csv(m));
            summary.files.push_back(name);
            summary.crosslingual_records += m.records.size();
            all_records.insert(all_records.end(), m.records.begin(), m.records.end());
        }
    }
    write_text(spec.output_dir / "curves.csv", curves_csv);
    summary.files.push_back("curves.csv");

    // Gap report at one layer, from the matrices already computed.
    std::string gaps_csv = "language,layer_tag,cross_modal,text_min,text_max,speech_min,speech_max,partners\n";
    if (crossmodal && languages.size() >= 2) {
        auto find_matrix = [&](Modality m) -> const CrossLingualMatrix& {
            return *std::find_if(matrices.begin(), matrices.end(),
                                 [&](const CrossLingualMatrix& x) { return x.modality == m && x.layer_tag == gap_layer; });
        };
        const auto& text = find_matrix(Modality::text);
        const auto& speech = find_matrix(Modality::speech);
        const auto layer_index = static_cast<std::size_t>(std::find(layers.begin(), layers.end(), gap_layer) - layers.begin());
        std::size_t below = 0;
        for (std::size_t li = 0; li < languages.size(); ++li) {
            const double cm = crossmodal->records[li * layers.size() + layer_index].score;
            const auto g = gap_from_matrices(languages[li], cm, text, speech);
            if (g.cross_modal < g.text_max) ++below;
            gaps_csv += g.language + ',' + g.layer_tag + ',' + format_double(g.cross_modal) + ',' +
                        format_double(g.text_min) + ',' + format_double(g.text_max) + ',' + format_double(g.speech_min) +
                        ',' + format_double(g.speech_max) + ',' + std::to_string(g.partners) + '\n';
        }
        summary_json["gaps"] = {{"layer_tag", gap_layer},
                                {"languages_with_cross_modal_below_best_text", below},
                                {"languages", languages.size()}};
    }
    write_text(spec.output_dir / "gaps.csv", gaps_csv);
    summary.files.push_back("gaps.csv");

    // Random baselines, one per distinct (F_x, F_y, M) shape.
    std::string baselines_csv = "kind,layer_tag,f_x,f_y,m_points,trials,mean,std\n";
    if (spec.baseline_trials > 0) {
        using Shape = std::tuple<Eigen::Index, Eigen::Index, Eigen::Index>;
        std::map<Shape, BaselineStats> cache;
        auto baseline = [&](const Shape& s) {
            auto it = cache.find(s);
            if (it != cache.end()) return it->second;
            const auto [fx, fy, m] = s;
            const auto stats = random_baseline(fx, fy, m, spec.baseline_trials,
                                               derive_seed(spec.seed, "study-baseline", fx, fy, m), spec.svcca,
                                               spec.workers);
            return cache.emplace(s, stats).first->second;
        };
        // One row per (kind, layer): the first record of that kind at that layer fixes the shape.
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& r : all_records) {
            const std::string kind(to_string(r.kind));
            if (!seen.insert({kind, r.layer_tag}).second) continue;
            const auto fx = store->get({r.lang_a, r.modality_a, r.layer_tag})->feature_dim();
            const auto fy = store->get({r.lang_b, r.modality_b, r.layer_tag})->feature_dim();
            const auto s = baseline({fx, fy, r.m_points});
            baselines_csv += kind + ',' + r.layer_tag + ',' + std::to_string(fx) + ',' + std::to_string(fy) + ',' +
                             std::to_string(r.m_points) + ',' + std::to_string(s.trials) + ',' +
                             format_double(s.mean) + ',' + format_double(s.std) + '\n';
        }
    }
    write_text(spec.output_dir / "baselines.csv", baselines_csv);
    summary.files.push_back("baselines.csv");

    write_text(spec.output_dir / "records.csv", records_csv(all_records));
    summary.files.push_back("records.csv");

    summary_json["languages"] = languages;
    summary_json["layers"] = layers;
    summary_json["records"] = {{"cross_modal", summary.crossmodal_records},
                               {"cross_lingual", summary.crosslingual_records}};
    summary_json["svcca"] = {{"variance_fraction", spec.svcca.variance_fraction},
                             {"epsilon", spec.svcca.epsilon},
                             {"center", spec.svcca.center}};
    summary_json["seed"] = spec.seed;
    write_text(spec.output_dir / "summary.json", summary_json.dump(2) + "\n");
    summary.files.push_back("summary.json");
    return summary;
}

}  // namespace repsim
