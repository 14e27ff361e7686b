// repsim command-line front end.
//
// Exit codes: 0 success, 2 input error, 3 incomplete activation store.
// stdout carries data only; diagnostics go to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "repsim/analysis.hpp"
#include "repsim/dataio.hpp"
#include "repsim/error.hpp"
#include "repsim/projection.hpp"
#include "repsim/study.hpp"
#include "repsim/svcca.hpp"
#include "repsim/synth.hpp"
#include "repsim/version.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitInput = 2;
constexpr int kExitIncomplete = 3;

std::size_t default_workers() {
    if (const char* env = std::getenv("REPSIM_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring invalid REPSIM_WORKERS='" << env << "'\n";
    }
    return 1;
}

struct SvccaFlags {
    double k = 0.90;
    double epsilon = 1e-10;
    bool no_center = false;

    void attach(CLI::App* app) {
        app->add_option("--k", k, "Fraction of variance kept by the SVD step")->check(CLI::Range(0.0, 1.0));
        app->add_option("--epsilon", epsilon, "Diagonal loading of the covariance blocks");
        app->add_flag("--no-center", no_center, "Skip row centering");
    }
    repsim::SvccaConfig config() const { return {k, epsilon, !no_center}; }
};

std::vector<repsim::Modality> parse_modalities(const std::vector<std::string>& names) {
    std::vector<repsim::Modality> out;
    for (const auto& n : names) out.push_back(repsim::parse_modality(n));
    return out;
}

json descriptor_json(const repsim::CellDescriptor& d) {
    return {{"model_id", d.model_id}, {"layer_tag", d.layer_tag}, {"language", d.language},
            {"modality", repsim::to_string(d.modality)}};
}

void write_or_print(const std::string& content, const std::string& path) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw repsim::IoError("cannot write " + path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Representation similarity toolkit: SVCCA over speech/text activations"};
    app.set_version_flag("--version", std::string("repsim ") + repsim::kVersion);
    app.require_subcommand(1);

    // score ------------------------------------------------------------------
    auto* score = app.add_subcommand("score", "SVCCA between two ACTV files");
    std::string score_x, score_y;
    std::optional<std::size_t> score_cap;
    bool override_taxonomy = false;
    SvccaFlags score_flags;
    score->add_option("--x", score_x, "First ACTV file")->required();
    score->add_option("--y", score_y, "Second ACTV file")->required();
    score->add_option("--cap", score_cap, "Keep at most this many aligned sentences");
    score->add_flag("--override-taxonomy", override_taxonomy,
                    "Allow pairs that differ in both language and modality");
    score_flags.attach(score);

    // pool -------------------------------------------------------------------
    auto* pool = app.add_subcommand("pool", "Meanpool an ACTV file into one frame per sentence");
    std::string pool_in, pool_out;
    pool->add_option("--in", pool_in, "Input ACTV file")->required();
    pool->add_option("--out", pool_out, "Output ACTV file")->required();

    // study ------------------------------------------------------------------
    auto* study = app.add_subcommand("study", "Cross-modal curves, cross-lingual matrices, gaps and baselines");
    repsim::RunSpec run;
    std::string study_store, study_out, study_meta, gap_layer;
    std::vector<std::string> study_modalities{"text", "speech"};
    std::optional<std::size_t> cap_cm, cap_cl;
    SvccaFlags study_flags;
    run.workers = default_workers();
    study->add_option("--store", study_store, "Directory of ACTV files")->required();
    study->add_option("--out", study_out, "Output directory")->required();
    study->add_option("--languages", run.languages, "Languages (default: all in store)")->delimiter(',');
    study->add_option("--layers", run.layers, "Layer tags in order (default: store order)")->delimiter(',');
    study->add_option("--modalities", study_modalities, "Modalities")->delimiter(',');
    study->add_option("--meta", study_meta, "Language metadata JSON (default: <store>/languages.json)");
    study->add_option("--workers", run.workers, "Worker threads (default: REPSIM_WORKERS or 1)")->check(CLI::PositiveNumber);
    study->add_option("--seed", run.seed, "Seed for random baselines");
    study->add_option("--cap-crossmodal", cap_cm, "Aligned-sentence cap for cross-modal pairs");
    study->add_option("--cap-crosslingual", cap_cl, "Aligned-sentence cap for cross-lingual pairs");
    study->add_option("--gap-layer", gap_layer, "Layer for the gap report (default: last)");
    study->add_option("--baseline-trials", run.baseline_trials, "Random-baseline trials per shape (0 disables)");
    study_flags.attach(study);

    // baseline ---------------------------------------------------------------
    auto* baseline = app.add_subcommand("baseline", "SVCCA between random matrices of given shapes");
    long fx = 0, fy = 0, m_points = 0;
    std::size_t trials = 100, baseline_workers = default_workers();
    std::uint64_t baseline_seed = 0;
    SvccaFlags baseline_flags;
    baseline->add_option("--fx", fx, "Feature size of X")->required()->check(CLI::PositiveNumber);
    baseline->add_option("--fy", fy, "Feature size of Y")->required()->check(CLI::PositiveNumber);
    baseline->add_option("--m", m_points, "Number of data points")->required()->check(CLI::Range(2L, 1L << 30));
    baseline->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
    baseline->add_option("--seed", baseline_seed, "Seed");
    baseline->add_option("--workers", baseline_workers, "Worker threads")->check(CLI::PositiveNumber);
    baseline_flags.attach(baseline);

    // correlate --------------------------------------------------------------
    auto* correlate = app.add_subcommand("correlate", "Pearson correlation of token overlap and similarity");
    std::string overlap_csv, matrix_csv;
    correlate->add_option("--overlap", overlap_csv, "CSV: lang_a,lang_b,shared_proportion,n_sentences")->required();
    correlate->add_option("--matrix", matrix_csv, "Cross-lingual matrix CSV written by study")->required();

    // project ----------------------------------------------------------------
    auto* project = app.add_subcommand("project", "2-D t-SNE or PCA layout of pooled sentences");
    std::vector<std::string> project_inputs;
    std::string project_out, project_method = "tsne", project_meta;
    repsim::ProjectionConfig pcfg;
    project->add_option("--inputs", project_inputs, "ACTV files to project together")->required();
    project->add_option("--method", project_method, "tsne or pca");
    project->add_option("--perplexity", pcfg.perplexity, "t-SNE perplexity");
    project->add_option("--iterations", pcfg.iterations, "t-SNE iterations");
    project->add_option("--learning-rate", pcfg.learning_rate, "t-SNE learning rate");
    project->add_option("--seed", pcfg.seed, "Seed");
    project->add_option("--out", project_out, "Write CSV here and print a silhouette summary instead");
    project->add_option("--meta", project_meta, "Language metadata JSON for family silhouettes");

    // synth ------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a synthetic activation world");
    std::string synth_config, synth_out, synth_tokens;
    bool synth_truth = false;
    std::size_t synth_workers = default_workers();
    synth->add_option("--config", synth_config, "SynthConfig JSON")->required();
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--tokens", synth_tokens, "Also write token-overlap CSV to this path");
    synth->add_flag("--ground-truth", synth_truth, "Print the expected orderings as JSON");
    synth->add_option("--workers", synth_workers, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*score) {
            auto x = repsim::meanpool(repsim::read_activation_file(score_x));
            auto y = repsim::meanpool(repsim::read_activation_file(score_y));
            json out = json::object();
            const repsim::CellRef rx{x.descriptor.language, x.descriptor.modality, x.descriptor.layer_tag};
            const repsim::CellRef ry{y.descriptor.language, y.descriptor.modality, y.descriptor.layer_tag};
            if (!x.descriptor.language.empty() && !y.descriptor.language.empty() && !(rx == ry)) {
                out["kind"] = repsim::to_string(repsim::infer_kind(rx, ry, override_taxonomy));
            }
            const auto [ax, ay] = repsim::align_pair(x, y, score_cap);
            const auto r = repsim::svcca_score(ax, ay, score_flags.config());
            json res = json::parse(repsim::to_json(r));
            res.update(out);
            res["m_points"] = ax.points();
            res["x"] = descriptor_json(x.descriptor);
            res["y"] = descriptor_json(y.descriptor);
            std::cout << res.dump(2) << '\n';
        } else if (*pool) {
            const auto set = repsim::read_activation_file(pool_in);
            for (const auto& w : repsim::io_warnings(set)) std::cerr << "warning: " << w << '\n';
            repsim::write_activation_file(repsim::as_activation_set(repsim::meanpool(set)), pool_out);
        } else if (*study) {
            run.store_root = study_store;
            run.output_dir = study_out;
            run.modalities = parse_modalities(study_modalities);
            run.cap_crossmodal = cap_cm;
            run.cap_crosslingual = cap_cl;
            run.svcca = study_flags.config();
            if (!study_meta.empty()) run.language_meta = study_meta;
            if (!gap_layer.empty()) run.gap_layer = gap_layer;
            const auto summary = repsim::run_study(run);
            std::cerr << "wrote " << summary.files.size() << " files to " << study_out << " ("
                      << summary.crossmodal_records << " cross-modal, " << summary.crosslingual_records
                      << " cross-lingual records)\n";
        } else if (*baseline) {
            const auto s = repsim::random_baseline(fx, fy, m_points, trials, baseline_seed, baseline_flags.config(),
                                                   baseline_workers);
            json out = {{"f_x", fx}, {"f_y", fy}, {"m_points", m_points}, {"trials", s.trials},
                        {"seed", baseline_seed}, {"mean", s.mean}, {"std", s.std}};
            std::cout << out.dump(2) << '\n';
        } else if (*correlate) {
            const auto stats = repsim::read_token_overlap_csv(overlap_csv);
            const auto sims = repsim::read_matrix_csv(matrix_csv);
            const auto c = repsim::token_overlap_correlation(stats, sims);
            json out = {{"r", c.r}, {"p_value", c.p_value}, {"n_pairs", c.n_pairs}};
            std::cout << out.dump(2) << '\n';
        } else if (*project) {
            pcfg.method = repsim::parse_projection_method(project_method);
            std::vector<repsim::LabeledPoint> points;
            for (const auto& path : project_inputs) {
                const auto pooled = repsim::meanpool(repsim::read_activation_file(path));
                for (Eigen::Index j = 0; j < pooled.points(); ++j)
                    points.push_back({pooled.sentence_ids[j], pooled.descriptor.language, pooled.descriptor.modality,
                                      pooled.features.col(j)});
            }
            const auto result = repsim::project_2d(points, pcfg);
            const auto csv = repsim::projection_csv(result.points);
            if (project_out.empty()) {
                std::cout << csv;
            } else {
                write_or_print(csv, project_out);
                json out = {{"points", result.points.size()}};
                if (pcfg.method == repsim::ProjectionMethod::tsne)
                    out["kl"] = {{"initial", result.kl_initial}, {"final", result.kl_final}};
                auto try_silhouette = [&](const char* name, repsim::SilhouetteLabel label,
                                          const std::map<std::string, std::string>& families) {
                    try {
                        out["silhouette"][name] = repsim::silhouette_by_label(result.points, label, families);
                    } catch (const repsim::Error& e) {
                        out["silhouette"][name] = nullptr;
                    }
                };
                try_silhouette("language", repsim::SilhouetteLabel::language, {});
                try_silhouette("modality", repsim::SilhouetteLabel::modality, {});
                if (!project_meta.empty()) {
                    std::map<std::string, std::string> families;
                    for (const auto& m : repsim::read_language_meta(project_meta)) families[m.code] = m.family;
                    try_silhouette("family", repsim::SilhouetteLabel::family, families);
                }
                std::cout << out.dump(2) << '\n';
            }
        } else if (*synth) {
            const auto cfg = repsim::synth::read_config(synth_config);
            repsim::synth::write_world(cfg, synth_out, synth_workers);
            if (!synth_tokens.empty())
                repsim::write_token_overlap_csv(repsim::token_overlap_stats(repsim::synth::token_lists(cfg)),
                                                synth_tokens);
            if (synth_truth) std::cout << repsim::synth::to_json(repsim::synth::ground_truth_summary(cfg)) << '\n';
        }
    } catch (const repsim::MissingCellsError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIncomplete;
    } catch (const repsim::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
