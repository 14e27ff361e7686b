// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "repsim/analysis.hpp"
#include "repsim/error.hpp"
#include "repsim/projection.hpp"
#include "repsim/study.hpp"
#include "repsim/svcca.hpp"
#include "repsim/synth.hpp"

using namespace repsim;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kSelfTol = 1e-6;
constexpr double kInvarianceTol = 1e-6;
constexpr double kOracleTol = 1e-6;
constexpr double kMonteCarloSigmas = 3.0;
constexpr double kDecreaseSigmas = 2.0;
constexpr double kSpearmanMin = 0.9;
constexpr double kGapShareMin = 0.9;
constexpr double kOverlapRMin = 0.5;
constexpr double kOverlapPMax = 0.01;
constexpr double kPurityMin = 0.95;
constexpr double kProcrustesTol = 1e-6;
constexpr double kSelfSeconds = 30.0;
constexpr double kCurvesSeconds = 300.0;
constexpr double kProjectionSeconds = 60.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %-34s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void load(ActivationStore& store, const synth::SynthConfig& cfg) {
    for (const auto& set : synth::generate_world(cfg, 1)) store.add(meanpool(set));
}

std::vector<std::string> codes(const synth::SynthConfig& cfg) {
    std::vector<std::string> out;
    for (const auto& l : cfg.languages) out.push_back(l.code);
    return out;
}

std::string lang_code(int i) {
    std::string s = "l";
    s += static_cast<char>('a' + i / 26);
    s += static_cast<char>('a' + i % 26);
    return s;
}

// ---------------------------------------------------------------------------

Outcome self_similarity() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> fdist(8, 1024), mdist(16, 300);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto x = oracle::gaussian(rng, fdist(rng), mdist(rng));
        worst = std::max(worst, std::abs(svcca_score(x, x).score - 1.0));
    }
    const double secs = seconds_since(t0);
    return {worst <= kSelfTol && secs < kSelfSeconds, fmt("max |score-1| = %.2e, %.1f s", worst, secs)};
}

Outcome invariance() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> fdist(8, 256), mdist(16, 300);
    std::uniform_real_distribution<double> cdist(0.1, 10.0);
    double worst_orth = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int f = fdist(rng);
        const auto x = oracle::gaussian(rng, f, mdist(rng));
        const double c = (rng() & 1 ? 1.0 : -1.0) * cdist(rng);
        const Eigen::VectorXd b = 100.0 * oracle::gaussian(rng, f, 1);
        const Eigen::MatrixXd y = (c * oracle::random_orthogonal(rng, f) * x).colwise() + b;
        worst_orth = std::max(worst_orth, std::abs(svcca_score(x, y).score - svcca_score(x, x).score));
    }

    SvccaConfig raw;
    raw.variance_fraction = 1.0;
    raw.epsilon = 0.0;
    std::uniform_int_distribution<int> small_f(2, 16), small_m(40, 120);
    double worst_affine = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int fx = small_f(rng), fy = small_f(rng), m = small_m(rng);
        const auto x = oracle::gaussian(rng, fx, m);
        const Eigen::MatrixXd y = 0.6 * oracle::gaussian(rng, fy, fx) * x + oracle::gaussian(rng, fy, m);
        const Eigen::MatrixXd a = oracle::gaussian(rng, fy, fy) + 3.0 * Eigen::MatrixXd::Identity(fy, fy);
        const Eigen::MatrixXd ay = (a * y).colwise() + 10.0 * oracle::gaussian(rng, fy, 1).col(0);
        worst_affine = std::max(worst_affine, std::abs(svcca_score(x, ay, raw).score - svcca_score(x, y, raw).score));
    }
    return {worst_orth <= kInvarianceTol && worst_affine <= kInvarianceTol,
            fmt("orthogonal max diff %.2e, affine (eps=0, k=1) max diff %.2e", worst_orth, worst_affine)};
}

Outcome oracle_equivalence() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> fdist(2, 16), mdist(20, 64);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const int fx = fdist(rng), fy = fdist(rng), m = mdist(rng);
        const auto x = oracle::gaussian(rng, fx, m);
        const Eigen::MatrixXd y = 0.5 * oracle::gaussian(rng, fy, fx) * x + oracle::gaussian(rng, fy, m);
        const double ours = svcca_score(x, y).score;
        const double ref = oracle::svcca(x, y, 0.9, 1e-10);
        worst = std::max(worst, std::abs(ours - ref));
    }
    return {worst <= kOracleTol, fmt("max |pipeline - GEP oracle| = %.2e over 20 instances", worst)};
}

Outcome baseline_behavior() {
    bool ok = true;
    std::string detail;
    for (Eigen::Index m : {100, 1000}) {
        const std::size_t trials = 2000;
        const auto s = random_baseline(1, 1, m, trials, 404 + static_cast<std::uint64_t>(m));
        const double expected = oracle::expected_abs_pearson(static_cast<double>(m));
        const double se = s.std / std::sqrt(static_cast<double>(trials));
        const bool pass = std::abs(s.mean - expected) <= kMonteCarloSigmas * se;
        ok = ok && pass;
        detail += fmt("M=%ld mean %.5f vs %.5f (%.1f se); ", static_cast<long>(m), s.mean, expected,
                      std::abs(s.mean - expected) / se);
    }
    std::vector<BaselineStats> chain;
    for (Eigen::Index m : {64, 256, 1024}) chain.push_back(random_baseline(16, 16, m, 100, 505));
    for (std::size_t i = 1; i < chain.size(); ++i) {
        const double sd = std::sqrt((chain[i].std * chain[i].std + chain[i - 1].std * chain[i - 1].std) / 100.0);
        ok = ok && chain[i - 1].mean - chain[i].mean > kDecreaseSigmas * sd;
    }
    detail += fmt("F=16 means %.4f > %.4f > %.4f", chain[0].mean, chain[1].mean, chain[2].mean);
    return {ok, detail};
}

synth::SynthConfig curves_world() {
    synth::SynthConfig c;
    c.model_id = "curves";
    c.n_sentences = 200;
    c.semantic_dim = 16;
    const ResourceLevel levels[] = {ResourceLevel::high, ResourceLevel::medium, ResourceLevel::low};
    for (int i = 0; i < 12; ++i) c.languages.push_back({lang_code(i), levels[i % 3], "fam" + std::to_string(i % 4)});
    c.n_layers = 10;
    c.text_dim = 32;
    c.speech_dim = 48;
    c.modality_distortion = 1.0;
    c.language_distortion = 0.2;
    // Dip layers 1-2 sit below the rising part of the schedule before the extra is added.
    c.alpha = {0.5, 0.6, 1.0, 0.85, 0.7, 0.55, 0.45, 0.35, 0.25, 0.15};
    c.early_dip = synth::EarlyDip{1, 2, 0.8};
    c.resource_scaling = {{ResourceLevel::high, 1.0}, {ResourceLevel::medium, 2.0}, {ResourceLevel::low, 3.0}};
    c.noise_sigma = 0.05;
    c.seed = 2024;
    return c;
}

Outcome layer_curves() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = curves_world();
    const auto gt = synth::ground_truth_summary(cfg);
    ActivationStore store;
    load(store, cfg);
    ResourceMap res;
    for (const auto& l : cfg.languages) res[l.code] = l.resource_level;
    AnalysisOptions opts;
    const auto curves = crossmodal_curve(codes(cfg), cfg.layers(), store, opts, &res);

    bool rise = true, dip = true;
    std::string detail;
    for (const auto& c : curves.curves) {
        std::vector<double> layer_idx, vals;
        for (std::size_t t = 2; t < c.values.size(); ++t) {
            layer_idx.push_back(static_cast<double>(t));
            vals.push_back(c.values[t]);
        }
        const double rho = oracle::spearman(layer_idx, vals);
        const auto argmin = std::min_element(c.values.begin(), c.values.end()) - c.values.begin();
        rise = rise && rho > kSpearmanMin;
        dip = dip && argmin <= 1;
        detail += fmt("%s rho=%.3f min@L%ld; ", c.group.c_str(), rho, static_cast<long>(argmin + 1));
    }
    auto final_of = [&](const std::string& g) {
        for (const auto& c : curves.curves)
            if (c.group == g) return c.values.back();
        throw std::runtime_error("no group " + g);
    };
    const double hi = final_of("high"), med = final_of("medium"), lo = final_of("low");
    const bool order = lo < med && med < hi;
    const double secs = seconds_since(t0);
    detail += fmt("final low %.4f < medium %.4f < high %.4f; %.1f s", lo, med, hi, secs);
    const bool agrees = gt.curves_rise && gt.minimum_in_dip && gt.resource_order.size() == 3;
    return {rise && dip && order && agrees && secs < kCurvesSeconds, detail};
}

synth::SynthConfig gap_world(double modality_distortion) {
    synth::SynthConfig c;
    c.model_id = "gaps";
    c.n_sentences = 200;
    c.semantic_dim = 16;
    const ResourceLevel levels[] = {ResourceLevel::high, ResourceLevel::medium, ResourceLevel::low};
    for (int i = 0; i < 12; ++i) c.languages.push_back({lang_code(i), levels[i % 3], "fam" + std::to_string(i % 4)});
    c.n_layers = 2;
    c.text_dim = 32;
    c.speech_dim = 48;
    c.language_distortion = 0.4;
    c.modality_distortion = modality_distortion;
    c.alpha = {1.0, 0.8};
    c.resource_scaling = {{ResourceLevel::high, 1.0}, {ResourceLevel::medium, 1.5}, {ResourceLevel::low, 2.0}};
    c.noise_sigma = 0.05;
    c.seed = 77;
    return c;
}

Outcome gap_dominance() {
    std::string detail;
    bool ok = true;
    for (double ratio : {5.0, 0.0}) {
        const auto cfg = gap_world(ratio * 0.4);
        const auto gt = synth::ground_truth_summary(cfg);
        ActivationStore store;
        load(store, cfg);
        const auto langs = codes(cfg);
        std::size_t below = 0, above = 0;
        for (const auto& l : langs) {
            const auto g = gap_comparison(l, langs, "L2", store);
            if (g.cross_modal < g.text_max) ++below;
            if (g.cross_modal > std::max(g.text_max, g.speech_max)) ++above;
        }
        const double share = static_cast<double>(ratio > 0 ? below : above) / static_cast<double>(langs.size());
        if (ratio > 0) {
            ok = ok && share >= kGapShareMin && gt.modality_gap_dominates;
            detail += fmt("d_mod=5 d_lang: cross-modal < best text for %zu/%zu; ", below, langs.size());
        } else {
            ok = ok && share == 1.0 && gt.language_gap_dominates;
            detail += fmt("d_mod=0: cross-modal > best cross-lingual for %zu/%zu", above, langs.size());
        }
    }
    return {ok, detail};
}

Outcome correlation_machinery() {
    // Affine dependence.
    CrossLingualMatrix m;
    m.languages = {"a", "b", "c", "d", "e"};
    m.scores = Eigen::MatrixXd::Identity(5, 5);
    TokenOverlapStats stats;
    for (Eigen::Index i = 0; i < 5; ++i)
        for (Eigen::Index j = i + 1; j < 5; ++j) {
            const double o = 0.05 * static_cast<double>(i * 7 + j * j);
            stats.push_back({m.languages[i], m.languages[j], o, 1});
            m.scores(i, j) = m.scores(j, i) = 0.4 * o + 0.2;
        }
    const double r_affine = token_overlap_correlation(stats, m).r;

    // Overlap-driven world: family members share tokens and a distortion component.
    synth::SynthConfig c;
    c.model_id = "overlap";
    c.n_sentences = 200;
    c.semantic_dim = 16;
    for (int i = 0; i < 30; ++i) c.languages.push_back({lang_code(i), ResourceLevel::high, "fam" + std::to_string(i % 6)});
    c.n_layers = 1;
    c.text_dim = 32;
    c.speech_dim = 32;
    c.modality_distortion = 0.5;
    c.language_distortion = 1.5;
    c.family_coupling = 0.6;
    c.alpha = {1.0};
    c.noise_sigma = 0.05;
    c.seed = 909;
    ActivationStore store;
    load(store, c);
    const auto sims = crosslingual_matrix(codes(c), Modality::text, "L1", store);
    const auto overlap = token_overlap_stats(synth::token_lists(c));
    const auto corr = token_overlap_correlation(overlap, sims);

    const bool ok = std::abs(r_affine - 1.0) < 1e-12 && corr.r > kOverlapRMin && corr.p_value < kOverlapPMax &&
                    corr.n_pairs == 435 && pair_count(30) == 435;
    return {ok, fmt("affine r=%.12f; synthetic r=%.3f p=%.2e over %zu pairs", r_affine, corr.r, corr.p_value,
                    corr.n_pairs)};
}

Outcome text_above_speech() {
    synth::SynthConfig c;
    c.model_id = "ts";
    c.n_sentences = 200;
    c.semantic_dim = 16;
    for (int i = 0; i < 10; ++i) c.languages.push_back({lang_code(i), ResourceLevel::high, "fam" + std::to_string(i % 3)});
    c.n_layers = 6;
    c.text_dim = 32;
    c.speech_dim = 48;
    c.modality_distortion = 1.0;
    c.language_distortion = 1.0;
    c.text_language_scale = 1.0;
    c.speech_language_scale = 2.0;
    c.alpha = {1.0, 0.8, 0.6, 0.45, 0.3, 0.2};
    c.noise_sigma = 0.05;
    c.seed = 31;
    const auto gt = synth::ground_truth_summary(c);
    ActivationStore store;
    load(store, c);
    const auto mats = crosslingual_matrices(codes(c), {Modality::text, Modality::speech}, c.layers(), store);
    const auto text = crosslingual_curve(mats, Modality::text, c.layers());
    const auto speech = crosslingual_curve(mats, Modality::speech, c.layers());
    bool ok = gt.text_above_speech;
    double min_margin = 1.0;
    for (std::size_t t = 0; t < text.values.size(); ++t) {
        ok = ok && text.values[t] > speech.values[t];
        min_margin = std::min(min_margin, text.values[t] - speech.values[t]);
    }
    return {ok, fmt("text - speech margin >= %.4f over %zu layers", min_margin, text.values.size())};
}

Outcome projection() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(606);
    std::vector<LabeledPoint> pts;
    const Eigen::MatrixXd centers = 20.0 * oracle::gaussian(rng, 3, 10).rowwise().normalized();
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 50; ++i)
            pts.push_back({"p" + std::to_string(k * 50 + i), "c" + std::to_string(k), Modality::text,
                           centers.row(k).transpose() + oracle::gaussian(rng, 10, 1)});
    ProjectionConfig cfg;
    cfg.seed = 1;
    const auto res = project_2d(pts, cfg);

    // Nearest-centroid purity against generator labels.
    Eigen::MatrixXd cent = Eigen::MatrixXd::Zero(3, 2);
    for (std::size_t i = 0; i < pts.size(); ++i) cent.row(static_cast<Eigen::Index>(i / 50)) += Eigen::RowVector2d(res.points[i].x, res.points[i].y) / 50.0;
    int right = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Eigen::Index best;
        (cent.rowwise() - Eigen::RowVector2d(res.points[i].x, res.points[i].y)).rowwise().squaredNorm().minCoeff(&best);
        right += best == static_cast<Eigen::Index>(i / 50);
    }
    const double purity = right / 150.0;

    // PCA plane recovery.
    const Eigen::MatrixXd plane = oracle::gaussian(rng, 60, 2) * Eigen::Vector2d(4.0, 1.0).asDiagonal();
    const Eigen::MatrixXd basis = oracle::random_orthogonal(rng, 10).leftCols(2);
    const Eigen::MatrixXd coords = pca_2d(plane * basis.transpose());
    const Eigen::MatrixXd truth = plane.rowwise() - plane.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(coords.transpose() * truth, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double residual = (coords * svd.matrixU() * svd.matrixV().transpose() - truth).norm();

    const double secs = seconds_since(t0);
    const bool ok = purity >= kPurityMin && res.kl_final < res.kl_initial && residual < kProcrustesTol &&
                    secs < kProjectionSeconds;
    return {ok, fmt("purity %.3f, KL %.3f -> %.3f, Procrustes %.2e, %.1f s", purity, res.kl_initial, res.kl_final,
                    residual, secs)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "repsim_acceptance_determinism";
    fs::remove_all(root);
    auto cfg = curves_world();
    cfg.n_sentences = 80;
    cfg.n_layers = 4;
    cfg.alpha = {0.5, 0.6, 1.0, 0.5};
    cfg.languages.resize(6);
    synth::write_world(cfg, root / "world", 8);

    auto run = [&](const std::string& name, std::size_t workers) {
        RunSpec s;
        s.store_root = root / "world";
        s.output_dir = root / name;
        s.workers = workers;
        s.seed = 17;
        s.baseline_trials = 5;
        return run_study(s).files;
    };
    const auto files = run("w1", 1);
    run("w8", 8);
    run("w1_again", 1);
    std::size_t same = 0;
    for (const auto& f : files)
        if (slurp(root / "w1" / f) == slurp(root / "w8" / f) && slurp(root / "w1" / f) == slurp(root / "w1_again" / f))
            ++same;
    return {same == files.size() && !files.empty(),
            fmt("%zu/%zu output files byte-identical across workers {1,8} and reruns", same, files.size())};
}

}  // namespace

int main() {
    report("svcca self-similarity", self_similarity);
    report("invariance suite", invariance);
    report("oracle equivalence", oracle_equivalence);
    report("baseline behavior", baseline_behavior);
    report("cross-modal layer curves (synthetic)", layer_curves);
    report("modality vs language gap (synthetic)", gap_dominance);
    report("token overlap correlation", correlation_machinery);
    report("cross-lingual text above speech", text_above_speech);
    report("projection", projection);
    report("study determinism", determinism);
    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
