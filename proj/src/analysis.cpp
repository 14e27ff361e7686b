#include "repsim/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "repsim/error.hpp"
#include "repsim/parallel.hpp"
#include "repsim/random.hpp"

namespace repsim {

namespace fs = std::filesystem;

std::string describe(const CellRef& c) {
    return c.language + "/" + std::string(to_string(c.modality)) + "/" + c.layer_tag;
}

// ---------------------------------------------------------------------------
// Store

namespace {

// Orders "in" < "L2" < "L10" < "len": digit runs compare numerically.
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
        const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
        if (da && db) {
            std::size_t ei = i, ej = j;
            while (ei < a.size() && std::isdigit(static_cast<unsigned char>(a[ei]))) ++ei;
            while (ej < b.size() && std::isdigit(static_cast<unsigned char>(b[ej]))) ++ej;
            const auto na = std::stoull(a.substr(i, ei - i));
            const auto nb = std::stoull(b.substr(j, ej - j));
            if (na != nb) return na < nb;
            i = ei;
            j = ej;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

}  // namespace

std::unique_ptr<ActivationStore> ActivationStore::open(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    auto store = std::make_unique<ActivationStore>();

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".actv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& f : files) {
        const auto side = sidecar_path(f);
        if (!fs::exists(side)) throw FormatError(f.string() + " has no sidecar manifest");
        std::ifstream in(side);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
            store->add_file({j.at("language").get<std::string>(), parse_modality(j.at("modality").get<std::string>()),
                             j.at("layer_tag").get<std::string>()},
                            f);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad sidecar " + side.string() + ": " + e.what());
        }
    }

    const auto meta = dir / "store.json";
    if (fs::exists(meta)) {
        std::ifstream in(meta);
        try {
            const auto j = nlohmann::json::parse(in);
            if (j.contains("layers")) store->set_layer_order(j["layers"].get<std::vector<std::string>>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad store.json: " + std::string(e.what()));
        }
    }
    return store;
}

void ActivationStore::add(PooledMatrix pooled) {
    pooled.validate(1);
    CellRef ref{pooled.descriptor.language, pooled.descriptor.modality, pooled.descriptor.layer_tag};
    std::lock_guard lock(mutex_);
    Slot slot;
    slot.pooled = std::make_shared<const PooledMatrix>(std::move(pooled));
    if (!cells_.emplace(ref, std::move(slot)).second)
        throw ValidationError("store already holds cell " + describe(ref));
}

void ActivationStore::add_file(const CellRef& ref, fs::path path) {
    std::lock_guard lock(mutex_);
    if (!cells_.emplace(ref, Slot{std::move(path), nullptr}).second)
        throw ValidationError("store already holds cell " + describe(ref));
}

bool ActivationStore::contains(const CellRef& ref) const {
    std::lock_guard lock(mutex_);
    return cells_.count(ref) != 0;
}

std::shared_ptr<const PooledMatrix> ActivationStore::get(const CellRef& ref) const {
    fs::path path;
    {
        std::lock_guard lock(mutex_);
        auto it = cells_.find(ref);
        if (it == cells_.end()) throw MissingCellsError({describe(ref)});
        if (it->second.pooled) return it->second.pooled;
        path = it->second.path;
    }
    // Pool outside the lock; a concurrent loader may win the race, which is
    // harmless because both results are identical.
    auto pooled = std::make_shared<const PooledMatrix>(meanpool(read_activation_file(path)));
    std::lock_guard lock(mutex_);
    auto& slot = cells_.find(ref)->second;
    if (!slot.pooled) slot.pooled = std::move(pooled);
    return slot.pooled;
}

std::vector<std::string> ActivationStore::missing(const std::vector<CellRef>& refs) const {
    std::vector<std::string> out;
    std::lock_guard lock(mutex_);
    for (const auto& r : refs)
        if (!cells_.count(r)) out.push_back(describe(r));
    return out;
}

std::vector<CellRef> ActivationStore::cells() const {
    std::lock_guard lock(mutex_);
    std::vector<CellRef> out;
    for (const auto& [ref, slot] : cells_) out.push_back(ref);
    return out;
}

std::vector<std::string> ActivationStore::languages() const {
    std::set<std::string> langs;
    for (const auto& c : cells()) langs.insert(c.language);
    return {langs.begin(), langs.end()};
}

std::vector<std::string> ActivationStore::layers() const {
    if (!layer_order_.empty()) return layer_order_;
    std::set<std::string> tags;
    for (const auto& c : cells()) tags.insert(c.layer_tag);
    std::vector<std::string> out(tags.begin(), tags.end());
    std::sort(out.begin(), out.end(), natural_less);
    return out;
}

// ---------------------------------------------------------------------------
// Records

std::string_view to_string(SimilarityKind k) noexcept {
    switch (k) {
        case SimilarityKind::intra_lingual_cross_modal: return "intra_lingual_cross_modal";
        case SimilarityKind::cross_lingual_text: return "cross_lingual_text";
        case SimilarityKind::cross_lingual_speech: return "cross_lingual_speech";
        case SimilarityKind::cross_lingual_cross_modal: return "cross_lingual_cross_modal";
    }
    return "?";
}

namespace {

std::optional<SimilarityKind> kind_of(const std::string& la, Modality ma, const std::string& lb, Modality mb) {
    const bool same_lang = la == lb;
    const bool same_mod = ma == mb;
    if (same_lang && !same_mod) return SimilarityKind::intra_lingual_cross_modal;
    if (!same_lang && same_mod)
        return ma == Modality::text ? SimilarityKind::cross_lingual_text : SimilarityKind::cross_lingual_speech;
    if (!same_lang && !same_mod) return SimilarityKind::cross_lingual_cross_modal;
    return std::nullopt;
}

}  // namespace

SimilarityKind infer_kind(const CellRef& a, const CellRef& b, bool allow_cross_lingual_cross_modal) {
    const auto kind = kind_of(a.language, a.modality, b.language, b.modality);
    if (!kind)
        throw TaxonomyError(describe(a) + " vs " + describe(b) +
                            ": same language and modality is not a cross-modal or cross-lingual comparison");
    if (*kind == SimilarityKind::cross_lingual_cross_modal && !allow_cross_lingual_cross_modal)
        throw TaxonomyError(describe(a) + " vs " + describe(b) +
                            ": cross-lingual cross-modal pairs are outside the taxonomy (use --override-taxonomy)");
    return *kind;
}

void SimilarityRecord::validate() const {
    const auto expected = kind_of(lang_a, modality_a, lang_b, modality_b);
    if (!expected || *expected != kind)
        throw TaxonomyError("record kind " + std::string(to_string(kind)) + " does not match " + lang_a + "/" +
                            std::string(to_string(modality_a)) + " vs " + lang_b + "/" +
                            std::string(to_string(modality_b)));
}

SimilarityRecord score_pair(const CellRef& x, const CellRef& y, const ActivationStore& store,
                            const AnalysisOptions& opts) {
    const auto kind = infer_kind(x, y, opts.allow_cross_lingual_cross_modal);
    if (auto miss = store.missing({x, y}); !miss.empty()) throw MissingCellsError(std::move(miss));

    const auto px = store.get(x);
    const auto py = store.get(y);
    const auto [ax, ay] = align_pair(*px, *py, opts.cap);
    const auto result = svcca_score(ax, ay, opts.svcca);

    SimilarityRecord r;
    r.kind = kind;
    r.layer_tag = x.layer_tag == y.layer_tag ? x.layer_tag : x.layer_tag + "|" + y.layer_tag;
    r.lang_a = x.language;
    r.lang_b = y.language;
    r.modality_a = x.modality;
    r.modality_b = y.modality;
    r.score = result.score;
    r.m_points = ax.points();
    r.kept_dims = result.kept_dims;
    return r;
}

std::vector<SimilarityRecord> score_pairs(const std::vector<std::pair<CellRef, CellRef>>& pairs,
                                          const ActivationStore& store, const AnalysisOptions& opts) {
    std::vector<CellRef> needed;
    for (const auto& [a, b] : pairs) {
        infer_kind(a, b, opts.allow_cross_lingual_cross_modal);
        needed.push_back(a);
        needed.push_back(b);
    }
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    if (auto miss = store.missing(needed); !miss.empty()) throw MissingCellsError(std::move(miss));

    return parallel_map(pairs.size(), opts.workers,
                        [&](std::size_t i) { return score_pair(pairs[i].first, pairs[i].second, store, opts); });
}

// ---------------------------------------------------------------------------
// Curves and matrices

ResourceMap resource_map(const std::vector<LanguageMeta>& meta) {
    ResourceMap out;
    for (const auto& m : meta) out[m.code] = m.resource_level;
    return out;
}

CrossModalCurves crossmodal_curve(const std::vector<std::string>& languages, const std::vector<std::string>& layers,
                                  const ActivationStore& store, const AnalysisOptions& opts,
                                  const ResourceMap* resources) {
    if (languages.empty() || layers.empty()) throw ConfigError("cross-modal curve needs languages and layers");
    if (resources)
        for (const auto& l : languages)
            if (!resources->count(l)) throw ConfigError("no resource level for language '" + l + "'");

    std::vector<std::pair<CellRef, CellRef>> pairs;
    for (const auto& lang : languages)
        for (const auto& layer : layers)
            pairs.push_back({{lang, Modality::text, layer}, {lang, Modality::speech, layer}});

    CrossModalCurves out;
    out.records = score_pairs(pairs, store, opts);

    auto curve_for = [&](std::string group, auto&& member) {
        LayerCurve c;
        c.group = std::move(group);
        c.layers = layers;
        c.values.assign(layers.size(), 0.0);
        for (std::size_t li = 0; li < languages.size(); ++li) {
            if (!member(languages[li])) continue;
            ++c.n_languages;
            for (std::size_t t = 0; t < layers.size(); ++t) c.values[t] += out.records[li * layers.size() + t].score;
        }
        for (auto& v : c.values) v /= static_cast<double>(c.n_languages);
        return c;
    };

    out.curves.push_back(curve_for("all", [](const std::string&) { return true; }));
    if (resources) {
        for (auto level : {ResourceLevel::high, ResourceLevel::medium, ResourceLevel::low}) {
            auto in_group = [&](const std::string& l) { return resources->at(l) == level; };
            if (std::any_of(languages.begin(), languages.end(), in_group))
                out.curves.push_back(curve_for(std::string(to_string(level)), in_group));
        }
    }
    return out;
}

double CrossLingualMatrix::mean_off_diagonal() const {
    if (records.empty()) throw InsufficientDataError("matrix has no off-diagonal pairs");
    double sum = 0.0;
    for (const auto& r : records) sum += r.score;
    return sum / static_cast<double>(records.size());
}

double CrossLingualMatrix::at(const std::string& a, const std::string& b) const {
    auto ia = std::find(languages.begin(), languages.end(), a);
    auto ib = std::find(languages.begin(), languages.end(), b);
    if (ia == languages.end() || ib == languages.end())
        throw ValidationError("language pair " + a + "/" + b + " not in matrix");
    return scores(ia - languages.begin(), ib - languages.begin());
}

std::vector<CrossLingualMatrix> crosslingual_matrices(const std::vector<std::string>& languages,
                                                      const std::vector<Modality>& modalities,
                                                      const std::vector<std::string>& layers,
                                                      const ActivationStore& store, const AnalysisOptions& opts) {
    if (languages.size() < 2) throw ConfigError("cross-lingual matrix needs at least 2 languages");
    {
        std::set<std::string> uniq(languages.begin(), languages.end());
        if (uniq.size() != languages.size()) throw ConfigError("language list has duplicates");
    }

    std::vector<std::pair<CellRef, CellRef>> pairs;
    for (auto mod : modalities)
        for (const auto& layer : layers)
            for (std::size_t i = 0; i < languages.size(); ++i)
                for (std::size_t j = i + 1; j < languages.size(); ++j)
                    pairs.push_back({{languages[i], mod, layer}, {languages[j], mod, layer}});

    auto records = score_pairs(pairs, store, opts);

    std::vector<CrossLingualMatrix> out;
    const std::size_t per = pair_count(languages.size());
    std::size_t k = 0;
    for (auto mod : modalities) {
        for (const auto& layer : layers) {
            CrossLingualMatrix m;
            m.languages = languages;
            m.modality = mod;
            m.layer_tag = layer;
            const auto n = static_cast<Eigen::Index>(languages.size());
            m.scores = Eigen::MatrixXd::Identity(n, n);
            m.records.assign(records.begin() + static_cast<std::ptrdiff_t>(k),
                             records.begin() + static_cast<std::ptrdiff_t>(k + per));
            std::size_t r = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    m.scores(i, j) = m.scores(j, i) = m.records[r++].score;
                }
            k += per;
            out.push_back(std::move(m));
        }
    }
    return out;
}

CrossLingualMatrix crosslingual_matrix(const std::vector<std::string>& languages, Modality modality,
                                       const std::string& layer, const ActivationStore& store,
                                       const AnalysisOptions& opts) {
    return std::move(crosslingual_matrices(languages, {modality}, {layer}, store, opts).front());
}

LayerCurve crosslingual_curve(const std::vector<CrossLingualMatrix>& matrices, Modality modality,
                              const std::vector<std::string>& layers) {
    LayerCurve c;
    c.group = "all";
    c.layers = layers;
    for (const auto& layer : layers) {
        auto it = std::find_if(matrices.begin(), matrices.end(), [&](const CrossLingualMatrix& m) {
            return m.modality == modality && m.layer_tag == layer;
        });
        if (it == matrices.end())
            throw MissingCellsError({"cross-lingual " + std::string(to_string(modality)) + " matrix at " + layer});
        c.values.push_back(it->mean_off_diagonal());
        c.n_languages = it->languages.size();
    }
    return c;
}

// ---------------------------------------------------------------------------
// Baseline

BaselineStats random_baseline(Eigen::Index fx, Eigen::Index fy, Eigen::Index m, std::size_t n_trials,
                              std::uint64_t seed, const SvccaConfig& cfg, std::size_t workers) {
    if (n_trials < 1) throw ConfigError("baseline needs at least one trial");
    if (fx < 1 || fy < 1) throw ConfigError("baseline feature sizes must be positive");
    if (m < 2) throw InsufficientDataError("baseline needs at least 2 data points");

    const auto scores = parallel_map(n_trials, workers, [&](std::size_t t) {
        Rng rng(derive_seed(seed, "random_baseline", t));
        auto draw = [&](Eigen::Index rows) {
            Eigen::MatrixXd a(rows, m);
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = standard_normal(rng);
            return a;
        };
        const Eigen::MatrixXd x = draw(fx);
        const Eigen::MatrixXd y = draw(fy);
        return svcca_score(x, y, cfg).score;
    });

    BaselineStats s;
    s.trials = n_trials;
    s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n_trials);
    if (n_trials > 1) {
        double ss = 0.0;
        for (double v : scores) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(n_trials - 1));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Token overlap

OverlapMode parse_overlap_mode(std::string_view s) {
    if (s == "jaccard") return OverlapMode::jaccard;
    if (s == "min-denominator") return OverlapMode::min_denominator;
    throw ConfigError("unknown overlap mode '" + std::string(s) + "'");
}

double shared_token_proportion(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b,
                               OverlapMode mode) {
    if (a.empty() && b.empty()) throw ValidationError("shared-token proportion of two empty token lists");
    std::vector<std::int64_t> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());

    std::vector<std::int64_t> common;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    const auto shared = static_cast<double>(common.size());
    if (mode == OverlapMode::jaccard) return shared / static_cast<double>(sa.size() + sb.size() - common.size());
    const auto smaller = std::min(sa.size(), sb.size());
    return smaller == 0 ? 0.0 : shared / static_cast<double>(smaller);
}

TokenOverlapStats token_overlap_stats(const std::map<std::string, std::vector<std::vector<std::int64_t>>>& tokens,
                                      OverlapMode mode) {
    if (tokens.size() < 2) throw ConfigError("token overlap needs at least 2 languages");
    const std::size_t n = tokens.begin()->second.size();
    for (const auto& [lang, sents] : tokens)
        if (sents.size() != n)
            throw ValidationError("language '" + lang + "' has " + std::to_string(sents.size()) +
                                  " sentences, expected " + std::to_string(n));
    if (n == 0) throw InsufficientDataError("no sentences to compare");

    TokenOverlapStats out;
    for (auto a = tokens.begin(); a != tokens.end(); ++a) {
        for (auto b = std::next(a); b != tokens.end(); ++b) {
            double sum = 0.0;
            for (std::size_t s = 0; s < n; ++s) sum += shared_token_proportion(a->second[s], b->second[s], mode);
            out.push_back({a->first, b->first, sum / static_cast<double>(n), n});
        }
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw FormatError(where + ": '" + s + "' is not a number");
    return v;
}

std::string pair_key(const std::string& a, const std::string& b) {
    return a < b ? a + '\x1f' + b : b + '\x1f' + a;
}

}  // namespace

TokenOverlapStats read_token_overlap_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    const auto header = split_csv_line(line);
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto ca = col("lang_a"), cb = col("lang_b"), cp = col("shared_proportion"), cn = col("n_sentences");

    TokenOverlapStats out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        const auto where = path.string() + ":" + std::to_string(lineno);
        if (cells.size() != header.size()) throw FormatError(where + ": wrong number of columns");
        TokenOverlapRecord r;
        r.lang_a = cells[ca];
        r.lang_b = cells[cb];
        r.shared_proportion = parse_double(cells[cp], where);
        r.n_sentences = static_cast<std::size_t>(parse_double(cells[cn], where));
        if (r.shared_proportion < 0.0 || r.shared_proportion > 1.0)
            throw ValidationError(where + ": shared_proportion outside [0, 1]");
        out.push_back(std::move(r));
    }
    return out;
}

void write_token_overlap_csv(const TokenOverlapStats& stats, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "lang_a,lang_b,shared_proportion,n_sentences\n";
    for (const auto& r : stats)
        out << r.lang_a << ',' << r.lang_b << ',' << format_double(r.shared_proportion) << ',' << r.n_sentences
            << '\n';
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("pearson: inputs differ in length");
    if (x.size() < 3) throw InsufficientDataError("fewer than 3 pairs");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateInputError("pearson: zero variance in an input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_p_value(double r, std::size_t n) {
    if (n < 3) throw InsufficientDataError("fewer than 3 pairs");
    const double dof = static_cast<double>(n - 2);
    const double ar = std::abs(r);
    if (ar >= 1.0) return 0.0;
    const double t = ar * std::sqrt(dof / (1.0 - ar * ar));
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

CorrelationResult token_overlap_correlation(const TokenOverlapStats& stats, const CrossLingualMatrix& sims) {
    if (stats.size() < 3) throw InsufficientDataError("fewer than 3 pairs");
    std::map<std::string, double> overlap;
    for (const auto& r : stats)
        if (!overlap.emplace(pair_key(r.lang_a, r.lang_b), r.shared_proportion).second)
            throw ValidationError("token overlap lists pair " + r.lang_a + "/" + r.lang_b + " twice");

    std::map<std::string, double> sim;
    const auto n = static_cast<Eigen::Index>(sims.languages.size());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) sim[pair_key(sims.languages[i], sims.languages[j])] = sims.scores(i, j);

    if (overlap.size() != sim.size() ||
        !std::equal(overlap.begin(), overlap.end(), sim.begin(), [](const auto& a, const auto& b) { return a.first == b.first; }))
        throw ValidationError("token overlap pairs (" + std::to_string(overlap.size()) +
                              ") do not match the similarity matrix pairs (" + std::to_string(sim.size()) + ")");

    std::vector<double> xs, ys;
    for (const auto& [key, v] : overlap) {
        xs.push_back(v);
        ys.push_back(sim.at(key));
    }
    CorrelationResult out;
    out.n_pairs = xs.size();
    out.r = pearson(xs, ys);
    out.p_value = pearson_p_value(out.r, out.n_pairs);
    return out;
}

// ---------------------------------------------------------------------------
// Gaps

GapReport gap_from_matrices(const std::string& language, double cross_modal, const CrossLingualMatrix& text,
                            const CrossLingualMatrix& speech) {
    GapReport g;
    g.language = language;
    g.layer_tag = text.layer_tag;
    g.cross_modal = cross_modal;
    g.text_min = g.speech_min = std::numeric_limits<double>::infinity();
    g.text_max = g.speech_max = -std::numeric_limits<double>::infinity();
    for (const auto& other : text.languages) {
        if (other == language) continue;
        const double t = text.at(language, other);
        const double s = speech.at(language, other);
        g.text_min = std::min(g.text_min, t);
        g.text_max = std::max(g.text_max, t);
        g.speech_min = std::min(g.speech_min, s);
        g.speech_max = std::max(g.speech_max, s);
        ++g.partners;
    }
    if (g.partners == 0) throw InsufficientDataError("gap comparison for '" + language + "' has no partner languages");
    return g;
}

GapReport gap_comparison(const std::string& language, const std::vector<std::string>& partners,
                         const std::string& layer, const ActivationStore& store, const AnalysisOptions& opts) {
    std::vector<std::string> langs{language};
    for (const auto& p : partners)
        if (p != language) langs.push_back(p);
    if (langs.size() < 2) throw InsufficientDataError("gap comparison for '" + language + "' needs a partner language");

    std::vector<std::pair<CellRef, CellRef>> pairs{{{language, Modality::text, layer}, {language, Modality::speech, layer}}};
    for (auto mod : {Modality::text, Modality::speech})
        for (std::size_t i = 1; i < langs.size(); ++i)
            pairs.push_back({{language, mod, layer}, {langs[i], mod, layer}});
    const auto recs = score_pairs(pairs, store, opts);

    GapReport g;
    g.language = language;
    g.layer_tag = layer;
    g.cross_modal = recs[0].score;
    g.partners = langs.size() - 1;
    const auto text_begin = recs.begin() + 1;
    const auto speech_begin = text_begin + static_cast<std::ptrdiff_t>(g.partners);
    auto by_score = [](const SimilarityRecord& a, const SimilarityRecord& b) { return a.score < b.score; };
    auto [tmin, tmax] = std::minmax_element(text_begin, speech_begin, by_score);
    auto [smin, smax] = std::minmax_element(speech_begin, recs.end(), by_score);
    g.text_min = tmin->score;
    g.text_max = tmax->score;
    g.speech_min = smin->score;
    g.speech_max = smax->score;
    return g;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string records_csv(const std::vector<SimilarityRecord>& records) {
    std::string out = "kind,layer_tag,lang_a,lang_b,modality_a,modality_b,score,m_points,kept_m,kept_n\n";
    for (const auto& r : records) {
        out += to_string(r.kind);
        out += ',' + r.layer_tag + ',' + r.lang_a + ',' + r.lang_b + ',';
        out += to_string(r.modality_a);
        out += ',';
        out += to_string(r.modality_b);
        out += ',' + format_double(r.score) + ',' + std::to_string(r.m_points) + ',' +
               std::to_string(r.kept_dims.first) + ',' + std::to_string(r.kept_dims.second) + '\n';
    }
    return out;
}

std::string matrix_csv(const CrossLingualMatrix& m) {
    std::string out = "language";
    for (const auto& l : m.languages) out += ',' + l;
    out += '\n';
    for (std::size_t i = 0; i < m.languages.size(); ++i) {
        out += m.languages[i];
        for (std::size_t j = 0; j < m.languages.size(); ++j)
            out += ',' + format_double(m.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out += '\n';
    }
    return out;
}

CrossLingualMatrix read_matrix_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    auto header = split_csv_line(line);
    if (header.empty() || header.front() != "language") throw FormatError(path.string() + ": bad matrix header");

    CrossLingualMatrix m;
    m.languages.assign(header.begin() + 1, header.end());
    const auto n = static_cast<Eigen::Index>(m.languages.size());
    m.scores.resize(n, n);
    Eigen::Index row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        const auto where = path.string() + ":" + std::to_string(row + 2);
        if (row >= n || static_cast<Eigen::Index>(cells.size()) != n + 1 || cells[0] != m.languages[row])
            throw FormatError(where + ": row does not match header");
        for (Eigen::Index j = 0; j < n; ++j) m.scores(row, j) = parse_double(cells[j + 1], where);
        ++row;
    }
    if (row != n) throw FormatError(path.string() + ": expected " + std::to_string(n) + " rows");
    if (!m.scores.isApprox(m.scores.transpose(), 1e-12))
        throw ValidationError(path.string() + ": matrix is not symmetric");
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            SimilarityRecord r;
            r.lang_a = m.languages[i];
            r.lang_b = m.languages[j];
            r.score = m.scores(i, j);
            m.records.push_back(r);
        }
    return m;
}

}  // namespace repsim
