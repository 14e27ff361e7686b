#include "repsim/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

#include <Eigen/SVD>

#include "repsim/analysis.hpp"
#include "repsim/error.hpp"
#include "repsim/random.hpp"

namespace repsim {

ProjectionMethod parse_projection_method(std::string_view s) {
    if (s == "tsne") return ProjectionMethod::tsne;
    if (s == "pca") return ProjectionMethod::pca;
    throw ConfigError("unknown projection method '" + std::string(s) + "'");
}

void ProjectionConfig::validate(std::size_t n_points) const {
    if (method != ProjectionMethod::tsne) return;
    if (iterations < 250) throw ConfigError("t-SNE needs at least 250 iterations");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(perplexity > 0.0) || !(perplexity < (static_cast<double>(n_points) - 1.0) / 3.0))
        throw ConfigError("perplexity " + std::to_string(perplexity) + " is infeasible for " +
                          std::to_string(n_points) + " points (must be below (n - 1) / 3)");
}

Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& data) {
    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(data.rows(), 2);
    const Eigen::Index k = std::min<Eigen::Index>(2, svd.matrixV().cols());
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::VectorXd axis = svd.matrixV().col(c);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0) axis = -axis;
        out.col(c) = centered * axis;
    }
    return out;
}

namespace tsne {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& data) {
    const Eigen::VectorXd norms = data.rowwise().squaredNorm();
    Eigen::MatrixXd d = (-2.0 * data * data.transpose()).colwise() + norms;
    d.rowwise() += norms.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    return d;
}

Affinities conditional_affinities(const Eigen::MatrixXd& sq_distances, double perplexity) {
    const Eigen::Index n = sq_distances.rows();
    constexpr double kTolerance = 1e-5;
    constexpr int kMaxSteps = 50;
    const double target = std::log(perplexity);

    Affinities out;
    out.conditional = Eigen::MatrixXd::Zero(n, n);
    out.perplexity.resize(n);

    // Precision is searched on distances rescaled to unit mean, which keeps the
    // starting point beta = 1 within a few doublings of the answer.
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) mean += sq_distances(i, j);
    mean /= static_cast<double>(n * (n - 1));
    if (!(mean > 0.0)) throw DegenerateInputError("all points are identical");

    Eigen::VectorXd row(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double lo = 0.0, hi = std::numeric_limits<double>::infinity(), beta = 1.0;
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, sq_distances(i, j) / mean);

        double entropy = 0.0;
        for (int step = 0; step < kMaxSteps; ++step) {
            double sum = 0.0, weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    row[j] = 0.0;
                    continue;
                }
                const double shifted = sq_distances(i, j) / mean - dmin;
                row[j] = std::exp(-beta * shifted);
                sum += row[j];
                weighted += shifted * row[j];
            }
            entropy = std::log(sum) + beta * weighted / sum;
            row /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < kTolerance) break;
            if (diff > 0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        out.conditional.row(i) = row.transpose();
        out.perplexity[i] = std::exp(entropy);
    }
    return out;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& conditional) {
    return (conditional + conditional.transpose()) / (2.0 * static_cast<double>(conditional.rows()));
}

namespace {

/// Student-t numerators 1 / (1 + |y_i - y_j|^2) with a zero diagonal.
Eigen::MatrixXd kernel(const Eigen::MatrixXd& y) {
    Eigen::MatrixXd num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    return num;
}

}  // namespace

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& embedding) {
    const Eigen::MatrixXd num = kernel(embedding);
    const double z = num.sum();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            if (i != j && p(i, j) > 0.0) {
                const double q = std::max(num(i, j) / z, std::numeric_limits<double>::min());
                kl += p(i, j) * std::log(p(i, j) / q);
            }
    return kl;
}

}  // namespace tsne

namespace {

constexpr int kExaggerationIterations = 250;
constexpr double kExaggeration = 12.0;
constexpr double kInitialMomentum = 0.5;
constexpr double kFinalMomentum = 0.8;
constexpr double kMinGain = 0.01;

ProjectionResult run_tsne(const Eigen::MatrixXd& data, const ProjectionConfig& cfg) {
    const Eigen::Index n = data.rows();
    const auto affinities = tsne::conditional_affinities(tsne::squared_distances(data), cfg.perplexity);
    const Eigen::MatrixXd p = tsne::symmetrize(affinities.conditional);

    Eigen::MatrixXd y = pca_2d(data);
    double spread = std::sqrt((y.col(0).array() - y.col(0).mean()).square().sum() / static_cast<double>(n - 1));
    if (!(spread > 0.0)) {
        // Rank-zero PCA cannot happen for non-identical points; fall back to a seeded layout anyway.
        Rng rng(derive_seed(cfg.seed, "tsne-init"));
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = standard_normal(rng);
        spread = 1.0;
    }
    y *= 1e-4 / spread;

    ProjectionResult result;
    result.kl_initial = tsne::kl_divergence(p, y);

    Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    Eigen::MatrixXd grad(n, 2);
    for (int it = 0; it < cfg.iterations; ++it) {
        const double exaggeration = it < kExaggerationIterations ? kExaggeration : 1.0;
        const double momentum = it < kExaggerationIterations ? kInitialMomentum : kFinalMomentum;

        const Eigen::MatrixXd num = tsne::kernel(y);
        const double z = num.sum();
        // Force weights (exaggerated p_ij - q_ij) * num_ij; gradient_i = 4 sum_j w_ij (y_i - y_j).
        const Eigen::MatrixXd w = ((exaggeration * p).array() - num.array() / z).matrix().cwiseProduct(num);
        grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

        for (Eigen::Index k = 0; k < grad.size(); ++k) {
            double& g = gains.data()[k];
            const bool same_sign = (grad.data()[k] > 0) == (update.data()[k] > 0);
            g = same_sign ? g * 0.8 : g + 0.2;
            g = std::max(g, kMinGain);
        }
        update = momentum * update - cfg.learning_rate * gains.cwiseProduct(grad);
        y += update;
        y.rowwise() -= y.colwise().mean();
    }
    result.kl_final = tsne::kl_divergence(p, y);

    result.points.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        result.points[static_cast<std::size_t>(i)].x = y(i, 0);
        result.points[static_cast<std::size_t>(i)].y = y(i, 1);
    }
    return result;
}

}  // namespace

ProjectionResult project_2d(const std::vector<LabeledPoint>& points, const ProjectionConfig& cfg) {
    if (points.size() < 4) throw InsufficientDataError("projection needs at least 4 points");
    cfg.validate(points.size());
    const Eigen::Index dim = points.front().vector.size();
    if (dim < 1) throw ValidationError("points have no features");

    // Work in canonical (id, language, modality) order so the result does not
    // depend on the order the caller supplied.
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) { return std::tie(points[i].id, points[i].language, points[i].modality); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (key(order[k - 1]) == key(order[k]))
            throw ValidationError("duplicate point '" + points[order[k]].id + "' (" + points[order[k]].language + ")");

    Eigen::MatrixXd data(static_cast<Eigen::Index>(points.size()), dim);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& v = points[order[k]].vector;
        if (v.size() != dim)
            throw ValidationError("point '" + points[order[k]].id + "' (" + points[order[k]].language + ") has " +
                                  std::to_string(v.size()) + " features, expected " + std::to_string(dim) +
                                  "; project cells of one feature size together");
        if (!v.allFinite()) throw ValidationError("point '" + points[order[k]].id + "' has non-finite values");
        data.row(static_cast<Eigen::Index>(k)) = v.transpose();
    }
    if (((data.rowwise() - data.row(0)).cwiseAbs().maxCoeff()) == 0.0)
        throw DegenerateInputError("all points are identical");

    ProjectionResult sorted;
    if (cfg.method == ProjectionMethod::tsne) {
        sorted = run_tsne(data, cfg);
    } else {
        const Eigen::MatrixXd coords = pca_2d(data);
        sorted.points.resize(points.size());
        for (std::size_t k = 0; k < points.size(); ++k) {
            sorted.points[k].x = coords(static_cast<Eigen::Index>(k), 0);
            sorted.points[k].y = coords(static_cast<Eigen::Index>(k), 1);
        }
    }

    ProjectionResult out;
    out.kl_initial = sorted.kl_initial;
    out.kl_final = sorted.kl_final;
    out.points.resize(points.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& src = points[order[k]];
        out.points[order[k]] = {src.id, src.language, src.modality, sorted.points[k].x, sorted.points[k].y};
    }
    return out;
}

double silhouette(const Eigen::MatrixXd& coords, const std::vector<std::string>& labels) {
    const auto n = static_cast<std::size_t>(coords.rows());
    if (labels.size() != n) throw ValidationError("silhouette: one label per point required");

    std::vector<std::string> names(labels);
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    if (names.size() < 2) throw ValidationError("silhouette needs at least two distinct labels");
    std::vector<int> cluster(n);
    std::vector<std::size_t> sizes(names.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        cluster[i] = static_cast<int>(std::lower_bound(names.begin(), names.end(), labels[i]) - names.begin());
        ++sizes[static_cast<std::size_t>(cluster[i])];
    }
    for (std::size_t c = 0; c < names.size(); ++c)
        if (sizes[c] < 2) throw ValidationError("label '" + names[c] + "' has fewer than two points");

    const Eigen::MatrixXd dist = tsne::squared_distances(coords).cwiseSqrt();
    if (dist.maxCoeff() == 0.0) throw DegenerateInputError("silhouette is undefined: all points coincide");

    double total = 0.0;
    std::vector<double> sums(names.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[static_cast<std::size_t>(cluster[j])] += dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        const auto own = static_cast<std::size_t>(cluster[i]);
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < names.size(); ++c)
            if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

double silhouette_by_label(const std::vector<ProjectedPoint>& embedding, SilhouetteLabel label,
                           const std::map<std::string, std::string>& families) {
    Eigen::MatrixXd coords(static_cast<Eigen::Index>(embedding.size()), 2);
    std::vector<std::string> labels;
    labels.reserve(embedding.size());
    for (std::size_t i = 0; i < embedding.size(); ++i) {
        coords(static_cast<Eigen::Index>(i), 0) = embedding[i].x;
        coords(static_cast<Eigen::Index>(i), 1) = embedding[i].y;
        switch (label) {
            case SilhouetteLabel::language: labels.push_back(embedding[i].language); break;
            case SilhouetteLabel::modality: labels.emplace_back(to_string(embedding[i].modality)); break;
            case SilhouetteLabel::family: {
                auto it = families.find(embedding[i].language);
                if (it == families.end()) throw ConfigError("no family for language '" + embedding[i].language + "'");
                labels.push_back(it->second);
                break;
            }
        }
    }
    return silhouette(coords, labels);
}

std::string projection_csv(const std::vector<ProjectedPoint>& points) {
    std::string out = "id,language,modality,x,y\n";
    for (const auto& p : points) {
        out += p.id + ',' + p.language + ',';
        out += to_string(p.modality);
        out += ',' + format_double(p.x) + ',' + format_double(p.y) + '\n';
    }
    return out;
}

}  // namespace repsim
