#include "repsim/svcca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/SVD>

#include "json.hpp"
#include "repsim/error.hpp"

namespace repsim {

namespace {

// Correlations above 1 by more than this are treated as a numerical failure.
constexpr double kClampSlack = 1e-6;
// Relative energy below which trailing singular directions count as zero.
constexpr double kRankTolerance = 1e-12;

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

/// (S + eps I)^(-1/2) for symmetric S, eigenvalues floored at eps.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& s, double epsilon, const char* which) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw ConditioningError(std::string(which) + ": eigendecomposition failed");
    Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(epsilon);
    const double top = lambda.maxCoeff();
    const double floor = top * std::numeric_limits<double>::epsilon() * static_cast<double>(s.rows());
    if (!(top > 0.0) || lambda.minCoeff() <= floor)
        throw ConditioningError(std::string(which) + " is numerically singular (min eigenvalue " +
                                std::to_string(lambda.minCoeff()) + ", max " + std::to_string(top) + ")");
    const Eigen::VectorXd scale = lambda.cwiseSqrt().cwiseInverse();
    return eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

void SvccaConfig::validate() const {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
        throw ConfigError("variance fraction must lie in (0, 1], got " + std::to_string(variance_fraction));
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ConfigError("epsilon must be a finite nonnegative number");
}

std::string to_json(const SvccaResult& r, int indent) {
    nlohmann::json j = {
        {"score", r.score},
        {"correlations", r.correlations},
        {"kept_dims", {r.kept_dims.first, r.kept_dims.second}},
        {"explained_variance", {r.explained_variance.first, r.explained_variance.second}},
    };
    return j.dump(indent);
}

Eigen::MatrixXd center_rows(const Eigen::MatrixXd& x) {
    require_finite(x, "input");
    if (x.cols() < 2) throw InsufficientDataError("centering needs at least 2 data points");
    return x.colwise() - x.rowwise().mean();
}

Truncation variance_truncate(const Eigen::MatrixXd& centered, double variance_fraction) {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
        throw ConfigError("variance fraction must lie in (0, 1]");
    require_finite(centered, "input");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd energy = svd.singularValues().array().square();
    const double total = energy.sum();
    if (!(total > 0.0)) throw DegenerateInputError("matrix has no variance (all zero after centering)");

    const double target = variance_fraction * total * (1.0 - kRankTolerance);
    Eigen::Index m = 0;
    double cumulative = 0.0;
    while (m < energy.size() && cumulative < target) cumulative += energy[m++];

    Truncation t;
    t.kept = m;
    t.explained = cumulative / total;
    t.basis = svd.matrixU().leftCols(m);
    t.coefficients = svd.singularValues().head(m).asDiagonal() * svd.matrixV().leftCols(m).transpose();
    return t;
}

std::vector<double> cca_correlations(const Eigen::MatrixXd& xp, const Eigen::MatrixXd& yp, double epsilon) {
    if (xp.cols() != yp.cols())
        throw AlignmentError("CCA inputs have " + std::to_string(xp.cols()) + " and " + std::to_string(yp.cols()) +
                             " data points");
    if (xp.cols() < 2) throw InsufficientDataError("CCA needs at least 2 data points");
    if (xp.rows() == 0 || yp.rows() == 0) throw DegenerateInputError("CCA input has no dimensions");
    require_finite(xp, "CCA input");
    require_finite(yp, "CCA input");

    const double denom = static_cast<double>(xp.cols() - 1);
    Eigen::MatrixXd sxx = xp * xp.transpose() / denom;
    Eigen::MatrixXd syy = yp * yp.transpose() / denom;
    const Eigen::MatrixXd sxy = xp * yp.transpose() / denom;
    sxx.diagonal().array() += epsilon;
    syy.diagonal().array() += epsilon;

    const Eigen::MatrixXd t = inverse_sqrt(sxx, epsilon, "Sxx") * sxy * inverse_sqrt(syy, epsilon, "Syy");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
    const auto& sv = svd.singularValues();

    std::vector<double> rho(static_cast<std::size_t>(sv.size()));
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (!std::isfinite(sv[i]) || sv[i] > 1.0 + kClampSlack)
            throw ConditioningError("canonical correlation " + std::to_string(sv[i]) + " exceeds 1");
        rho[static_cast<std::size_t>(i)] = std::clamp(sv[i], 0.0, 1.0);
    }
    std::sort(rho.begin(), rho.end(), std::greater<>());
    return rho;
}

SvccaResult svcca_score(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const SvccaConfig& cfg) {
    cfg.validate();
    if (x.cols() != y.cols())
        throw AlignmentError("inputs have " + std::to_string(x.cols()) + " and " + std::to_string(y.cols()) +
                             " data points");
    if (x.cols() < 2) throw InsufficientDataError("SVCCA needs at least 2 data points");
    require_finite(x, "X");
    require_finite(y, "Y");

    const Truncation tx = variance_truncate(cfg.center ? center_rows(x) : x, cfg.variance_fraction);
    const Truncation ty = variance_truncate(cfg.center ? center_rows(y) : y, cfg.variance_fraction);

    SvccaResult r;
    r.correlations = cca_correlations(tx.coefficients, ty.coefficients, cfg.epsilon);
    r.score = std::accumulate(r.correlations.begin(), r.correlations.end(), 0.0) /
              static_cast<double>(r.correlations.size());
    r.kept_dims = {tx.kept, ty.kept};
    r.explained_variance = {tx.explained, ty.explained};
    return r;
}

SvccaResult svcca_score(const PooledMatrix& x, const PooledMatrix& y, const SvccaConfig& cfg) {
    x.validate();
    y.validate();
    if (x.sentence_ids != y.sentence_ids)
        throw AlignmentError(describe(x.descriptor) + " and " + describe(y.descriptor) +
                             " are not aligned; run align_pair first");
    return svcca_score(x.features, y.features, cfg);
}

}  // namespace repsim
