#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "repsim/dataio.hpp"

namespace repsim {

struct SvccaConfig {
    /// Fraction of variance the kept singular directions must explain, in (0, 1].
    double variance_fraction = 0.90;
    /// Diagonal loading added to both covariance blocks.
    double epsilon = 1e-10;
    bool center = true;

    void validate() const;
};

struct SvccaResult {
    double score = 0.0;
    /// Canonical correlations, descending, clamped to [0, 1].
    std::vector<double> correlations;
    std::pair<Eigen::Index, Eigen::Index> kept_dims{0, 0};
    std::pair<double, double> explained_variance{0.0, 0.0};
};

/// {"score", "correlations", "kept_dims", "explained_variance"}.
std::string to_json(const SvccaResult& r, int indent = -1);

/// X minus its row means.
Eigen::MatrixXd center_rows(const Eigen::MatrixXd& x);

struct Truncation {
    /// m x M coefficients of the data on the kept left singular directions (S_m V_m^T).
    Eigen::MatrixXd coefficients;
    /// F x m kept left singular vectors.
    Eigen::MatrixXd basis;
    Eigen::Index kept = 0;
    double explained = 0.0;
};

/// Keep the smallest number of leading singular directions whose squared
/// singular values reach `variance_fraction` of the total.
Truncation variance_truncate(const Eigen::MatrixXd& centered, double variance_fraction);

/// Canonical correlations between two centered inputs with the same number
/// of columns: singular values of Sxx^-1/2 Sxy Syy^-1/2 with epsilon on both
/// diagonals. Returns min(m, n) values, descending, in [0, 1].
std::vector<double> cca_correlations(const Eigen::MatrixXd& xp, const Eigen::MatrixXd& yp, double epsilon);

/// Center, truncate each side, run CCA, average the coefficients.
/// Sentence ids of x and y must match in content and order.
SvccaResult svcca_score(const PooledMatrix& x, const PooledMatrix& y, const SvccaConfig& cfg = {});

/// Same pipeline on bare matrices (columns are assumed aligned).
SvccaResult svcca_score(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const SvccaConfig& cfg = {});

}  // namespace repsim
