#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repsim/dataio.hpp"

namespace repsim {

enum class ProjectionMethod { tsne, pca };

ProjectionMethod parse_projection_method(std::string_view s);

struct ProjectionConfig {
    ProjectionMethod method = ProjectionMethod::tsne;
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    std::uint64_t seed = 0;

    /// Throws ConfigError for iterations < 250 or perplexity >= (n_points - 1) / 3.
    void validate(std::size_t n_points) const;
};

struct LabeledPoint {
    std::string id;
    std::string language;
    Modality modality = Modality::text;
    Eigen::VectorXd vector;
};

struct ProjectedPoint {
    std::string id;
    std::string language;
    Modality modality = Modality::text;
    double x = 0.0;
    double y = 0.0;
};

struct ProjectionResult {
    /// Same order as the input points.
    std::vector<ProjectedPoint> points;
    /// KL(P || Q) with unexaggerated P at the initial and final layouts (t-SNE only).
    double kl_initial = 0.0;
    double kl_final = 0.0;
};

/// 2-D layout of the points by exact t-SNE or PCA. Deterministic for a given
/// config; permuting the input permutes the output the same way.
ProjectionResult project_2d(const std::vector<LabeledPoint>& points, const ProjectionConfig& cfg);

/// Rows of `data` (N x D) projected on the top two principal components.
/// Component signs are fixed so the largest-magnitude loading is positive.
Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& data);

namespace tsne {

/// Squared Euclidean distances between rows.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& data);

struct Affinities {
    /// Row-stochastic conditional probabilities p_{j|i}.
    Eigen::MatrixXd conditional;
    /// Perplexity exp(H) actually reached per point (H in nats).
    Eigen::VectorXd perplexity;
};

/// Gaussian conditional affinities with per-point precision found by
/// bisection on the entropy (tolerance 1e-5 in nats, at most 50 steps).
Affinities conditional_affinities(const Eigen::MatrixXd& sq_distances, double perplexity);

/// (P + P^T) / 2N.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& conditional);

/// KL(P || Q) for the Student-t kernel on the embedding rows.
double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& embedding);

}  // namespace tsne

enum class SilhouetteLabel { language, modality, family };

/// Mean silhouette coefficient of the 2-D coordinates under `labels`.
/// Requires at least two labels, each with at least two points.
double silhouette(const Eigen::MatrixXd& coords, const std::vector<std::string>& labels);

/// Silhouette of a projection under one labeling. `families` maps language
/// codes to families and is required for SilhouetteLabel::family.
double silhouette_by_label(const std::vector<ProjectedPoint>& embedding, SilhouetteLabel label,
                           const std::map<std::string, std::string>& families = {});

std::string projection_csv(const std::vector<ProjectedPoint>& points);

}  // namespace repsim
