#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "repsim/error.hpp"
#include "repsim/svcca.hpp"

using namespace repsim;

namespace {

Eigen::MatrixXd projector(const Eigen::MatrixXd& basis) { return basis * basis.transpose(); }

}  // namespace

TEST_CASE("center_rows") {
    Eigen::MatrixXd x(2, 3);
    x << 5, 5, 5, 1, 2, 3;
    const auto c = center_rows(x);
    CHECK(c.row(0).norm() == 0.0);
    CHECK(c(1, 0) == -1.0);
    CHECK(c(1, 1) == 0.0);
    CHECK(c(1, 2) == 1.0);
    CHECK((center_rows(c) - c).norm() < 1e-15);
    CHECK_THROWS_AS(center_rows(Eigen::MatrixXd::Ones(3, 1)), InsufficientDataError);
}

TEST_CASE("variance_truncate") {
    std::mt19937_64 rng(5);
    SUBCASE("singular values 3, 2, 1") {
        const auto u = oracle::random_orthogonal(rng, 3);
        const Eigen::MatrixXd v = oracle::random_orthogonal(rng, 6).leftCols(3);
        const Eigen::MatrixXd x = u * Eigen::Vector3d(3, 2, 1).asDiagonal() * v.transpose();
        const auto t = variance_truncate(x, 0.9);
        CHECK(t.kept == 2);
        CHECK(t.explained == doctest::Approx(13.0 / 14.0).epsilon(1e-12));
        CHECK(variance_truncate(x, 9.0 / 14.0).kept == 1);
        CHECK(variance_truncate(x, 0.93).kept == 3);
    }
    SUBCASE("k = 1 keeps the rank") {
        const Eigen::MatrixXd x = center_rows(oracle::gaussian(rng, 6, 3) * oracle::gaussian(rng, 3, 40));
        const auto t = variance_truncate(x, 1.0);
        CHECK(t.kept == 3);
        // Basis spans the row space: reconstruction is exact.
        CHECK((t.basis * t.coefficients - x).norm() < 1e-10 * x.norm());
    }
    SUBCASE("subspace matches an eigendecomposition of X X^T") {
        const Eigen::MatrixXd x = center_rows(oracle::gaussian(rng, 20, 100));
        const auto t = variance_truncate(x, 0.9);
        const auto o = oracle::eig_truncate(x, 0.9);
        CHECK(t.kept == o.kept);
        CHECK((projector(t.basis) - projector(o.basis)).norm() < 1e-8);
    }
    SUBCASE("kept dimension is monotone in k") {
        const Eigen::MatrixXd x = center_rows(oracle::gaussian(rng, 15, 60));
        Eigen::Index prev = 0;
        for (double k = 0.05; k <= 1.0; k += 0.05) {
            const auto m = variance_truncate(x, k).kept;
            CHECK(m >= prev);
            prev = m;
        }
    }
    SUBCASE("bad inputs") {
        CHECK_THROWS_AS(variance_truncate(Eigen::MatrixXd::Zero(3, 5), 0.9), DegenerateInputError);
        CHECK_THROWS_AS(variance_truncate(Eigen::MatrixXd::Ones(3, 5), 0.0), ConfigError);
        CHECK_THROWS_AS(variance_truncate(Eigen::MatrixXd::Ones(3, 5), 1.5), ConfigError);
    }
}

TEST_CASE("cca_correlations") {
    std::mt19937_64 rng(9);
    SUBCASE("one dimension each is |Pearson|") {
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::MatrixXd x = center_rows(oracle::gaussian(rng, 1, 50));
            const Eigen::MatrixXd y = center_rows(-0.7 * x + 0.8 * oracle::gaussian(rng, 1, 50));
            const auto rho = cca_correlations(x, y, 0.0);
            REQUIRE(rho.size() == 1);
            const std::vector<double> xv(x.data(), x.data() + 50), yv(y.data(), y.data() + 50);
            CHECK(rho[0] == doctest::Approx(std::abs(oracle::pearson(xv, yv))).epsilon(1e-10));
        }
    }
    SUBCASE("orthogonal image is perfectly correlated") {
        const Eigen::MatrixXd x = center_rows(oracle::gaussian(rng, 5, 80));
        const Eigen::MatrixXd y = oracle::random_orthogonal(rng, 5) * x;
        for (double r : cca_correlations(x, y, 0.0)) CHECK(std::abs(r - 1.0) < 1e-6);
    }
    SUBCASE("independent inputs follow the null distribution") {
        // Monte-Carlo null from the generalized-eigenproblem oracle on other seeds.
        constexpr int kSeeds = 120;
        std::vector<double> lib(5, 0.0), ref(5, 0.0), ref_sq(5, 0.0);
        std::mt19937_64 rng_ref(1234);
        for (int s = 0; s < kSeeds; ++s) {
            const auto a = cca_correlations(center_rows(oracle::gaussian(rng, 5, 2000)),
                                            center_rows(oracle::gaussian(rng, 5, 2000)), 0.0);
            const auto b = oracle::gep_cca(center_rows(oracle::gaussian(rng_ref, 5, 2000)),
                                           center_rows(oracle::gaussian(rng_ref, 5, 2000)), 0.0);
            for (std::size_t i = 0; i < 5; ++i) {
                lib[i] += a[i] / kSeeds;
                ref[i] += b[i] / kSeeds;
                ref_sq[i] += b[i] * b[i] / kSeeds;
            }
        }
        for (std::size_t i = 0; i < 5; ++i) {
            const double se = std::sqrt((ref_sq[i] - ref[i] * ref[i]) / kSeeds);
            CHECK(std::abs(lib[i] - ref[i]) < 4.0 * std::sqrt(2.0) * se);
            CHECK(lib[i] < 0.15);
        }
    }
    SUBCASE("descending and bounded") {
        const auto rho = cca_correlations(center_rows(oracle::gaussian(rng, 4, 30)),
                                          center_rows(oracle::gaussian(rng, 7, 30)), 1e-10);
        REQUIRE(rho.size() == 4);
        for (std::size_t i = 0; i < rho.size(); ++i) {
            CHECK(rho[i] >= 0.0);
            CHECK(rho[i] <= 1.0);
            if (i) CHECK(rho[i] <= rho[i - 1]);
        }
    }
    SUBCASE("shape errors") {
        CHECK_THROWS_AS(cca_correlations(Eigen::MatrixXd::Ones(2, 5), Eigen::MatrixXd::Ones(2, 6), 0.0), AlignmentError);
        CHECK_THROWS_AS(cca_correlations(Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Ones(2, 1), 0.0),
                        InsufficientDataError);
    }
    SUBCASE("rank deficient covariance without loading") {
        Eigen::MatrixXd x = center_rows(oracle::gaussian(rng, 3, 40));
        x.row(2) = x.row(0);
        CHECK_THROWS_AS(cca_correlations(x, center_rows(oracle::gaussian(rng, 3, 40)), 0.0), ConditioningError);
    }
}

TEST_CASE("svcca_score") {
    std::mt19937_64 rng(17);
    SUBCASE("self similarity") {
        const auto x = oracle::gaussian(rng, 8, 50);
        CHECK(std::abs(svcca_score(x, x).score - 1.0) < 1e-6);
    }
    SUBCASE("orthogonal, scale and offset invariance") {
        const auto x = oracle::gaussian(rng, 8, 50);
        const double self = svcca_score(x, x).score;
        const Eigen::MatrixXd y =
            (-2.5 * oracle::random_orthogonal(rng, 8) * x).colwise() + Eigen::VectorXd::LinSpaced(8, -3, 9);
        CHECK(std::abs(svcca_score(x, y).score - self) < 1e-6);
    }
    SUBCASE("symmetry") {
        for (int t = 0; t < 5; ++t) {
            const auto x = oracle::gaussian(rng, 12, 40);
            const auto y = oracle::gaussian(rng, 9, 40);
            CHECK(std::abs(svcca_score(x, y).score - svcca_score(y, x).score) < 1e-8);
        }
    }
    SUBCASE("matches the independent solver") {
        for (int t = 0; t < 10; ++t) {
            const Eigen::MatrixXd x = oracle::gaussian(rng, 10, 48);
            const Eigen::MatrixXd y = 0.5 * x.topRows(6) + oracle::gaussian(rng, 6, 48);
            CHECK(std::abs(svcca_score(x, y).score - oracle::svcca(x, y, 0.9, 1e-10)) < 1e-6);
        }
    }
    SUBCASE("range and bookkeeping") {
        const auto r = svcca_score(oracle::gaussian(rng, 16, 30), oracle::gaussian(rng, 20, 30));
        CHECK(r.score >= 0.0);
        CHECK(r.score <= 1.0);
        CHECK(r.correlations.size() ==
              static_cast<std::size_t>(std::min(r.kept_dims.first, r.kept_dims.second)));
        CHECK(r.explained_variance.first >= 0.9 - 1e-12);
        CHECK(r.explained_variance.second >= 0.9 - 1e-12);
        const auto j = to_json(r);
        CHECK(j.find("\"score\"") != std::string::npos);
        CHECK(j.find("\"kept_dims\"") != std::string::npos);
    }
    SUBCASE("pooled inputs must be aligned") {
        PooledMatrix a, b;
        a.features = oracle::gaussian(rng, 4, 3);
        b.features = oracle::gaussian(rng, 4, 3);
        a.sentence_ids = {"a", "b", "c"};
        b.sentence_ids = {"a", "c", "b"};
        CHECK_THROWS_AS(svcca_score(a, b), AlignmentError);
        b.sentence_ids = a.sentence_ids;
        CHECK_NOTHROW(svcca_score(a, b));
    }
    SUBCASE("config validation") {
        SvccaConfig cfg;
        cfg.variance_fraction = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.variance_fraction = 0.9;
        cfg.epsilon = -1.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        CHECK_THROWS_AS(svcca_score(Eigen::MatrixXd::Ones(3, 4), Eigen::MatrixXd::Ones(3, 5)), AlignmentError);
    }
}
