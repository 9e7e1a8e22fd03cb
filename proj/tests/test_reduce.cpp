// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "provsem/error.hpp"
#include "provsem/kernels.hpp"
#include "provsem/reduce.hpp"
#include "provsem/rng.hpp"

using namespace provsem;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    return x;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& pts) {
    const Eigen::Index n = pts.rows();
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
    return d;
}

}  // namespace

TEST_CASE("kpca matches the independent Jacobi oracle") {
    const auto x = random_matrix(4, 3, 2024);
    auto [model, projected] = kpca_fit_transform(x, 1.0, 2);
    const Eigen::MatrixXd expected = oracle::kpca_oracle(x, 1.0, 2);
    REQUIRE(projected.rows() == expected.rows());
    REQUIRE(projected.cols() == expected.cols());
    for (Eigen::Index c = 0; c < expected.cols(); ++c) {
        // sign convention applied on both sides; columns must match directly
        CHECK((projected.col(c) - expected.col(c)).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("kpca degenerate data yields zero usable components and a warning") {
    Eigen::MatrixXd x(3, 2);
    x << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;  // all rows identical
    auto [model, projected] = kpca_fit_transform(x, 0.5, 2);
    CHECK(model.usable_components() == 0);
    CHECK(model.truncated);
    CHECK(projected.cols() == 0);
    CHECK(projected.rows() == 3);
}

TEST_CASE("kpca transform of the training data reproduces the fit output") {
    const auto x = random_matrix(12, 4, 7);
    auto [model, projected] = kpca_fit_transform(x, 0.8, 5);
    const Eigen::MatrixXd again = kpca_transform(model, x);
    CHECK((again - projected).cwiseAbs().maxCoeff() <= 1e-8);

    // a single training row projects to its fit-time coordinates
    const Eigen::MatrixXd one = kpca_transform(model, x.row(3));
    CHECK((one - projected.row(3)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("kpca far-out-of-sample points approach the centering constant") {
    const auto x = random_matrix(10, 3, 55);
    auto [model, projected] = kpca_fit_transform(x, 1.0, 3);

    // limit case computed directly from the stored statistics: the cross
    // kernel vanishes, leaving -row_means + total_mean through the components
    const Eigen::Index n = x.rows();
    Eigen::RowVectorXd centered(n);
    for (Eigen::Index j = 0; j < n; ++j) centered[j] = -model.row_means[j] + model.total_mean;
    const Eigen::RowVectorXd limit = centered * model.components;

    Eigen::MatrixXd far(1, 3);
    far << 1e6, -1e6, 1e6;
    const Eigen::MatrixXd projected_far = kpca_transform(model, far);
    REQUIRE(projected_far.allFinite());
    CHECK((projected_far.row(0) - limit).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("kpca transform of an empty matrix is empty") {
    const auto x = random_matrix(6, 3, 3);
    auto [model, projected] = kpca_fit_transform(x, 1.0, 2);
    const Eigen::MatrixXd empty = kpca_transform(model, Eigen::MatrixXd(0, 3));
    CHECK(empty.rows() == 0);
    CHECK(empty.cols() == model.usable_components());
}

TEST_CASE("kpca rejects bad arguments") {
    const auto x = random_matrix(5, 2, 4);
    CHECK_THROWS_AS(kpca_fit_transform(x, 1.0, 5), Error);   // k > n-1
    CHECK_THROWS_AS(kpca_fit_transform(x, 1.0, 0), Error);
    CHECK_THROWS_AS(kpca_fit_transform(x, -1.0, 2), Error);  // gamma <= 0
    auto [model, projected] = kpca_fit_transform(x, 1.0, 2);
    CHECK_THROWS_AS(kpca_transform(model, random_matrix(2, 3, 5)), Error);  // width
}

TEST_CASE("kpca eigenvalues descend and match per-component variance") {
    const auto x = random_matrix(20, 6, 31);
    auto [model, projected] = kpca_fit_transform(x, 0.5, 8);
    const auto n = static_cast<double>(x.rows());
    for (int c = 0; c < model.usable_components(); ++c) {
        if (c > 0) CHECK(model.eigenvalues[c] < model.eigenvalues[c - 1]);
        CHECK(model.eigenvalues[c] > kEigenvalueFloor);
        const double mean = projected.col(c).mean();
        const double var = (projected.col(c).array() - mean).square().sum() / n;
        CHECK(std::abs(var - model.eigenvalues[c] / n) <= 1e-8);
    }
}

TEST_CASE("kpca is permutation-equivariant up to tolerance") {
    const auto x = random_matrix(9, 4, 71);
    auto [model_a, projected_a] = kpca_fit_transform(x, 0.9, 3);

    std::vector<Eigen::Index> perm = {4, 7, 1, 0, 8, 2, 6, 3, 5};
    Eigen::MatrixXd shuffled(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) shuffled.row(i) = x.row(perm[i]);
    auto [model_b, projected_b] = kpca_fit_transform(shuffled, 0.9, 3);

    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index c = 0; c < projected_a.cols(); ++c)
            CHECK(std::abs(projected_b(i, c) - projected_a(perm[i], c)) <= 1e-7);
}

TEST_CASE("kpca gamma heuristics are positive and finite") {
    const auto x = random_matrix(30, 5, 13);
    const double g1 = kpca_auto_gamma(x);
    const double g2 = kpca_median_gamma(x);
    CHECK(g1 > 0.0);
    CHECK(g2 > 0.0);
    CHECK(std::isfinite(g1));
    CHECK(std::isfinite(g2));
}

TEST_CASE("kpca serialization round-trips") {
    const auto x = random_matrix(8, 3, 100);
    auto [model, projected] = kpca_fit_transform(x, 1.1, 4);
    const auto dir = std::filesystem::temp_directory_path() / "provsem_kpca";
    std::filesystem::create_directories(dir);
    save_kpca(model, dir / "model.json", dir / "model.bin");
    const KpcaModel back = load_kpca(dir / "model.json", dir / "model.bin");
    const Eigen::MatrixXd projected_back = kpca_transform(back, x);
    CHECK((projected_back - projected).cwiseAbs().maxCoeff() == 0.0);  // exact payload
}

TEST_CASE("classical_mds recovers a unit square exactly") {
    Eigen::MatrixXd square(4, 2);
    square << 0, 0, 1, 0, 1, 1, 0, 1;
    const Coordinates2D coords = classical_mds(pairwise_distances(square), 2);
    CHECK(coords.stress < 1e-9);
    CHECK(oracle::procrustes_residual(coords.points, square) < 1e-9);
    // centered output
    CHECK(std::abs(coords.points.col(0).mean()) < 1e-9);
    CHECK(std::abs(coords.points.col(1).mean()) < 1e-9);
}

TEST_CASE("classical_mds two points at distance three") {
    Eigen::MatrixXd d(2, 2);
    d << 0, 3, 3, 0;
    const Coordinates2D coords = classical_mds(d, 2);
    CHECK((coords.points.row(0) - coords.points.row(1)).norm() == doctest::Approx(3.0));
    CHECK(coords.stress < 1e-12);
}

TEST_CASE("classical_mds rejects malformed distance matrices") {
    Eigen::MatrixXd asym(2, 2);
    asym << 0, 1, 2, 0;
    CHECK_THROWS_AS(classical_mds(asym, 2), Error);

    Eigen::MatrixXd diag(2, 2);
    diag << 1, 1, 1, 0;
    CHECK_THROWS_AS(classical_mds(diag, 2), Error);

    Eigen::MatrixXd neg(2, 2);
    neg << 0, -1, -1, 0;
    CHECK_THROWS_AS(classical_mds(neg, 2), Error);
}

TEST_CASE("classical_mds preserves parallelogram analogy structure") {
    // embeddings engineered as two exactly parallel difference vectors
    Rng rng(2);
    Eigen::RowVectorXd e1(16), shift(16), pair_offset(16);
    for (int i = 0; i < 16; ++i) {
        e1[i] = rng.normal();
        shift[i] = 0.3 * rng.normal();
        pair_offset[i] = 2.0 * rng.normal();
    }
    Eigen::MatrixXd pts(8, 16);
    pts.row(0) = e1;                    // E1
    pts.row(1) = e1 + shift;            // E2 = E1 + s
    pts.row(2) = e1 + pair_offset;      // E3
    pts.row(3) = pts.row(2) + shift;    // E4 = E3 + s
    for (int i = 4; i < 8; ++i) {
        Eigen::RowVectorXd noise(16);
        for (int j = 0; j < 16; ++j) noise[j] = rng.normal();
        pts.row(i) = 5.0 * noise;
    }

    const Coordinates2D coords = classical_mds(pairwise_distances(pts), 2);
    const double len1 = (coords.points.row(0) - coords.points.row(1)).norm();
    const double len2 = (coords.points.row(2) - coords.points.row(3)).norm();
    CHECK(std::abs(len1 - len2) <= 1e-6);
}

TEST_CASE("classical_mds of an exactly embeddable planar set has tiny stress") {
    Rng rng(8);
    Eigen::MatrixXd pts(10, 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        pts(i, 0) = rng.normal();
        pts(i, 1) = rng.normal();
    }
    const Coordinates2D coords = classical_mds(pairwise_distances(pts), 2);
    CHECK(coords.stress < 1e-9);
    CHECK(oracle::procrustes_residual(coords.points, pts) < 1e-9);
}
