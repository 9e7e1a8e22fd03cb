// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "provsem/embed.hpp"
#include "provsem/error.hpp"
#include "provsem/quality.hpp"
#include "provsem/rng.hpp"

using namespace provsem;

namespace {

EmbeddingVector vec(std::vector<double> values) {
    EmbeddingVector v;
    v.values = std::move(values);
    double n2 = 0.0;
    for (double x : v.values) n2 += x * x;
    v.norm = std::sqrt(n2);
    return v;
}

EmbeddingVector random_vec(Rng& rng, std::size_t width) {
    std::vector<double> values(width);
    for (auto& x : values) x = rng.normal();
    return vec(std::move(values));
}

EmbeddingMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    EmbeddingMatrix m;
    m.width = rows.front().size();
    for (const auto& r : rows) {
        m.data.insert(m.data.end(), r.begin(), r.end());
        m.text_keys.push_back("k" + std::to_string(m.text_keys.size()));
    }
    m.provenance.provider = "test";
    return m;
}

}  // namespace

TEST_CASE("analogy residual is zero for identical pairs") {
    const auto e1 = vec({1, 2, 3});
    const auto e2 = vec({0, 1, 0});
    const AnalogyQuad quad = analogy_residual(e1, e2, e1, e2);
    CHECK(quad.residual == 0.0);
    CHECK(quad.vector_residual == 0.0);
    CHECK(quad.pass);
}

TEST_CASE("exact parallelograms have zero vector residual") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> base(12), shift(12), offset(12);
        for (int i = 0; i < 12; ++i) {
            base[i] = rng.normal();
            shift[i] = rng.normal();
            offset[i] = rng.normal();
        }
        std::vector<double> e2(12), e3(12), e4(12);
        for (int i = 0; i < 12; ++i) {
            e2[i] = base[i] + shift[i];
            e3[i] = base[i] + offset[i];
            e4[i] = e3[i] + shift[i];  // E1 - E2 == E3 - E4
        }
        const AnalogyQuad quad = analogy_residual(vec(base), vec(e2), vec(e3), vec(e4));
        CHECK(quad.vector_residual <= 1e-12);
    }
}

TEST_CASE("analogy residual is symmetric under pair swap") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const auto e1 = random_vec(rng, 10), e2 = random_vec(rng, 10);
        const auto e3 = random_vec(rng, 10), e4 = random_vec(rng, 10);
        const AnalogyQuad a = analogy_residual(e1, e2, e3, e4);
        const AnalogyQuad b = analogy_residual(e3, e4, e1, e2);
        CHECK(a.residual == b.residual);
        CHECK(a.vector_residual == doctest::Approx(b.vector_residual).epsilon(1e-12));
    }
}

TEST_CASE("analogy residual obeys the triangle bound") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const auto e1 = random_vec(rng, 8), e2 = random_vec(rng, 8);
        const auto e3 = random_vec(rng, 8), e4 = random_vec(rng, 8);
        const AnalogyQuad quad = analogy_residual(e1, e2, e3, e4);
        CHECK(quad.residual <= cosine_distance(e1, e2) + cosine_distance(e3, e4) + 1e-15);
    }
}

TEST_CASE("analogy residual rejects width mismatches and applies the tolerance") {
    CHECK_THROWS_AS(analogy_residual(vec({1, 0}), vec({1, 0}), vec({1, 0, 0}), vec({1, 0, 0})),
                    Error);
    const auto tight = analogy_residual(vec({1, 0}), vec({0, 1}), vec({1, 0}), vec({1, 0.1}),
                                        /*tolerance=*/1e-6);
    CHECK_FALSE(tight.pass);
}

TEST_CASE("project_2d recovers an equilateral triangle") {
    // three mutually equidistant embeddings: orthogonal unit vectors
    const EmbeddingMatrix m = matrix_from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const std::vector<Label> labels = {Label::Benign, Label::Benign, Label::Adversary};
    const Projection p = project_2d(m, labels, m.text_keys, {});
    REQUIRE(p.coords.points.rows() == 3);
    const double d01 = (p.coords.points.row(0) - p.coords.points.row(1)).norm();
    const double d02 = (p.coords.points.row(0) - p.coords.points.row(2)).norm();
    const double d12 = (p.coords.points.row(1) - p.coords.points.row(2)).norm();
    CHECK(d01 == doctest::Approx(d02).epsilon(1e-9));
    CHECK(d01 == doctest::Approx(d12).epsilon(1e-9));
}

TEST_CASE("project_2d balanced sampling yields exactly the requested rows") {
    // 10,000-event matrix, 500 per label requested
    Rng rng(3);
    std::vector<std::vector<double>> rows;
    std::vector<Label> labels;
    std::vector<std::string> keys;
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> row(16);
        const bool adversary = i % 2 == 1;
        for (int j = 0; j < 16; ++j) row[static_cast<std::size_t>(j)] = rng.normal() + (adversary && j == 0 ? 4.0 : 0.0);
        rows.push_back(std::move(row));
        labels.push_back(adversary ? Label::Adversary : Label::Benign);
        keys.push_back("k" + std::to_string(i));
    }
    const EmbeddingMatrix m = matrix_from_rows(rows);

    ProjectOptions options;
    options.sample_per_label = 500;
    options.seed = 99;
    const Projection p = project_2d(m, labels, keys, options);
    REQUIRE(p.keys.size() == 1000);
    std::size_t benign = 0, adversary = 0;
    for (auto l : p.labels) (l == Label::Benign ? benign : adversary)++;
    CHECK(benign == 500);
    CHECK(adversary == 500);

    // deterministic given the seed
    const Projection q = project_2d(m, labels, keys, options);
    CHECK(q.keys == p.keys);
    CHECK(q.coords.points == p.coords.points);
}

TEST_CASE("project_2d separates well-separated clusters in the plane") {
    Rng rng(8);
    std::vector<std::vector<double>> rows;
    std::vector<Label> labels;
    std::vector<std::string> keys;
    for (int i = 0; i < 120; ++i) {
        const bool adversary = i >= 60;
        std::vector<double> row(24);
        for (int j = 0; j < 24; ++j)
            row[static_cast<std::size_t>(j)] =
                0.05 * rng.normal() + (adversary ? (j % 2 ? -1.0 : 1.0) : (j % 2 ? 1.0 : -1.0));
        rows.push_back(std::move(row));
        labels.push_back(adversary ? Label::Adversary : Label::Benign);
        keys.push_back("k" + std::to_string(i));
    }
    const Projection p = project_2d(matrix_from_rows(rows), labels, keys, {});

    // compare cross-pair distances against intra-pair distances in 2-D
    Eigen::MatrixXd pts = p.coords.points;
    double max_intra = 0.0;
    std::size_t cross_ok = 0, cross_total = 0;
    for (int i = 0; i < 120; ++i)
        for (int j = i + 1; j < 120; ++j) {
            const double d = (pts.row(i) - pts.row(j)).norm();
            if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
                max_intra = std::max(max_intra, d);
        }
    for (int i = 0; i < 60; ++i)
        for (int j = 60; j < 120; ++j) {
            ++cross_total;
            if ((pts.row(i) - pts.row(j)).norm() > max_intra) ++cross_ok;
        }
    CHECK(static_cast<double>(cross_ok) / static_cast<double>(cross_total) >= 0.95);
}

TEST_CASE("project_2d rejects degenerate and undersized inputs") {
    const EmbeddingMatrix identical = matrix_from_rows({{1, 0}, {1, 0}, {1, 0}});
    const std::vector<Label> labels(3, Label::Benign);
    CHECK_THROWS_AS(project_2d(identical, labels, identical.text_keys, {}), Error);

    const EmbeddingMatrix two = matrix_from_rows({{1, 0}, {0, 1}});
    CHECK_THROWS_AS(
        project_2d(two, {Label::Benign, Label::Benign}, two.text_keys, {}), Error);
}

TEST_CASE("projection CSV has a row per point") {
    const EmbeddingMatrix m = matrix_from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const std::vector<Label> labels = {Label::Benign, Label::Adversary, Label::Benign};
    const Projection p = project_2d(m, labels, m.text_keys, {});
    const auto path = std::filesystem::temp_directory_path() / "provsem_projection.csv";
    write_projection_csv(p, path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 4);  // header + 3 rows
}
