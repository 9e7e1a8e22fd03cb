// SPDX-License-Identifier: Apache-2.0
#include "provsem/quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "provsem/error.hpp"
#include "provsem/kernels.hpp"
#include "provsem/rng.hpp"

namespace provsem {

AnalogyQuad analogy_residual(const EmbeddingVector& e1, const EmbeddingVector& e2,
                             const EmbeddingVector& e3, const EmbeddingVector& e4,
                             double tolerance, const std::array<std::string, 4>& keys) {
    const std::size_t w = e1.width();
    if (e2.width() != w || e3.width() != w || e4.width() != w)
        throw Error(ErrorKind::Data, "analogy_residual: width mismatch");

    AnalogyQuad quad;
    quad.keys = keys;
    quad.residual = std::abs(cosine_distance(e1, e2) - cosine_distance(e3, e4));

    double diff_sq = 0.0, pair1_sq = 0.0, pair2_sq = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        const double d1 = e1.values[i] - e2.values[i];
        const double d2 = e3.values[i] - e4.values[i];
        diff_sq += (d1 - d2) * (d1 - d2);
        pair1_sq += d1 * d1;
        pair2_sq += d2 * d2;
    }
    const double mean_pair_norm = (std::sqrt(pair1_sq) + std::sqrt(pair2_sq)) / 2.0;
    quad.vector_residual =
        mean_pair_norm > 0.0 ? std::sqrt(diff_sq) / mean_pair_norm : std::sqrt(diff_sq);
    quad.pass = quad.residual <= tolerance;
    return quad;
}

Projection project_2d(const EmbeddingMatrix& embeddings, const std::vector<Label>& labels,
                      const std::vector<std::string>& keys, const ProjectOptions& options) {
    const std::size_t n = embeddings.rows();
    if (labels.size() != n || keys.size() != n)
        throw Error(ErrorKind::Data, "project_2d: parallel arrays length mismatch");

    std::vector<std::size_t> selected;
    if (options.sample_per_label) {
        const std::size_t per = *options.sample_per_label;
        std::vector<std::size_t> benign_idx, adversary_idx;
        for (std::size_t i = 0; i < n; ++i)
            (labels[i] == Label::Adversary ? adversary_idx : benign_idx).push_back(i);
        if (benign_idx.size() < per || adversary_idx.size() < per)
            throw Error(ErrorKind::Data,
                        "project_2d: not enough events per label for sample of " +
                            std::to_string(per));
        Rng rng(options.seed);
        for (auto* cls : {&benign_idx, &adversary_idx}) {
            auto pick = rng.sample_without_replacement(cls->size(), per);
            std::sort(pick.begin(), pick.end());
            for (auto i : pick) selected.push_back((*cls)[i]);
        }
        std::sort(selected.begin(), selected.end());
    } else {
        selected.resize(n);
        for (std::size_t i = 0; i < n; ++i) selected[i] = i;
    }

    if (selected.size() < 3)
        throw Error(ErrorKind::Data, "project_2d: need at least 3 rows");

    Eigen::MatrixXd rows(static_cast<Eigen::Index>(selected.size()),
                         static_cast<Eigen::Index>(embeddings.width));
    for (std::size_t i = 0; i < selected.size(); ++i)
        for (std::size_t j = 0; j < embeddings.width; ++j)
            rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                embeddings.row(selected[i])[j];

    const Eigen::MatrixXd dist = kernels::cosine_distance_matrix(rows);
    if (dist.maxCoeff() < 1e-12)
        throw Error(ErrorKind::Data, "project_2d: degenerate embeddings (all identical)");

    Projection p;
    p.coords = classical_mds(dist, 2);
    p.keys.reserve(selected.size());
    p.labels.reserve(selected.size());
    for (auto i : selected) {
        p.keys.push_back(keys[i]);
        p.labels.push_back(labels[i]);
    }
    return p;
}

void write_projection_csv(const Projection& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write projection: " + path.string());
    out << "key,label,x,y\n";
    out.precision(17);
    for (std::size_t i = 0; i < p.keys.size(); ++i) {
        std::string key = p.keys[i];
        // CSV-escape the canonical key (it contains quotes and commas)
        std::string escaped;
        escaped.reserve(key.size() + 2);
        escaped += '"';
        for (char c : key) {
            if (c == '"') escaped += '"';
            escaped += c;
        }
        escaped += '"';
        out << escaped << ',' << to_string(p.labels[i]) << ','
            << p.coords.points(static_cast<Eigen::Index>(i), 0) << ','
            << p.coords.points(static_cast<Eigen::Index>(i), 1) << '\n';
    }
}

}  // namespace provsem
