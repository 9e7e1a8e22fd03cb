// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "provsem/embed.hpp"
#include "provsem/event.hpp"
#include "provsem/reduce.hpp"

namespace provsem {

// One analogical-reasoning check over four embeddings: the pairs (e1, e2) and
// (e3, e4) should sit at similar distances and form a near-parallelogram.
struct AnalogyQuad {
    std::array<std::string, 4> keys;
    double residual = 0.0;         // | d(E1,E2) - d(E3,E4) |, cosine distance
    double vector_residual = 0.0;  // ||(E1-E2) - (E3-E4)|| / mean pair norm
    bool pass = false;
};

inline constexpr double kDefaultAnalogyTolerance = 0.05;

AnalogyQuad analogy_residual(const EmbeddingVector& e1, const EmbeddingVector& e2,
                             const EmbeddingVector& e3, const EmbeddingVector& e4,
                             double tolerance = kDefaultAnalogyTolerance,
                             const std::array<std::string, 4>& keys = {});

struct ProjectOptions {
    std::optional<std::size_t> sample_per_label;  // balanced subsample when set
    std::uint64_t seed = 0;
};

struct Projection {
    Coordinates2D coords;
    std::vector<std::string> keys;
    std::vector<Label> labels;
};

// Pairwise cosine distances -> classical MDS in two dimensions. Requires at
// least 3 rows; rejects degenerate all-identical embeddings.
Projection project_2d(const EmbeddingMatrix& embeddings, const std::vector<Label>& labels,
                      const std::vector<std::string>& keys, const ProjectOptions& options);

// CSV rows: key,label,x,y.
void write_projection_csv(const Projection& p, const std::filesystem::path& path);

}  // namespace provsem
