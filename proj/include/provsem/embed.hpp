// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "provsem/cache.hpp"
#include "provsem/provider.hpp"

namespace provsem {

enum class EmbeddingSource { Remote, LocalHash };

struct EmbeddingVector {
    std::vector<double> values;
    double norm = 0.0;  // cached Euclidean norm
    EmbeddingSource source = EmbeddingSource::LocalHash;
    std::string text_key;  // content hash of the embedded text

    std::size_t width() const { return values.size(); }
};

struct EmbeddingProvenance {
    std::string provider;  // "remote" | "local_hash"
    std::string model_id;
    std::string config_hash;
};

// Rectangular row-major embedding matrix in corpus order.
struct EmbeddingMatrix {
    std::size_t width = 0;
    std::vector<double> data;  // rows() x width
    std::vector<std::string> text_keys;
    EmbeddingProvenance provenance;

    std::size_t rows() const { return width == 0 ? 0 : data.size() / width; }
    const double* row(std::size_t i) const { return data.data() + i * width; }
    Eigen::MatrixXd to_eigen() const;
};

struct EmbedOptions {
    std::string model_id;
    std::size_t batch_size = 128;
};

// Fixed hashing seed; changing it changes every locally produced embedding.
inline constexpr std::uint64_t kLocalHashSeed = 0x9e3779b97f4a7c15ull;

// Character n-gram (n = 3..5) signed feature hashing into `width` buckets,
// L2-normalized. Pure function of (text, width); width >= 64, text non-empty.
EmbeddingVector local_hash_embed(std::string_view text, std::size_t width);

// Batch local embedding, parallel over texts. The serial sibling is the
// reference for tests and the benchmark.
EmbeddingMatrix local_hash_embed_all(const std::vector<std::string>& texts, std::size_t width);
EmbeddingMatrix local_hash_embed_all_serial(const std::vector<std::string>& texts,
                                            std::size_t width);

// Cache-first remote embedding; misses are deduplicated and sent in batches.
// Output row order always matches input order.
EmbeddingMatrix embed_texts(const std::vector<std::string>& texts, EmbedProvider& provider,
                            const DiskCache& cache, const EmbedOptions& options);

// 1 - cos(a, b), in [0, 2]. Throws on width mismatch or zero-norm input.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

// Persistence: row-major 32-bit reals plus a JSON manifest
// (width, count, provenance, keys).
void save_embedding_matrix(const EmbeddingMatrix& m, const std::filesystem::path& bin_path,
                           const std::filesystem::path& manifest_path);
EmbeddingMatrix load_embedding_matrix(const std::filesystem::path& bin_path,
                                      const std::filesystem::path& manifest_path);

}  // namespace provsem
