// SPDX-License-Identifier: Apache-2.0
#include "provsem/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"
#include "provsem/hash.hpp"

namespace provsem {

using nlohmann::json;

Eigen::MatrixXd EmbeddingMatrix::to_eigen() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t j = 0; j < width; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * width + j];
    return m;
}

namespace {

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void hash_text_into(std::string_view text, std::size_t width, std::vector<double>& acc) {
    auto add_gram = [&](std::string_view g) {
        const std::uint64_t h = mix64(fnv1a64(g, kLocalHashSeed));
        const std::size_t bucket = static_cast<std::size_t>(h % width);
        acc[bucket] += (h >> 63) ? -1.0 : 1.0;
    };
    const std::size_t len = text.size();
    if (len < 3) {
        add_gram(text);
        return;
    }
    for (std::size_t n = 3; n <= 5; ++n) {
        if (len < n) break;
        for (std::size_t i = 0; i + n <= len; ++i) add_gram(text.substr(i, n));
    }
}

std::vector<double> hash_embed_values(std::string_view text, std::size_t width) {
    std::vector<double> acc(width, 0.0);
    hash_text_into(text, width, acc);
    double norm = l2_norm(acc);
    if (norm < 1e-12) {
        // pathological full cancellation: fall back to a single deterministic bucket
        std::fill(acc.begin(), acc.end(), 0.0);
        acc[mix64(fnv1a64(text, kLocalHashSeed)) % width] = 1.0;
        norm = 1.0;
    }
    for (double& x : acc) x /= norm;
    return acc;
}

}  // namespace

EmbeddingVector local_hash_embed(std::string_view text, std::size_t width) {
    if (text.empty()) throw Error(ErrorKind::Data, "local_hash_embed: empty text");
    if (width < 64) throw Error(ErrorKind::Config, "local_hash_embed: width must be >= 64");
    EmbeddingVector v;
    v.values = hash_embed_values(text, width);
    v.norm = l2_norm(v.values);
    v.source = EmbeddingSource::LocalHash;
    v.text_key = sha256_hex(text);
    return v;
}

EmbeddingMatrix local_hash_embed_all_serial(const std::vector<std::string>& texts,
                                            std::size_t width) {
    if (width < 64) throw Error(ErrorKind::Config, "local_hash_embed: width must be >= 64");
    EmbeddingMatrix m;
    m.width = width;
    m.data.resize(texts.size() * width);
    m.text_keys.resize(texts.size());
    m.provenance.provider = "local_hash";
    m.provenance.model_id = "fnv1a64-ngram-3-5";
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty())
            throw Error(ErrorKind::Data, "embed: empty text at row " + std::to_string(i));
        const auto row = hash_embed_values(texts[i], width);
        std::copy(row.begin(), row.end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * width));
        m.text_keys[i] = sha256_hex(texts[i]);
    }
    return m;
}

EmbeddingMatrix local_hash_embed_all(const std::vector<std::string>& texts, std::size_t width) {
    if (width < 64) throw Error(ErrorKind::Config, "local_hash_embed: width must be >= 64");
    for (std::size_t i = 0; i < texts.size(); ++i)
        if (texts[i].empty())
            throw Error(ErrorKind::Data, "embed: empty text at row " + std::to_string(i));
    EmbeddingMatrix m;
    m.width = width;
    m.data.resize(texts.size() * width);
    m.text_keys.resize(texts.size());
    m.provenance.provider = "local_hash";
    m.provenance.model_id = "fnv1a64-ngram-3-5";
#pragma omp parallel for schedule(dynamic, 32)
    for (long long i = 0; i < static_cast<long long>(texts.size()); ++i) {
        const auto row = hash_embed_values(texts[static_cast<std::size_t>(i)], width);
        std::copy(row.begin(), row.end(),
                  m.data.begin() + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(width));
        m.text_keys[static_cast<std::size_t>(i)] = sha256_hex(texts[static_cast<std::size_t>(i)]);
    }
    return m;
}

EmbeddingMatrix embed_texts(const std::vector<std::string>& texts, EmbedProvider& provider,
                            const DiskCache& cache, const EmbedOptions& options) {
    EmbeddingMatrix m;
    m.provenance.provider = "remote";
    m.provenance.model_id = options.model_id;
    if (texts.empty()) {
        m.width = 0;
        return m;
    }

    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty())
            throw Error(ErrorKind::Data, "embed: empty text at row " + std::to_string(i));
        keys[i] = sha256_hex(options.model_id + '\0' + texts[i]);
    }

    std::unordered_map<std::string, std::vector<double>> resolved;
    std::vector<std::string> miss_keys;
    std::vector<std::string> miss_texts;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (resolved.contains(keys[i])) continue;
        if (auto hit = cache.get(keys[i])) {
            resolved.emplace(keys[i], hit->at("embedding").get<std::vector<double>>());
        } else if (std::find(miss_keys.begin(), miss_keys.end(), keys[i]) == miss_keys.end()) {
            miss_keys.push_back(keys[i]);
            miss_texts.push_back(texts[i]);
        }
    }

    const std::size_t batch = options.batch_size == 0 ? 128 : options.batch_size;
    for (std::size_t start = 0; start < miss_texts.size(); start += batch) {
        const std::size_t end = std::min(start + batch, miss_texts.size());
        std::vector<std::string> chunk(miss_texts.begin() + static_cast<std::ptrdiff_t>(start),
                                       miss_texts.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<std::vector<double>> rows;
        try {
            rows = provider.embed_batch(chunk, options.model_id);
        } catch (const ProviderError& e) {
            throw ProviderError("embedding batch [" + std::to_string(start) + ", " +
                                std::to_string(end) + ") failed: " + e.what());
        }
        if (rows.size() != chunk.size())
            throw ProviderError("embedding provider returned " + std::to_string(rows.size()) +
                                " rows for " + std::to_string(chunk.size()) + " inputs");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            json entry;
            entry["model"] = options.model_id;
            entry["text"] = chunk[i];
            entry["embedding"] = rows[i];
            cache.put(miss_keys[start + i], entry);
            resolved.emplace(miss_keys[start + i], std::move(rows[i]));
        }
    }

    const std::size_t width = resolved.at(keys[0]).size();
    if (width == 0) throw ProviderError("embedding provider returned empty vectors");
    m.width = width;
    m.data.resize(texts.size() * width);
    m.text_keys.resize(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto& row = resolved.at(keys[i]);
        if (row.size() != width)
            throw ProviderError("embedding width mismatch at row " + std::to_string(i) + ": " +
                                std::to_string(row.size()) + " vs " + std::to_string(width));
        std::copy(row.begin(), row.end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * width));
        m.text_keys[i] = keys[i];
    }
    return m;
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.width() != b.width())
        throw Error(ErrorKind::Data, "cosine_distance: width mismatch " +
                                         std::to_string(a.width()) + " vs " +
                                         std::to_string(b.width()));
    if (a.norm <= 0.0 || b.norm <= 0.0)
        throw Error(ErrorKind::Data, "cosine_distance: zero-norm input");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return 1.0 - dot / (a.norm * b.norm);
}

void save_embedding_matrix(const EmbeddingMatrix& m, const std::filesystem::path& bin_path,
                           const std::filesystem::path& manifest_path) {
    {
        std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write matrix: " + bin_path.string());
        std::vector<float> row(m.width);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.width; ++j)
                row[j] = static_cast<float>(m.data[i * m.width + j]);
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * sizeof(float)));
        }
        if (!out) throw Error(ErrorKind::Data, "matrix write failed: " + bin_path.string());
    }
    json manifest;
    manifest["width"] = m.width;
    manifest["count"] = m.rows();
    manifest["dtype"] = "f32";
    manifest["layout"] = "row-major";
    manifest["provenance"] = {{"provider", m.provenance.provider},
                              {"model_id", m.provenance.model_id},
                              {"config_hash", m.provenance.config_hash}};
    manifest["text_keys"] = m.text_keys;
    manifest["data_sha256"] = sha256_file(bin_path);
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write manifest: " + manifest_path.string());
    out << manifest.dump(2) << '\n';
}

EmbeddingMatrix load_embedding_matrix(const std::filesystem::path& bin_path,
                                      const std::filesystem::path& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw Error(ErrorKind::Data, "cannot read manifest: " + manifest_path.string());
    json manifest;
    mf >> manifest;

    EmbeddingMatrix m;
    m.width = manifest.at("width").get<std::size_t>();
    const auto count = manifest.at("count").get<std::size_t>();
    m.text_keys = manifest.at("text_keys").get<std::vector<std::string>>();
    m.provenance.provider = manifest.at("provenance").at("provider").get<std::string>();
    m.provenance.model_id = manifest.at("provenance").at("model_id").get<std::string>();
    m.provenance.config_hash = manifest.at("provenance").at("config_hash").get<std::string>();

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Data, "cannot read matrix: " + bin_path.string());
    std::vector<float> raw(count * m.width);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!in) throw Error(ErrorKind::Data, "truncated matrix: " + bin_path.string());
    m.data.assign(raw.begin(), raw.end());
    return m;
}

}  // namespace provsem
