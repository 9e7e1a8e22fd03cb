// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace provsem {

// Minimal named-section binary container for model parameters. Layout:
//   [u64 toc_length][toc JSON][payload bytes]
// Sections are row-major f64 or f32, little-endian. Writing is deterministic
// (insertion order), so identical models serialize byte-identically.
class BlobWriter {
public:
    void add_matrix(const std::string& name, const Eigen::MatrixXd& m);
    void add_vector(const std::string& name, const Eigen::VectorXd& v);
    void add_floats(const std::string& name, const std::vector<float>& v);
    void write(const std::filesystem::path& path) const;

private:
    struct Section {
        std::string name;
        std::string kind;  // "f64" | "f32"
        std::int64_t rows = 0;
        std::int64_t cols = 0;
        std::vector<char> bytes;
    };
    std::vector<Section> sections_;
};

class BlobReader {
public:
    explicit BlobReader(const std::filesystem::path& path);

    Eigen::MatrixXd matrix(const std::string& name) const;
    Eigen::VectorXd vector(const std::string& name) const;
    std::vector<float> floats(const std::string& name) const;
    bool has(const std::string& name) const;

private:
    struct Section {
        std::string kind;
        std::int64_t rows = 0;
        std::int64_t cols = 0;
        std::size_t offset = 0;
    };
    const Section& find(const std::string& name) const;

    std::vector<char> payload_;
    std::vector<std::pair<std::string, Section>> sections_;
};

}  // namespace provsem
