// SPDX-License-Identifier: Apache-2.0
#include "provsem/blob.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"

namespace provsem {

using nlohmann::json;

void BlobWriter::add_matrix(const std::string& name, const Eigen::MatrixXd& m) {
    Section s;
    s.name = name;
    s.kind = "f64";
    s.rows = m.rows();
    s.cols = m.cols();
    s.bytes.resize(static_cast<std::size_t>(m.size()) * sizeof(double));
    // row-major on disk regardless of Eigen's storage order
    double* out = reinterpret_cast<double*>(s.bytes.data());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) *out++ = m(i, j);
    sections_.push_back(std::move(s));
}

void BlobWriter::add_vector(const std::string& name, const Eigen::VectorXd& v) {
    Section s;
    s.name = name;
    s.kind = "f64";
    s.rows = v.size();
    s.cols = 1;
    s.bytes.resize(static_cast<std::size_t>(v.size()) * sizeof(double));
    std::memcpy(s.bytes.data(), v.data(), s.bytes.size());
    sections_.push_back(std::move(s));
}

void BlobWriter::add_floats(const std::string& name, const std::vector<float>& v) {
    Section s;
    s.name = name;
    s.kind = "f32";
    s.rows = static_cast<std::int64_t>(v.size());
    s.cols = 1;
    s.bytes.resize(v.size() * sizeof(float));
    std::memcpy(s.bytes.data(), v.data(), s.bytes.size());
    sections_.push_back(std::move(s));
}

void BlobWriter::write(const std::filesystem::path& path) const {
    json toc = json::array();
    std::size_t offset = 0;
    for (const auto& s : sections_) {
        toc.push_back({{"name", s.name},
                       {"kind", s.kind},
                       {"rows", s.rows},
                       {"cols", s.cols},
                       {"offset", offset},
                       {"bytes", s.bytes.size()}});
        offset += s.bytes.size();
    }
    const std::string toc_text = toc.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write blob: " + path.string());
    const std::uint64_t toc_len = toc_text.size();
    out.write(reinterpret_cast<const char*>(&toc_len), sizeof(toc_len));
    out.write(toc_text.data(), static_cast<std::streamsize>(toc_text.size()));
    for (const auto& s : sections_)
        out.write(s.bytes.data(), static_cast<std::streamsize>(s.bytes.size()));
    if (!out) throw Error(ErrorKind::Data, "write failed: " + path.string());
}

BlobReader::BlobReader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Data, "cannot open blob: " + path.string());
    std::uint64_t toc_len = 0;
    in.read(reinterpret_cast<char*>(&toc_len), sizeof(toc_len));
    std::string toc_text(toc_len, '\0');
    in.read(toc_text.data(), static_cast<std::streamsize>(toc_len));
    if (!in) throw Error(ErrorKind::Data, "truncated blob: " + path.string());
    json toc = json::parse(toc_text);
    std::size_t total = 0;
    for (const auto& e : toc) {
        Section s;
        s.kind = e.at("kind").get<std::string>();
        s.rows = e.at("rows").get<std::int64_t>();
        s.cols = e.at("cols").get<std::int64_t>();
        s.offset = e.at("offset").get<std::size_t>();
        total += e.at("bytes").get<std::size_t>();
        sections_.emplace_back(e.at("name").get<std::string>(), s);
    }
    payload_.resize(total);
    in.read(payload_.data(), static_cast<std::streamsize>(total));
    if (!in) throw Error(ErrorKind::Data, "truncated blob payload: " + path.string());
}

const BlobReader::Section& BlobReader::find(const std::string& name) const {
    for (const auto& [n, s] : sections_)
        if (n == name) return s;
    throw Error(ErrorKind::Data, "blob section not found: " + name);
}

bool BlobReader::has(const std::string& name) const {
    for (const auto& [n, s] : sections_)
        if (n == name) return true;
    return false;
}

Eigen::MatrixXd BlobReader::matrix(const std::string& name) const {
    const Section& s = find(name);
    if (s.kind != "f64") throw Error(ErrorKind::Data, "blob section kind mismatch: " + name);
    Eigen::MatrixXd m(s.rows, s.cols);
    const double* p = reinterpret_cast<const double*>(payload_.data() + s.offset);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = *p++;
    return m;
}

Eigen::VectorXd BlobReader::vector(const std::string& name) const {
    const Section& s = find(name);
    if (s.kind != "f64" || s.cols != 1)
        throw Error(ErrorKind::Data, "blob section is not a vector: " + name);
    Eigen::VectorXd v(s.rows);
    std::memcpy(v.data(), payload_.data() + s.offset,
                static_cast<std::size_t>(s.rows) * sizeof(double));
    return v;
}

std::vector<float> BlobReader::floats(const std::string& name) const {
    const Section& s = find(name);
    if (s.kind != "f32") throw Error(ErrorKind::Data, "blob section kind mismatch: " + name);
    std::vector<float> v(static_cast<std::size_t>(s.rows));
    std::memcpy(v.data(), payload_.data() + s.offset, v.size() * sizeof(float));
    return v;
}

}  // namespace provsem
