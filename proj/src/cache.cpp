// SPDX-License-Identifier: Apache-2.0
#include "provsem/cache.hpp"

#include <unistd.h>

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"
#include "provsem/hash.hpp"

namespace provsem {

using nlohmann::json;

namespace {

bool safe_key(const std::string& key) {
    if (key.empty() || key.size() > 200) return false;
    for (unsigned char c : key)
        if (!std::isalnum(c) && c != '-' && c != '_') return false;
    return true;
}

}  // namespace

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path DiskCache::path_for(const std::string& key) const {
    if (!safe_key(key)) throw Error(ErrorKind::Data, "invalid cache key: " + key);
    return dir_ / (key + ".json");
}

std::optional<nlohmann::json> DiskCache::get(const std::string& key) const {
    const auto path = path_for(key);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::parse_error&) {
        // a torn entry is treated as a miss and will be rewritten
        return std::nullopt;
    }
}

void DiskCache::put(const std::string& key, const nlohmann::json& value) const {
    const auto path = path_for(key);
    const auto tmp =
        dir_ / (key + ".tmp." + std::to_string(mix64(fnv1a64(key)) & 0xffffff) + "." +
                std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write cache entry: " + tmp.string());
        out << value.dump(2) << '\n';
        if (!out) throw Error(ErrorKind::Data, "cache write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);  // atomic on POSIX
}

bool DiskCache::contains(const std::string& key) const {
    return std::filesystem::exists(path_for(key));
}

std::size_t DiskCache::size() const {
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir_))
        if (entry.is_regular_file() && entry.path().extension() == ".json") ++n;
    return n;
}

}  // namespace provsem
