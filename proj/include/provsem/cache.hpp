// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace provsem {

// Content-addressed on-disk store: one JSON file per key. Writes go through a
// temp file followed by rename, so concurrent misses on the same key leave one
// complete value (last writer wins; values for a key are expected identical).
class DiskCache {
public:
    explicit DiskCache(std::filesystem::path dir);

    std::optional<nlohmann::json> get(const std::string& key) const;
    void put(const std::string& key, const nlohmann::json& value) const;
    bool contains(const std::string& key) const;
    std::size_t size() const;  // number of stored entries

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path dir_;
};

}  // namespace provsem
