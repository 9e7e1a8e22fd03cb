// SPDX-License-Identifier: Apache-2.0
#include "provsem/normalize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"
#include "provsem/rng.hpp"

namespace provsem {

using nlohmann::json;

namespace {

constexpr std::string_view kTmpfileToken = "<tmpfile>";
constexpr std::string_view kPidToken = "<pid>";
constexpr std::string_view kHashToken = "hash value";
constexpr std::string_view kNaMarker = "<NA>";

bool iends_with(std::string_view s, std::string_view suffix) {
    if (s.size() < suffix.size()) return false;
    const auto off = s.size() - suffix.size();
    for (std::size_t i = 0; i < suffix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[off + i])) !=
            std::tolower(static_cast<unsigned char>(suffix[i])))
            return false;
    return true;
}

// mkstemp-ish suffixes: a final dot-extension of 6+ alphanumerics mixing
// letters and digits (".Xk3b9Q"), which real extensions essentially never are.
bool has_random_suffix(std::string_view basename) {
    const auto dot = basename.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return false;
    const std::string_view suffix = basename.substr(dot + 1);
    if (suffix.size() < 6) return false;
    bool digit = false, alpha = false;
    for (unsigned char c : suffix) {
        if (std::isdigit(c)) digit = true;
        else if (std::isalpha(c)) alpha = true;
        else return false;
    }
    return digit && alpha;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_bare_hash(std::string_view s) {
    if (s.size() != 32 && s.size() != 40 && s.size() != 64) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isxdigit(c) != 0; });
}

std::vector<std::string> split_components(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= path.size(); ++i) {
        if (i == path.size() || path[i] == '/') {
            parts.emplace_back(path.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

std::string join_components(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += '/';
        out += parts[i];
    }
    return out;
}

}  // namespace

std::string normalize_path(std::string_view path) {
    return normalize_path(path, NormalizeOptions{});
}

std::string normalize_path(std::string_view path, const NormalizeOptions& options) {
    if (path.empty()) return std::string(path);
    auto parts = split_components(path);

    // (a) temp-file basename
    if (!parts.empty()) {
        std::string& base = parts.back();
        if (!base.empty()) {
            bool tmp = has_random_suffix(base);
            for (const auto& ext : options.temp_extensions)
                if (iends_with(base, ext)) { tmp = true; break; }
            if (tmp) base = kTmpfileToken;
        }
    }

    // (b) PID components under /proc
    if (parts.size() >= 2 && parts[0].empty() && parts[1] == "proc") {
        for (std::size_t i = 2; i < parts.size(); ++i)
            if (all_digits(parts[i])) parts[i] = kPidToken;
    }

    // (c) hash-like components anywhere
    for (auto& p : parts)
        if (is_bare_hash(p)) p = kHashToken;

    return join_components(parts);
}

nlohmann::json retained_fields_json(const NormalizedEvent& e) {
    json j;
    j["proc_name"] = e.proc_name;
    j["type"] = e.syscall_type;
    j["user_name"] = e.user_name;
    j["user_shell"] = e.user_shell;
    if (e.fd_filename) j["fd_filename"] = *e.fd_filename;
    if (e.evt_args) j["evt_args"] = *e.evt_args;
    if (e.net_type) j["net_type"] = *e.net_type;
    if (e.client_ip) j["client_ip"] = *e.client_ip;
    if (e.server_ip) j["server_ip"] = *e.server_ip;
    if (e.server_port) j["server_port"] = *e.server_port;
    return j;
}

NormalizedEvent to_normalized_event(const RawEvent& e) {
    return to_normalized_event(e, NormalizeOptions{});
}

NormalizedEvent to_normalized_event(const RawEvent& e, const NormalizeOptions& options) {
    NormalizedEvent n;
    n.event_class = classify_event(e);
    n.proc_name = e.proc_name;
    n.syscall_type = e.syscall_type;
    n.user_name = e.user_name;
    n.user_shell = e.user_shell;
    n.scenario_id = e.scenario_id;

    switch (n.event_class) {
        case EventClass::FileEvent:
            n.fd_filename = normalize_path(*e.fd_filename, options);
            break;
        case EventClass::ProcessEvent:
            if (e.evt_args) n.evt_args = *e.evt_args;
            // the explicit marker passes through; real paths do not belong here
            if (e.fd_filename && *e.fd_filename == kNaMarker) n.fd_filename = *e.fd_filename;
            break;
        case EventClass::NetworkEvent:
            if (e.net_type) n.net_type = *e.net_type;
            if (e.client_ip) n.client_ip = *e.client_ip;
            if (e.server_ip) n.server_ip = *e.server_ip;
            if (e.server_port) n.server_port = *e.server_port;
            break;
        case EventClass::OtherEvent:
            if (e.fd_filename && *e.fd_filename == kNaMarker) n.fd_filename = *e.fd_filename;
            break;
    }

    n.canonical_key = retained_fields_json(n).dump();
    return n;
}

namespace {

std::vector<NormalizedEvent> dedup_by_key(const std::vector<NormalizedEvent>& events) {
    std::vector<NormalizedEvent> out;
    std::unordered_set<std::string> seen;
    out.reserve(events.size());
    for (const auto& e : events)
        if (seen.insert(e.canonical_key).second) out.push_back(e);
    return out;
}

}  // namespace

LabeledEventSet dedup_and_filter(const std::vector<NormalizedEvent>& benign,
                                 const std::vector<NormalizedEvent>& adversary,
                                 std::optional<std::size_t> benign_sample,
                                 std::uint64_t seed) {
    auto benign_unique = dedup_by_key(benign);
    auto adversary_unique = dedup_by_key(adversary);

    std::unordered_set<std::string> benign_keys;
    for (const auto& e : benign_unique) benign_keys.insert(e.canonical_key);

    std::erase_if(adversary_unique, [&](const NormalizedEvent& e) {
        return benign_keys.contains(e.canonical_key);
    });

    if (benign_sample) {
        if (*benign_sample > benign_unique.size())
            throw Error(ErrorKind::Data,
                        "benign_sample (" + std::to_string(*benign_sample) +
                            ") exceeds unique benign pool (" +
                            std::to_string(benign_unique.size()) + ")");
        if (*benign_sample < benign_unique.size()) {
            Rng rng(seed);
            auto idx = rng.sample_without_replacement(benign_unique.size(), *benign_sample);
            std::sort(idx.begin(), idx.end());  // keep original relative order
            std::vector<NormalizedEvent> sampled;
            sampled.reserve(idx.size());
            for (auto i : idx) sampled.push_back(std::move(benign_unique[i]));
            benign_unique = std::move(sampled);
        }
    }

    LabeledEventSet set;
    set.events.reserve(benign_unique.size() + adversary_unique.size());
    for (auto& e : benign_unique) {
        set.scenario_ids.push_back(e.scenario_id.value_or(""));
        set.labels.push_back(Label::Benign);
        set.events.push_back(std::move(e));
    }
    for (auto& e : adversary_unique) {
        set.scenario_ids.push_back(e.scenario_id.value_or(""));
        set.labels.push_back(Label::Adversary);
        set.events.push_back(std::move(e));
    }
    return set;
}

namespace {

NormalizedEvent normalized_from_fields(const json& fields, EventClass cls) {
    NormalizedEvent n;
    n.event_class = cls;
    n.proc_name = fields.at("proc_name").get<std::string>();
    n.syscall_type = fields.at("type").get<std::string>();
    n.user_name = fields.value("user_name", "");
    n.user_shell = fields.value("user_shell", "");
    if (fields.contains("fd_filename")) n.fd_filename = fields["fd_filename"].get<std::string>();
    if (fields.contains("evt_args")) n.evt_args = fields["evt_args"].get<std::string>();
    if (fields.contains("net_type")) n.net_type = fields["net_type"].get<std::string>();
    if (fields.contains("client_ip")) n.client_ip = fields["client_ip"].get<std::string>();
    if (fields.contains("server_ip")) n.server_ip = fields["server_ip"].get<std::string>();
    if (fields.contains("server_port")) n.server_port = fields["server_port"].get<int>();
    n.canonical_key = retained_fields_json(n).dump();
    return n;
}

EventClass event_class_from_string(std::string_view s) {
    if (s == "file") return EventClass::FileEvent;
    if (s == "process") return EventClass::ProcessEvent;
    if (s == "network") return EventClass::NetworkEvent;
    return EventClass::OtherEvent;
}

}  // namespace

void save_labeled_set(const LabeledEventSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write labeled set: " + path.string());
    for (std::size_t i = 0; i < set.events.size(); ++i) {
        const auto& e = set.events[i];
        json row;
        row["fields"] = retained_fields_json(e);
        row["event_class"] = to_string(e.event_class);
        row["canonical_key"] = e.canonical_key;
        row["label"] = to_string(set.labels[i]);
        if (!set.scenario_ids[i].empty()) row["scenario_id"] = set.scenario_ids[i];
        out << row.dump() << '\n';
    }
    if (!out) throw Error(ErrorKind::Data, "write failed: " + path.string());
}

LabeledEventSet load_labeled_set(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Data, "cannot read labeled set: " + path.string());
    LabeledEventSet set;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json row;
        try {
            row = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("labeled set line " + std::to_string(lineno) + ": " + e.what(),
                             e.byte);
        }
        auto n = normalized_from_fields(row.at("fields"),
                                        event_class_from_string(
                                            row.at("event_class").get<std::string>()));
        const auto stored_key = row.at("canonical_key").get<std::string>();
        if (stored_key != n.canonical_key)
            throw Error(ErrorKind::Data, "labeled set line " + std::to_string(lineno) +
                                             ": canonical key mismatch");
        auto label = label_from_string(row.at("label").get<std::string>());
        if (!label || *label == Label::Unlabeled)
            throw Error(ErrorKind::Data, "labeled set line " + std::to_string(lineno) +
                                             ": label must be benign or adversary");
        if (row.contains("scenario_id")) n.scenario_id = row["scenario_id"].get<std::string>();
        set.scenario_ids.push_back(n.scenario_id.value_or(""));
        set.labels.push_back(*label);
        set.events.push_back(std::move(n));
    }
    return set;
}

}  // namespace provsem
