// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "provsem/event.hpp"

namespace provsem {

struct NormalizeOptions {
    std::vector<std::string> temp_extensions = {".tmp", ".temp", ".swp", ".swx"};
};

// Path generalization, applied in order:
//   (a) temp-file basenames (known extensions or a trailing random-looking
//       suffix) -> "<tmpfile>", directory preserved
//   (b) all-digit components under /proc/ -> "<pid>"
//   (c) bare hex components of length 32/40/64 -> "hash value"
// Idempotent; non-matching paths are returned bit-exact.
std::string normalize_path(std::string_view path);
std::string normalize_path(std::string_view path, const NormalizeOptions& options);

// A RawEvent projected onto the field subset of its event class, with the
// path generalized. scenario_id rides along as metadata and is not part of
// the retained fields or the canonical key.
struct NormalizedEvent {
    std::string proc_name;
    std::string syscall_type;
    std::string user_name;
    std::string user_shell;
    std::optional<std::string> fd_filename;  // file events: normalized path;
                                             // elsewhere only the "<NA>" marker survives
    std::optional<std::string> evt_args;     // process events only
    std::optional<std::string> net_type;     // network events only
    std::optional<std::string> client_ip;
    std::optional<std::string> server_ip;
    std::optional<int> server_port;
    EventClass event_class = EventClass::OtherEvent;
    std::string canonical_key;  // sorted-key, no-whitespace JSON of retained fields
    std::optional<std::string> scenario_id;

    bool operator==(const NormalizedEvent&) const = default;
};

// Retained fields as a JSON object (schema field names, sorted keys).
nlohmann::json retained_fields_json(const NormalizedEvent& e);

NormalizedEvent to_normalized_event(const RawEvent& e);
NormalizedEvent to_normalized_event(const RawEvent& e, const NormalizeOptions& options);

enum class SplitTag { Train, Test };

struct LabeledEventSet {
    std::vector<NormalizedEvent> events;
    std::vector<Label> labels;               // parallel; Benign or Adversary
    std::vector<std::string> scenario_ids;   // parallel; "" when absent
    std::optional<SplitTag> split_tag;

    std::size_t size() const { return events.size(); }
};

// Deduplicates both lists by canonical_key (first occurrence wins), removes
// adversary events whose key also appears in the (full, pre-sampling) benign
// pool, and uniformly samples `benign_sample` benign events without
// replacement. nullopt keeps every unique benign event. Deterministic given
// the seed; sampled events keep their original relative order.
LabeledEventSet dedup_and_filter(const std::vector<NormalizedEvent>& benign,
                                 const std::vector<NormalizedEvent>& adversary,
                                 std::optional<std::size_t> benign_sample,
                                 std::uint64_t seed);

void save_labeled_set(const LabeledEventSet& set, const std::filesystem::path& path);
LabeledEventSet load_labeled_set(const std::filesystem::path& path);

}  // namespace provsem
