// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace provsem {

enum class EventClass { FileEvent, ProcessEvent, NetworkEvent, OtherEvent };
enum class Label { Benign, Adversary, Unlabeled };

const char* to_string(EventClass c);
const char* to_string(Label l);
std::optional<Label> label_from_string(std::string_view s);

// One sysdig-style system-call record as exported to JSONL. The literal
// string "<NA>" is a meaningful value (explicit not-applicable marker) and is
// never mapped to null.
struct RawEvent {
    std::string proc_name;
    std::string syscall_type;  // JSON field name: "type"
    std::optional<std::string> fd_filename;
    std::string user_name;
    std::string user_shell;
    std::optional<std::string> evt_args;
    std::optional<std::string> net_type;
    std::optional<std::string> client_ip;
    std::optional<std::string> server_ip;
    std::optional<int> server_port;  // [0, 65535]
    std::optional<std::string> scenario_id;
    std::optional<Label> label;

    bool operator==(const RawEvent&) const = default;
};

struct IngestStats {
    std::size_t n_file = 0;
    std::size_t n_process = 0;
    std::size_t n_network = 0;
    std::size_t n_other = 0;
    std::size_t n_benign = 0;
    std::size_t n_adversary = 0;
    std::size_t n_unlabeled = 0;
    std::size_t unknown_fields = 0;  // occurrences of unrecognized keys, ignored
    std::size_t failed_lines = 0;

    std::size_t total_by_class() const { return n_file + n_process + n_network + n_other; }
    std::size_t total_by_label() const { return n_benign + n_adversary + n_unlabeled; }
};

struct EventCorpus {
    std::vector<RawEvent> events;
    std::string source_path;
    IngestStats ingest_stats;
};

// Parses a single JSON object into a RawEvent. Unknown fields are ignored and
// counted through `unknown_fields` when given. Throws ParseError (with byte
// offset) on malformed JSON and SchemaError on missing/empty proc_name or
// type, a bad label value, or an out-of-range server_port.
RawEvent parse_event_record(std::string_view line, std::size_t* unknown_fields = nullptr);

// Canonical single-line JSON (sorted keys); parse_event_record round-trips it.
std::string serialize_event(const RawEvent& e);

// Total and deterministic. Precedence: Process > Network > File > Other.
EventClass classify_event(const RawEvent& e);

// Loads a JSONL corpus, preserving input order. Lines are parsed in parallel.
// Blank lines are skipped. If more than max_bad_line_fraction of the non-blank
// lines fail, throws an ingest Error listing the first 10 offenders.
EventCorpus load_corpus(const std::filesystem::path& path,
                        double max_bad_line_fraction = 0.01);

}  // namespace provsem
