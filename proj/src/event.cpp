// SPDX-License-Identifier: Apache-2.0
#include "provsem/event.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"

namespace provsem {

using nlohmann::json;

const char* to_string(EventClass c) {
    switch (c) {
        case EventClass::FileEvent: return "file";
        case EventClass::ProcessEvent: return "process";
        case EventClass::NetworkEvent: return "network";
        case EventClass::OtherEvent: return "other";
    }
    return "other";
}

const char* to_string(Label l) {
    switch (l) {
        case Label::Benign: return "benign";
        case Label::Adversary: return "adversary";
        case Label::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::optional<Label> label_from_string(std::string_view s) {
    if (s == "benign") return Label::Benign;
    if (s == "adversary") return Label::Adversary;
    if (s == "unlabeled") return Label::Unlabeled;
    return std::nullopt;
}

namespace {

const std::set<std::string, std::less<>> kKnownFields = {
    "proc_name", "type",      "fd_filename", "user_name",   "user_shell", "evt_args",
    "net_type",  "client_ip", "server_ip",   "server_port", "scenario_id", "label"};

std::optional<std::string> opt_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string())
        throw SchemaError(std::string("field '") + key + "' must be a string", key);
    return it->get<std::string>();
}

// Syscall families the classifier recognizes. The shipped table is a
// maintained configuration covering the common sysdig event names; it is not
// exhaustive across kernels.
bool is_process_syscall(std::string_view t) {
    static const std::set<std::string, std::less<>> s = {"execve", "execveat", "clone",
                                                         "clone3", "fork",     "vfork"};
    return s.contains(t);
}

bool is_network_syscall(std::string_view t) {
    static const std::set<std::string, std::less<>> s = {
        "recvfrom", "sendto",  "connect",    "accept",      "accept4", "recvmsg",
        "sendmsg",  "socket",  "bind",       "listen",      "shutdown", "getsockname",
        "getpeername", "setsockopt", "getsockopt"};
    return s.contains(t);
}

}  // namespace

RawEvent parse_event_record(std::string_view line, std::size_t* unknown_fields) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                         e.byte);
    }
    if (!j.is_object()) throw ParseError("event record must be a JSON object", 0);

    if (unknown_fields) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!kKnownFields.contains(it.key())) ++*unknown_fields;
    }

    RawEvent e;
    auto proc = opt_string(j, "proc_name");
    if (!proc || proc->empty())
        throw SchemaError("missing or empty required field 'proc_name'", "proc_name");
    e.proc_name = *proc;
    auto type = opt_string(j, "type");
    if (!type || type->empty())
        throw SchemaError("missing or empty required field 'type'", "type");
    e.syscall_type = *type;

    e.fd_filename = opt_string(j, "fd_filename");
    e.user_name = opt_string(j, "user_name").value_or("");
    e.user_shell = opt_string(j, "user_shell").value_or("");
    e.evt_args = opt_string(j, "evt_args");
    e.net_type = opt_string(j, "net_type");
    e.client_ip = opt_string(j, "client_ip");
    e.server_ip = opt_string(j, "server_ip");

    if (auto it = j.find("server_port"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer())
            throw SchemaError("field 'server_port' must be an integer", "server_port");
        const auto port = it->get<long long>();
        if (port < 0 || port > 65535)
            throw SchemaError("field 'server_port' out of range [0, 65535]", "server_port");
        e.server_port = static_cast<int>(port);
    }

    e.scenario_id = opt_string(j, "scenario_id");

    if (auto lab = opt_string(j, "label")) {
        auto parsed = label_from_string(*lab);
        if (!parsed) throw SchemaError("unrecognized label value '" + *lab + "'", "label");
        e.label = *parsed;
    }
    return e;
}

std::string serialize_event(const RawEvent& e) {
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
    if (e.scenario_id) j["scenario_id"] = *e.scenario_id;
    if (e.label) j["label"] = to_string(*e.label);
    return j.dump();
}

EventClass classify_event(const RawEvent& e) {
    if (is_process_syscall(e.syscall_type)) return EventClass::ProcessEvent;
    const bool has_network_fields =
        e.net_type.has_value() || e.client_ip.has_value() || e.server_ip.has_value() ||
        e.server_port.has_value();
    if (is_network_syscall(e.syscall_type) || has_network_fields)
        return EventClass::NetworkEvent;
    if (e.fd_filename && !e.fd_filename->empty() && *e.fd_filename != "<NA>")
        return EventClass::FileEvent;
    return EventClass::OtherEvent;
}

EventCorpus load_corpus(const std::filesystem::path& path, double max_bad_line_fraction) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Data, "cannot read corpus: " + path.string());

    std::vector<std::string> lines;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        lines.push_back(line);
        line_numbers.push_back(lineno);
    }

    const std::size_t n = lines.size();
    std::vector<RawEvent> parsed(n);
    std::vector<std::string> errors(n);
    std::vector<char> ok(n, 0);
    std::vector<std::size_t> unknown_counts(n, 0);

#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        try {
            parsed[i] = parse_event_record(lines[i], &unknown_counts[i]);
            ok[i] = 1;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    EventCorpus corpus;
    corpus.source_path = path.string();
    std::size_t failed = 0;
    std::vector<std::string> first_failures;
    for (std::size_t i = 0; i < n; ++i) {
        corpus.ingest_stats.unknown_fields += unknown_counts[i];
        if (!ok[i]) {
            ++failed;
            if (first_failures.size() < 10)
                first_failures.push_back("line " + std::to_string(line_numbers[i]) + ": " +
                                         errors[i]);
            continue;
        }
        corpus.events.push_back(std::move(parsed[i]));
    }
    corpus.ingest_stats.failed_lines = failed;

    if (n > 0 && static_cast<double>(failed) / static_cast<double>(n) > max_bad_line_fraction) {
        std::ostringstream msg;
        msg << "ingest failed: " << failed << " of " << n << " lines malformed (>"
            << max_bad_line_fraction * 100.0 << "% tolerance) in " << path.string();
        for (const auto& f : first_failures) msg << "\n  " << f;
        throw Error(ErrorKind::Data, msg.str());
    }

    for (const auto& e : corpus.events) {
        switch (classify_event(e)) {
            case EventClass::FileEvent: ++corpus.ingest_stats.n_file; break;
            case EventClass::ProcessEvent: ++corpus.ingest_stats.n_process; break;
            case EventClass::NetworkEvent: ++corpus.ingest_stats.n_network; break;
            case EventClass::OtherEvent: ++corpus.ingest_stats.n_other; break;
        }
        if (!e.label) {
            ++corpus.ingest_stats.n_unlabeled;
        } else {
            switch (*e.label) {
                case Label::Benign: ++corpus.ingest_stats.n_benign; break;
                case Label::Adversary: ++corpus.ingest_stats.n_adversary; break;
                case Label::Unlabeled: ++corpus.ingest_stats.n_unlabeled; break;
            }
        }
    }
    return corpus;
}

}  // namespace provsem
