// SPDX-License-Identifier: Apache-2.0
#include "provsem/augment.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"
#include "provsem/hash.hpp"

namespace provsem {

using nlohmann::json;

PromptRequest build_prompt(const NormalizedEvent& e, const std::string& model_id) {
    PromptRequest req;
    req.system_text = std::string(kSystemInstruction);
    req.user_text = retained_fields_json(e).dump();
    req.model_id = model_id;
    json key_material;
    key_material["model"] = req.model_id;
    key_material["system"] = req.system_text;
    key_material["user"] = req.user_text;
    req.request_key = sha256_hex(key_material.dump());
    return req;
}

Explanation explain_event(const PromptRequest& req, ChatProvider& provider,
                          const DiskCache& cache) {
    Explanation out;
    out.event_key = req.user_text;
    out.model_id = req.model_id;
    out.provider = ExplanationProvider::Remote;

    if (auto hit = cache.get(req.request_key)) {
        out.text = hit->at("response").at("text").get<std::string>();
        out.cached = true;
        return out;
    }

    std::string text;
    try {
        text = provider.chat(req.system_text, req.user_text, req.model_id);
    } catch (const ProviderError& e) {
        throw ProviderError(std::string(e.what()) + " (request " + req.request_key + ")",
                            req.request_key);
    }
    if (text.empty())
        throw ProviderError("provider returned an empty explanation (request " +
                                req.request_key + ")",
                            req.request_key);

    json entry;
    entry["request"] = {{"model", req.model_id},
                        {"system", req.system_text},
                        {"user", req.user_text}};
    entry["response"] = {{"text", text}};
    cache.put(req.request_key, entry);

    out.text = std::move(text);
    out.cached = false;
    return out;
}

std::vector<Explanation> explain_events(const std::vector<PromptRequest>& requests,
                                        ChatProvider& provider, const DiskCache& cache,
                                        std::size_t max_in_flight) {
    std::vector<Explanation> out(requests.size());
    if (requests.empty()) return out;
    const std::size_t workers = std::max<std::size_t>(1, std::min(max_in_flight, requests.size()));

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                out[i] = explain_event(requests[i], provider, cache);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

namespace {

// Compact knowledge tables for the offline explainer. Descriptions follow the
// common man-page phrasing; coverage targets the events seen in provenance
// exports rather than the full syscall surface.
const std::map<std::string, std::string, std::less<>>& syscall_table() {
    static const std::map<std::string, std::string, std::less<>> table = {
        {"read", "reads data from a file descriptor"},
        {"write", "writes data to a file descriptor"},
        {"open", "opens a file or directory"},
        {"openat", "opens a file or directory relative to a directory descriptor"},
        {"close", "closes a file descriptor"},
        {"stat", "retrieves file status information"},
        {"fstat", "retrieves status information through an open descriptor"},
        {"lstat", "retrieves status information without following symbolic links"},
        {"lseek", "repositions the offset of an open file"},
        {"execve", "executes a new program, replacing the current process image"},
        {"execveat", "executes a program relative to a directory descriptor"},
        {"clone", "creates a new process or thread"},
        {"clone3", "creates a new process or thread"},
        {"fork", "creates a child process"},
        {"vfork", "creates a child process that shares the parent's address space"},
        {"exit", "terminates the calling process"},
        {"mmap", "maps files or anonymous memory into the address space"},
        {"munmap", "removes a memory mapping"},
        {"mprotect", "changes the access protections of a region of memory"},
        {"brk", "adjusts the end of the process data segment"},
        {"recvfrom", "receives data from a network socket"},
        {"sendto", "sends data over a network socket"},
        {"recvmsg", "receives a message from a socket"},
        {"sendmsg", "sends a message over a socket"},
        {"connect", "initiates a connection on a socket"},
        {"accept", "accepts an incoming connection on a listening socket"},
        {"accept4", "accepts an incoming connection on a listening socket"},
        {"socket", "creates a communication endpoint"},
        {"bind", "binds a socket to a local address"},
        {"listen", "marks a socket as accepting connections"},
        {"shutdown", "shuts down part of a socket connection"},
        {"chmod", "changes file permission bits"},
        {"chown", "changes file ownership"},
        {"unlink", "removes a directory entry"},
        {"unlinkat", "removes a directory entry relative to a directory descriptor"},
        {"rename", "renames a file or directory"},
        {"mkdir", "creates a directory"},
        {"rmdir", "removes a directory"},
        {"ioctl", "issues a device-specific control request"},
        {"fcntl", "manipulates an open file descriptor"},
        {"dup", "duplicates a file descriptor"},
        {"dup2", "duplicates a file descriptor onto a chosen number"},
        {"pipe", "creates a unidirectional data channel"},
        {"kill", "sends a signal to a process"},
        {"ptrace", "observes and controls another process"},
        {"setuid", "sets the user identity of the process"},
        {"getdents", "reads directory entries"},
        {"getdents64", "reads directory entries"},
    };
    return table;
}

const std::map<std::string, std::string, std::less<>>& process_table() {
    static const std::map<std::string, std::string, std::less<>> table = {
        {"crond", "a daemon used to execute scheduled commands"},
        {"cron", "a daemon used to execute scheduled commands"},
        {"sshd", "the OpenSSH server daemon handling remote logins"},
        {"systemd", "the system and service manager"},
        {"rsyslogd", "the system logging daemon"},
        {"journald", "the systemd journal logging service"},
        {"bash", "the GNU Bourne-Again shell"},
        {"sh", "a shell command line interpreter"},
        {"zsh", "an extended Bourne-style shell"},
        {"vim", "a text editor"},
        {"nano", "a simple terminal text editor"},
        {"screen", "a terminal multiplexer that manages multiple sessions"},
        {"tmux", "a terminal multiplexer"},
        {"ls", "a utility that lists directory contents"},
        {"grep", "a utility that searches text for patterns"},
        {"cat", "a utility that concatenates and prints files"},
        {"echo", "a utility that writes its arguments to standard output"},
        {"touch", "a utility that updates file timestamps or creates empty files"},
        {"tar", "an archiving utility"},
        {"gzip", "a compression utility"},
        {"curl", "a tool for transferring data with URLs"},
        {"wget", "a non-interactive network downloader"},
        {"nc", "a networking utility that reads and writes across connections"},
        {"ncat", "a networking utility that reads and writes across connections"},
        {"useradd", "a utility that creates new user accounts"},
        {"dhclient", "a DHCP client used to obtain IP addresses and network configuration"},
        {"nginx", "a web server and reverse proxy"},
        {"httpd", "the Apache HTTP server"},
        {"apache2", "the Apache HTTP server"},
        {"mysqld", "the MySQL database server"},
        {"redis-server", "the Redis in-memory data store server"},
        {"docker-containe", "a Docker container runtime component"},
        {"containerd", "a container runtime daemon"},
        {"runc", "a CLI for spawning containers per the OCI specification"},
        {"java", "the Java virtual machine launcher"},
        {"python", "the Python language interpreter"},
        {"python3", "the Python language interpreter"},
        {"php", "the PHP language interpreter"},
        {"node", "the Node.js JavaScript runtime"},
    };
    return table;
}

const std::map<std::string, std::string, std::less<>>& known_path_table() {
    static const std::map<std::string, std::string, std::less<>> table = {
        {"/etc/localtime", "the system timezone configuration"},
        {"LC_TIME", "locale settings for time formatting"},
        {"/etc/passwd", "the local user account database"},
        {"/etc/shadow", "the protected password database"},
        {"/etc/hosts", "the static hostname table"},
        {"/etc/resolv.conf", "the DNS resolver configuration"},
        {"/etc/group", "the local group database"},
        {"/etc/ld.so.cache", "the shared library lookup cache"},
        {"/dev/null", "the discard device"},
        {"/dev/urandom", "the kernel random number source"},
    };
    return table;
}

bool restricted_shell(std::string_view shell) {
    return shell == "/usr/sbin/nologin" || shell == "/sbin/nologin" || shell == "/bin/false";
}

bool memory_permission_syscall(std::string_view type) {
    return type == "mprotect" || type == "mmap" || type == "ptrace";
}

std::string describe_target(const std::string& path) {
    const auto& known = known_path_table();
    if (auto it = known.find(path); it != known.end()) return it->second;
    const auto slash = path.rfind('/');
    const std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    if (auto it = known.find(base); it != known.end()) return it->second;
    return "";
}

}  // namespace

Explanation template_explain(const NormalizedEvent& e) {
    std::string text;

    // knowledge of the system call
    text += "This event is of type " + e.syscall_type;
    const auto& syscalls = syscall_table();
    if (auto it = syscalls.find(e.syscall_type); it != syscalls.end())
        text += ", a system call that " + it->second;
    text += ".";

    // knowledge of software identity
    const auto& procs = process_table();
    text += " The process involved is " + e.proc_name + ", ";
    if (auto it = procs.find(e.proc_name); it != procs.end())
        text += it->second + ".";
    else
        text += "an application named " + e.proc_name + ".";

    if (!e.user_name.empty()) {
        text += " It was initiated by the user " + e.user_name;
        if (!e.user_shell.empty()) text += " whose shell is " + e.user_shell;
        text += ".";
    } else if (!e.user_shell.empty()) {
        text += " The associated shell is " + e.user_shell + ".";
    }

    // application execution context per event class
    switch (e.event_class) {
        case EventClass::FileEvent: {
            const std::string& path = *e.fd_filename;
            text += " The file involved is " + path;
            const std::string target = describe_target(path);
            if (!target.empty())
                text += ", which holds " + target +
                        ", so this access is likely reading or adjusting that configuration.";
            else
                text += ", indicating routine file access as part of the program's operation.";
            break;
        }
        case EventClass::ProcessEvent: {
            if (e.evt_args && !e.evt_args->empty() && *e.evt_args != "<NA>")
                text += " The specific command executed is " + *e.evt_args +
                        ", which suggests the initiation of a program or script execution.";
            else
                text += " A new program image is being started by this process.";
            break;
        }
        case EventClass::NetworkEvent: {
            text += " This is network activity";
            if (e.net_type) text += " over an " + *e.net_type + " connection";
            if (e.server_ip) text += " with server address " + *e.server_ip;
            if (e.server_port) {
                text += " on port " + std::to_string(*e.server_port);
                if (*e.server_port == 67 || *e.server_port == 68)
                    text += ", the standard port for DHCP server communications";
                else if (*e.server_port == 22)
                    text += ", the standard port for SSH";
                else if (*e.server_port == 80 || *e.server_port == 443)
                    text += ", a standard web service port";
            }
            if (e.client_ip) text += ", client address " + *e.client_ip;
            text += ", so the process is exchanging data with a remote endpoint.";
            break;
        }
        case EventClass::OtherEvent: {
            if (e.fd_filename && *e.fd_filename == "<NA>")
                text += " The absence of a specific file descriptor suggests this operation is "
                        "not directly associated with a file.";
            else
                text += " This is an auxiliary operation within the process lifecycle.";
            break;
        }
    }

    // possible suspiciousness
    std::string suspicion;
    if (memory_permission_syscall(e.syscall_type))
        suspicion += " Changing memory permissions can be indicative of a process attempting to "
                     "modify its own code or load injected payloads.";
    if (restricted_shell(e.user_shell))
        suspicion += " The restricted shell " + e.user_shell +
                     " indicates a service account with limited direct user interaction, so "
                     "unexpected activity from it is potentially suspicious and worth attention.";
    text += suspicion;

    Explanation out;
    out.event_key = e.canonical_key;
    out.text = std::move(text);
    out.provider = ExplanationProvider::Template;
    out.model_id = "template";
    out.cached = false;
    return out;
}

std::size_t seed_cache_from_fixture(const std::filesystem::path& fixture_path,
                                    const DiskCache& cache) {
    std::ifstream in(fixture_path);
    if (!in) throw Error(ErrorKind::Config, "cannot read fixtures: " + fixture_path.string());
    json fixtures;
    try {
        in >> fixtures;
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config,
                    "invalid fixtures file " + fixture_path.string() + ": " + e.what());
    }
    if (!fixtures.is_array())
        throw Error(ErrorKind::Config, "fixtures file must hold a JSON array");

    std::size_t stored = 0;
    for (const auto& item : fixtures) {
        const RawEvent raw = parse_event_record(item.at("event").dump());
        const NormalizedEvent norm = to_normalized_event(raw);
        const PromptRequest req = build_prompt(norm, item.at("model").get<std::string>());
        json entry;
        entry["request"] = {{"model", req.model_id},
                            {"system", req.system_text},
                            {"user", req.user_text}};
        entry["response"] = {{"text", item.at("response").get<std::string>()}};
        cache.put(req.request_key, entry);
        ++stored;
    }
    return stored;
}

}  // namespace provsem
