// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "path_fixtures.hpp"
#include "provsem/error.hpp"
#include "provsem/normalize.hpp"
#include "provsem/rng.hpp"

using namespace provsem;

namespace {

NormalizedEvent norm_of(const std::string& json_line) {
    return to_normalized_event(parse_event_record(json_line));
}

std::size_t count_separators(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '/'));
}

}  // namespace

TEST_CASE("normalize_path golden fixtures are bit-exact") {
    for (const auto& [input, expected] : provsem::testing::path_fixtures()) {
        CAPTURE(input);
        CHECK(normalize_path(input) == expected);
    }
}

TEST_CASE("normalize_path is idempotent over random paths") {
    Rng rng(31337);
    for (int i = 0; i < 10000; ++i) {
        const std::string path = provsem::testing::random_path(rng);
        const std::string once = normalize_path(path);
        CAPTURE(path);
        CHECK(normalize_path(once) == once);
    }
}

TEST_CASE("normalize_path preserves the separator count") {
    Rng rng(777);
    for (int i = 0; i < 2000; ++i) {
        const std::string path = provsem::testing::random_path(rng);
        CAPTURE(path);
        CHECK(count_separators(normalize_path(path)) == count_separators(path));
    }
}

TEST_CASE("normalize_path honors a custom temp extension list") {
    NormalizeOptions options;
    options.temp_extensions = {".bak"};
    CHECK(normalize_path("/a/b.bak", options) == "/a/<tmpfile>");
    CHECK(normalize_path("/a/b.tmp", options) == "/a/b.tmp");
}

TEST_CASE("to_normalized_event keeps the per-class field subsets") {
    SUBCASE("process event") {
        const auto n = norm_of(
            R"({"proc_name":"crond","type":"execve","fd_filename":"<NA>","user_name":"root","user_shell":"/bin/bash","evt_args":"sh"})");
        CHECK(n.event_class == EventClass::ProcessEvent);
        CHECK(n.proc_name == "crond");
        CHECK(n.evt_args == "sh");
        CHECK(n.fd_filename == "<NA>");  // the explicit marker passes through
        CHECK_FALSE(n.net_type.has_value());
        CHECK_FALSE(n.server_port.has_value());
    }
    SUBCASE("file event composes with normalize_path") {
        const auto n = norm_of(
            R"({"proc_name":"cat","type":"openat","fd_filename":"/proc/42/maps","user_name":"root","user_shell":"/bin/bash"})");
        CHECK(n.event_class == EventClass::FileEvent);
        CHECK(n.fd_filename == "/proc/<pid>/maps");
        CHECK_FALSE(n.evt_args.has_value());
    }
    SUBCASE("network event retains network fields and drops fd fields") {
        const auto n = norm_of(
            R"({"proc_name":"dhclient","type":"recvfrom","fd_filename":"<NA>","user_name":"root","user_shell":"/bin/bash","net_type":"ipv4","client_ip":"IP2","server_ip":"IP1","server_port":67})");
        CHECK(n.event_class == EventClass::NetworkEvent);
        CHECK(n.net_type == "ipv4");
        CHECK(n.client_ip == "IP2");
        CHECK(n.server_ip == "IP1");
        CHECK(n.server_port == 67);
        CHECK_FALSE(n.fd_filename.has_value());
        CHECK_FALSE(n.evt_args.has_value());
    }
    SUBCASE("process event drops a real path in the fd slot") {
        const auto n = norm_of(
            R"({"proc_name":"sh","type":"execve","fd_filename":"/usr/bin/ls","user_name":"root","user_shell":"/bin/bash"})");
        CHECK(n.event_class == EventClass::ProcessEvent);
        CHECK_FALSE(n.fd_filename.has_value());
    }
}

TEST_CASE("canonical_key is a pure function of the retained fields") {
    const auto a = norm_of(
        R"({"proc_name":"vim","type":"read","fd_filename":"/etc/localtime","user_name":"root","user_shell":"/bin/bash"})");
    const auto b = norm_of(
        R"({"user_shell":"/bin/bash","fd_filename":"/etc/localtime","type":"read","user_name":"root","proc_name":"vim"})");
    CHECK(a.canonical_key == b.canonical_key);  // field order in the source is irrelevant

    // scenario metadata does not affect the key
    const auto c = norm_of(
        R"({"proc_name":"vim","type":"read","fd_filename":"/etc/localtime","user_name":"root","user_shell":"/bin/bash","scenario_id":"CVE-2021-44228"})");
    CHECK(c.canonical_key == a.canonical_key);
    CHECK(c.scenario_id == "CVE-2021-44228");

    // no whitespace between tokens, keys sorted
    CHECK(a.canonical_key.find("\"fd_filename\"") < a.canonical_key.find("\"proc_name\""));
    CHECK(a.canonical_key.find("\": ") == std::string::npos);
}

TEST_CASE("normalization of an already-normalized path is a fixed point") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        std::string raw = provsem::testing::random_path(rng);
        if (raw.empty()) continue;
        RawEvent e;
        e.proc_name = "p";
        e.syscall_type = "openat";
        e.fd_filename = raw;
        const auto once = to_normalized_event(e);
        RawEvent again;
        again.proc_name = "p";
        again.syscall_type = "openat";
        again.fd_filename = once.fd_filename;
        const auto twice = to_normalized_event(again);
        CHECK(once.fd_filename == twice.fd_filename);
        CHECK(once.canonical_key == twice.canonical_key);
    }
}

namespace {

NormalizedEvent file_event(const std::string& proc, const std::string& path) {
    RawEvent e;
    e.proc_name = proc;
    e.syscall_type = "openat";
    e.fd_filename = path;
    e.user_name = "root";
    e.user_shell = "/bin/bash";
    return to_normalized_event(e);
}

}  // namespace

TEST_CASE("dedup_and_filter removes benign/adversary overlap") {
    const auto a = file_event("p", "/a");
    const auto b = file_event("p", "/b");
    const auto c = file_event("p", "/c");
    const LabeledEventSet set = dedup_and_filter({b, c}, {a, b}, std::nullopt, 1);
    REQUIRE(set.size() == 3);
    std::size_t adversary = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (set.labels[i] == Label::Adversary) {
            ++adversary;
            CHECK(set.events[i].canonical_key == a.canonical_key);  // only A survives
        }
    }
    CHECK(adversary == 1);
}

TEST_CASE("dedup_and_filter collapses duplicate keys") {
    const auto a = file_event("p", "/a");
    const LabeledEventSet set = dedup_and_filter({}, {a, a, a}, std::nullopt, 1);
    CHECK(set.size() == 1);
}

TEST_CASE("dedup_and_filter output keys are disjoint between labels and unique") {
    Rng rng(11);
    std::vector<NormalizedEvent> benign, adversary;
    for (int i = 0; i < 60; ++i)
        benign.push_back(file_event("b", "/pool/" + std::to_string(rng.bounded(30))));
    for (int i = 0; i < 60; ++i)
        adversary.push_back(file_event("b", "/pool/" + std::to_string(rng.bounded(45))));
    const LabeledEventSet set = dedup_and_filter(benign, adversary, std::nullopt, 3);
    std::set<std::string> benign_keys, adversary_keys;
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto& dst = set.labels[i] == Label::Benign ? benign_keys : adversary_keys;
        CHECK(dst.insert(set.events[i].canonical_key).second);  // unique within label
    }
    for (const auto& k : adversary_keys) CHECK_FALSE(benign_keys.contains(k));
}

TEST_CASE("dedup_and_filter sampling is deterministic and validates its size") {
    std::vector<NormalizedEvent> benign;
    for (int i = 0; i < 10; ++i) benign.push_back(file_event("p", "/f" + std::to_string(i)));
    const auto adv = file_event("q", "/adv");

    const LabeledEventSet first = dedup_and_filter(benign, {adv}, 4, 99);
    const LabeledEventSet second = dedup_and_filter(benign, {adv}, 4, 99);
    REQUIRE(first.size() == 5);  // 4 benign + 1 adversary
    for (std::size_t i = 0; i < first.size(); ++i)
        CHECK(first.events[i].canonical_key == second.events[i].canonical_key);

    const LabeledEventSet other_seed = dedup_and_filter(benign, {adv}, 4, 100);
    bool any_difference = false;
    for (std::size_t i = 0; i < other_seed.size(); ++i)
        if (other_seed.events[i].canonical_key != first.events[i].canonical_key)
            any_difference = true;
    CHECK(any_difference);  // different seed draws a different sample

    CHECK_THROWS_AS(dedup_and_filter(benign, {adv}, 11, 1), Error);
}

TEST_CASE("labeled set JSONL round-trips") {
    std::vector<NormalizedEvent> benign, adversary;
    for (int i = 0; i < 5; ++i) benign.push_back(file_event("b", "/b" + std::to_string(i)));
    RawEvent raw;
    raw.proc_name = "nc";
    raw.syscall_type = "connect";
    raw.net_type = "ipv4";
    raw.server_ip = "203.0.113.9";
    raw.server_port = 4444;
    raw.scenario_id = "CVE-2021-44228";
    raw.label = Label::Adversary;
    adversary.push_back(to_normalized_event(raw));

    const LabeledEventSet set = dedup_and_filter(benign, adversary, std::nullopt, 1);
    const auto path = std::filesystem::temp_directory_path() / "provsem_labeled.jsonl";
    save_labeled_set(set, path);
    const LabeledEventSet back = load_labeled_set(path);
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(back.events[i].canonical_key == set.events[i].canonical_key);
        CHECK(back.labels[i] == set.labels[i]);
        CHECK(back.scenario_ids[i] == set.scenario_ids[i]);
        CHECK(back.events[i].event_class == set.events[i].event_class);
    }
}
