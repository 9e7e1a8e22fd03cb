// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "provsem/event.hpp"

namespace provsem {

// Seeded generator for a two-population event corpus with disjoint
// process/syscall vocabularies. Adversary events are spread over scenario ids
// with scenario-flavored process names so holdout experiments keep enough
// unique events per scenario.
struct SynthOptions {
    std::size_t n_benign = 1000;
    std::size_t n_adversary = 1000;
    int n_scenarios = 5;
    std::uint64_t seed = 1234;
};

std::vector<RawEvent> make_synthetic_corpus(const SynthOptions& options);

void write_corpus_jsonl(const std::vector<RawEvent>& events,
                        const std::filesystem::path& path);

}  // namespace provsem
