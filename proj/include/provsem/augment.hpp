// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "provsem/cache.hpp"
#include "provsem/normalize.hpp"
#include "provsem/provider.hpp"

namespace provsem {

// Fixed instruction sent as the "system" role for every explanation request.
inline constexpr std::string_view kSystemInstruction =
    "here is a json object where the keys are sysdig event fields and the values are "
    "the data for the corresponding keys. Please generate only the final summary of "
    "the meaning of this event and the event type as a paragraph";

struct PromptRequest {
    std::string system_text;
    std::string user_text;   // canonical JSON of the event's retained fields
    std::string model_id;
    std::string request_key;  // content hash of (system_text, user_text, model_id)
};

enum class ExplanationProvider { Remote, Template };

struct Explanation {
    std::string event_key;  // canonical key of the explained event
    std::string text;       // one paragraph, non-empty
    ExplanationProvider provider = ExplanationProvider::Template;
    std::string model_id;
    bool cached = false;
};

PromptRequest build_prompt(const NormalizedEvent& e, const std::string& model_id);

// Cache-first single-event explanation. On a miss, issues exactly one provider
// call and stores the response under request_key before returning.
Explanation explain_event(const PromptRequest& req, ChatProvider& provider,
                          const DiskCache& cache);

// Batch variant with bounded concurrent in-flight requests. Output order
// matches input order.
std::vector<Explanation> explain_events(const std::vector<PromptRequest>& requests,
                                        ChatProvider& provider, const DiskCache& cache,
                                        std::size_t max_in_flight = 8);

// Deterministic offline explainer: assembles a paragraph from a system-call
// description table, a process-identity table, a class-specific context
// sentence, and rule-triggered suspiciousness remarks.
Explanation template_explain(const NormalizedEvent& e);

// Seeds the cache from a fixtures file: a JSON array of
// {"event": {...raw event...}, "model": "...", "response": "..."} entries.
// Returns the number of entries stored.
std::size_t seed_cache_from_fixture(const std::filesystem::path& fixture_path,
                                    const DiskCache& cache);

}  // namespace provsem
