// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provsem/detect.hpp"
#include "provsem/eval.hpp"
#include "provsem/normalize.hpp"
#include "provsem/provider.hpp"

namespace provsem {

// Versioned pipeline configuration. Parsed strictly: unknown keys are a
// schema error naming the offending JSON path.
struct PipelineConfig {
    int version = 1;
    std::filesystem::path out_dir = "out";
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path input_events;
    std::uint64_t seed = 42;

    struct Ingest {
        double max_bad_line_fraction = 0.01;
    } ingest;

    struct Normalize {
        std::size_t benign_sample = 0;  // 0 keeps every unique benign event
        std::uint64_t sample_seed = 7;
        std::vector<std::string> temp_extensions = {".tmp", ".temp", ".swp", ".swx"};
    } normalize;

    struct Augment {
        std::string provider = "template";  // "template" | "remote"
        std::string chat_base_url = "https://api.openai.com/v1";
        std::string chat_model = "gpt-4o";
        std::size_t max_in_flight = 8;
        int max_retries = 3;
        int retry_backoff_ms = 250;
        std::string seed_fixtures;  // optional fixture file imported into the cache
    } augment;

    struct Embed {
        std::string provider = "local_hash";  // "local_hash" | "remote"
        std::string embed_base_url = "https://api.openai.com/v1";
        std::string embed_model = "text-embedding-3-small";
        std::size_t width = 1536;
        std::size_t batch_size = 128;
        int max_retries = 3;
        int retry_backoff_ms = 250;
    } embed;

    struct Reduce {
        int k = 256;
        double gamma = 0.0;  // <= 0 selects the heuristic below
        std::string gamma_heuristic = "variance";  // "variance" | "median"
    } reduce;

    struct Detect {
        MlpConfig mlp;
        GbdtConfig gbdt;
        bool gbdt_grid_search = false;
        GbdtGrid gbdt_grid;
        ScorerConfig xgbod_scorers;
    } detect;

    struct Eval {
        double train_fraction = 0.8;
        std::uint64_t split_seed = 13;
        std::uint64_t train_seed = 17;
        std::vector<std::string> modes = {"supervised_mlp", "supervised_gbdt",
                                          "semisupervised_xgbod"};
        std::string holdout_scenario;
        std::size_t unseen_test_per_class = 500;
    } eval;

    struct Audit {
        std::size_t sample_per_label = 500;
        std::uint64_t sample_seed = 3;
        double analogy_tolerance = 0.05;
        // Each quad is four canonical event keys.
        std::vector<std::array<std::string, 4>> quads;
    } audit;

    static PipelineConfig from_file(const std::filesystem::path& path);
    static PipelineConfig from_json(const nlohmann::json& j);

    nlohmann::json canonical_json() const;
    // Stable under key reordering of the source file.
    std::string config_hash() const;
    // Hash over the subset of the config a stage depends on.
    std::string stage_config_hash(const std::string& stage) const;
};

// Injectable providers; when null the stage builds HTTP clients from the
// config (remote mode) or uses the built-in offline paths.
struct PipelineProviders {
    ChatProvider* chat = nullptr;
    EmbedProvider* embed = nullptr;
};

struct StageResult {
    std::string stage;
    bool skipped = false;  // up-to-date per manifest check
    std::vector<std::filesystem::path> outputs;
};

StageResult run_ingest(const PipelineConfig& cfg, bool force = false);
StageResult run_normalize(const PipelineConfig& cfg, bool force = false);
StageResult run_explain(const PipelineConfig& cfg, const PipelineProviders& providers = {},
                        bool force = false);
StageResult run_embed(const PipelineConfig& cfg, const PipelineProviders& providers = {},
                      bool force = false);
StageResult run_reduce(const PipelineConfig& cfg, bool force = false);
StageResult run_train(const PipelineConfig& cfg, bool force = false);
StageResult run_evaluate(const PipelineConfig& cfg, bool force = false);
StageResult run_audit(const PipelineConfig& cfg, bool force = false);
std::vector<StageResult> run_pipeline(const PipelineConfig& cfg,
                                      const PipelineProviders& providers = {},
                                      bool force = false);

// Exit-code mapping shared by the CLI: 0 ok, 1 data, 2 config, 3 provider.
int exit_code_for(const std::exception& e);

}  // namespace provsem
