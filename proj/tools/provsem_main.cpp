// SPDX-License-Identifier: Apache-2.0
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "provsem/pipeline.hpp"

namespace {

void print_results(const std::vector<provsem::StageResult>& results) {
    for (const auto& r : results) {
        std::cout << r.stage << ": " << (r.skipped ? "up-to-date" : "done");
        for (const auto& out : r.outputs) std::cout << ' ' << out.string();
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"provsem: provenance event semantics pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    bool force = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON")->required();
        cmd->add_option("--out", out_override, "override the configured output directory");
        cmd->add_flag("--force", force, "rerun even when the stage manifest is up to date");
    };

    const std::vector<std::string> stages = {"ingest",  "normalize", "explain",
                                             "embed",   "reduce",    "train",
                                             "evaluate", "audit",    "pipeline"};
    for (const auto& name : stages) add_common(app.add_subcommand(name));

    CLI11_PARSE(app, argc, argv);

    try {
        provsem::PipelineConfig cfg = provsem::PipelineConfig::from_file(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;

        std::vector<provsem::StageResult> results;
        const std::string stage = app.get_subcommands().front()->get_name();
        if (stage == "pipeline") results = provsem::run_pipeline(cfg, {}, force);
        else if (stage == "ingest") results.push_back(provsem::run_ingest(cfg, force));
        else if (stage == "normalize") results.push_back(provsem::run_normalize(cfg, force));
        else if (stage == "explain") results.push_back(provsem::run_explain(cfg, {}, force));
        else if (stage == "embed") results.push_back(provsem::run_embed(cfg, {}, force));
        else if (stage == "reduce") results.push_back(provsem::run_reduce(cfg, force));
        else if (stage == "train") results.push_back(provsem::run_train(cfg, force));
        else if (stage == "evaluate") results.push_back(provsem::run_evaluate(cfg, force));
        else if (stage == "audit") results.push_back(provsem::run_audit(cfg, force));

        print_results(results);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return provsem::exit_code_for(e);
    }
}
