// SPDX-License-Identifier: Apache-2.0
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "provsem/pipeline.hpp"
#include "provsem/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"provsem-synth: generate a labeled two-population event corpus"};

    std::string out_path = "events.jsonl";
    provsem::SynthOptions options;
    app.add_option("--out", out_path, "output JSONL path");
    app.add_option("--benign", options.n_benign, "number of benign events");
    app.add_option("--adversary", options.n_adversary, "number of adversary events");
    app.add_option("--scenarios", options.n_scenarios, "number of attack scenarios");
    app.add_option("--seed", options.seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto events = provsem::make_synthetic_corpus(options);
        provsem::write_corpus_jsonl(events, out_path);
        std::cout << "wrote " << events.size() << " events to " << out_path << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return provsem::exit_code_for(e);
    }
}
