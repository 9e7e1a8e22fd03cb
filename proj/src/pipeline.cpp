// SPDX-License-Identifier: Apache-2.0
#include "provsem/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include "provsem/augment.hpp"
#include "provsem/embed.hpp"
#include "provsem/error.hpp"
#include "provsem/hash.hpp"
#include "provsem/kernels.hpp"
#include "provsem/quality.hpp"
#include "provsem/reduce.hpp"

namespace provsem {

using nlohmann::json;

namespace {

void expect_keys(const json& j, const std::string& path,
                 const std::set<std::string>& allowed) {
    if (!j.is_object())
        throw SchemaError("config node " + path + " must be an object", path);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.contains(it.key()))
            throw SchemaError("unknown config key " + path + "/" + it.key(),
                              path + "/" + it.key());
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void get_path(const json& j, const char* key, std::filesystem::path& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<std::string>();
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, "config parse error in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    PipelineConfig cfg;
    expect_keys(j, "", {"version", "out_dir", "cache_dir", "input_events", "seed", "ingest",
                        "normalize", "augment", "embed", "reduce", "detect", "eval", "audit"});
    get_to(j, "version", cfg.version);
    if (cfg.version != 1)
        throw Error(ErrorKind::Config, "unsupported config version " + std::to_string(cfg.version));
    get_path(j, "out_dir", cfg.out_dir);
    get_path(j, "cache_dir", cfg.cache_dir);
    get_path(j, "input_events", cfg.input_events);
    get_to(j, "seed", cfg.seed);

    if (auto it = j.find("ingest"); it != j.end()) {
        expect_keys(*it, "/ingest", {"max_bad_line_fraction"});
        get_to(*it, "max_bad_line_fraction", cfg.ingest.max_bad_line_fraction);
    }
    if (auto it = j.find("normalize"); it != j.end()) {
        expect_keys(*it, "/normalize", {"benign_sample", "sample_seed", "temp_extensions"});
        get_to(*it, "benign_sample", cfg.normalize.benign_sample);
        get_to(*it, "sample_seed", cfg.normalize.sample_seed);
        get_to(*it, "temp_extensions", cfg.normalize.temp_extensions);
    }
    if (auto it = j.find("augment"); it != j.end()) {
        expect_keys(*it, "/augment",
                    {"provider", "chat_base_url", "chat_model", "max_in_flight", "max_retries",
                     "retry_backoff_ms", "seed_fixtures"});
        get_to(*it, "provider", cfg.augment.provider);
        get_to(*it, "chat_base_url", cfg.augment.chat_base_url);
        get_to(*it, "chat_model", cfg.augment.chat_model);
        get_to(*it, "max_in_flight", cfg.augment.max_in_flight);
        get_to(*it, "max_retries", cfg.augment.max_retries);
        get_to(*it, "retry_backoff_ms", cfg.augment.retry_backoff_ms);
        get_to(*it, "seed_fixtures", cfg.augment.seed_fixtures);
        if (cfg.augment.provider != "template" && cfg.augment.provider != "remote")
            throw Error(ErrorKind::Config,
                        "augment.provider must be 'template' or 'remote', got '" +
                            cfg.augment.provider + "'");
    }
    if (auto it = j.find("embed"); it != j.end()) {
        expect_keys(*it, "/embed", {"provider", "embed_base_url", "embed_model", "width",
                                    "batch_size", "max_retries", "retry_backoff_ms"});
        get_to(*it, "provider", cfg.embed.provider);
        get_to(*it, "embed_base_url", cfg.embed.embed_base_url);
        get_to(*it, "embed_model", cfg.embed.embed_model);
        get_to(*it, "width", cfg.embed.width);
        get_to(*it, "batch_size", cfg.embed.batch_size);
        get_to(*it, "max_retries", cfg.embed.max_retries);
        get_to(*it, "retry_backoff_ms", cfg.embed.retry_backoff_ms);
        if (cfg.embed.provider != "local_hash" && cfg.embed.provider != "remote")
            throw Error(ErrorKind::Config,
                        "embed.provider must be 'local_hash' or 'remote', got '" +
                            cfg.embed.provider + "'");
    }
    if (auto it = j.find("reduce"); it != j.end()) {
        expect_keys(*it, "/reduce", {"k", "gamma", "gamma_heuristic"});
        get_to(*it, "k", cfg.reduce.k);
        get_to(*it, "gamma", cfg.reduce.gamma);
        get_to(*it, "gamma_heuristic", cfg.reduce.gamma_heuristic);
        if (cfg.reduce.gamma_heuristic != "variance" && cfg.reduce.gamma_heuristic != "median")
            throw Error(ErrorKind::Config, "reduce.gamma_heuristic must be 'variance' or 'median'");
    }
    if (auto it = j.find("detect"); it != j.end()) {
        expect_keys(*it, "/detect", {"mlp", "gbdt", "gbdt_grid_search", "gbdt_grid", "xgbod"});
        if (auto m = it->find("mlp"); m != it->end()) {
            expect_keys(*m, "/detect/mlp",
                        {"hidden", "epochs", "learning_rate", "momentum", "batch_size",
                         "validation_fraction"});
            get_to(*m, "hidden", cfg.detect.mlp.hidden);
            get_to(*m, "epochs", cfg.detect.mlp.epochs);
            get_to(*m, "learning_rate", cfg.detect.mlp.learning_rate);
            get_to(*m, "momentum", cfg.detect.mlp.momentum);
            get_to(*m, "batch_size", cfg.detect.mlp.batch_size);
            get_to(*m, "validation_fraction", cfg.detect.mlp.validation_fraction);
        }
        if (auto g = it->find("gbdt"); g != it->end()) {
            expect_keys(*g, "/detect/gbdt",
                        {"rounds", "max_depth", "learning_rate", "reg_lambda", "leaf_clamp"});
            get_to(*g, "rounds", cfg.detect.gbdt.rounds);
            get_to(*g, "max_depth", cfg.detect.gbdt.max_depth);
            get_to(*g, "learning_rate", cfg.detect.gbdt.learning_rate);
            get_to(*g, "reg_lambda", cfg.detect.gbdt.reg_lambda);
            get_to(*g, "leaf_clamp", cfg.detect.gbdt.leaf_clamp);
        }
        get_to(*it, "gbdt_grid_search", cfg.detect.gbdt_grid_search);
        if (auto g = it->find("gbdt_grid"); g != it->end()) {
            expect_keys(*g, "/detect/gbdt_grid",
                        {"depths", "rounds", "learning_rates", "cv_folds"});
            get_to(*g, "depths", cfg.detect.gbdt_grid.depths);
            get_to(*g, "rounds", cfg.detect.gbdt_grid.rounds);
            get_to(*g, "learning_rates", cfg.detect.gbdt_grid.learning_rates);
            get_to(*g, "cv_folds", cfg.detect.gbdt_grid.cv_folds);
        }
        if (auto x = it->find("xgbod"); x != it->end()) {
            expect_keys(*x, "/detect/xgbod",
                        {"scorers", "knn_k", "lof_k", "hbos_bins", "hbos_max_dims"});
            get_to(*x, "scorers", cfg.detect.xgbod_scorers.scorers);
            get_to(*x, "knn_k", cfg.detect.xgbod_scorers.knn_k);
            get_to(*x, "lof_k", cfg.detect.xgbod_scorers.lof_k);
            get_to(*x, "hbos_bins", cfg.detect.xgbod_scorers.hbos_bins);
            get_to(*x, "hbos_max_dims", cfg.detect.xgbod_scorers.hbos_max_dims);
        }
    }
    if (auto it = j.find("eval"); it != j.end()) {
        expect_keys(*it, "/eval",
                    {"train_fraction", "split_seed", "train_seed", "modes", "holdout_scenario",
                     "unseen_test_per_class"});
        get_to(*it, "train_fraction", cfg.eval.train_fraction);
        get_to(*it, "split_seed", cfg.eval.split_seed);
        get_to(*it, "train_seed", cfg.eval.train_seed);
        get_to(*it, "modes", cfg.eval.modes);
        get_to(*it, "holdout_scenario", cfg.eval.holdout_scenario);
        get_to(*it, "unseen_test_per_class", cfg.eval.unseen_test_per_class);
        for (const auto& m : cfg.eval.modes)
            if (!experiment_mode_from_string(m))
                throw Error(ErrorKind::Config, "unknown eval mode '" + m + "'");
    }
    if (auto it = j.find("audit"); it != j.end()) {
        expect_keys(*it, "/audit",
                    {"sample_per_label", "sample_seed", "analogy_tolerance", "quads"});
        get_to(*it, "sample_per_label", cfg.audit.sample_per_label);
        get_to(*it, "sample_seed", cfg.audit.sample_seed);
        get_to(*it, "analogy_tolerance", cfg.audit.analogy_tolerance);
        if (auto q = it->find("quads"); q != it->end()) {
            for (const auto& quad : *q) {
                if (!quad.is_array() || quad.size() != 4)
                    throw Error(ErrorKind::Config, "audit.quads entries must be arrays of 4 keys");
                cfg.audit.quads.push_back({quad[0].get<std::string>(), quad[1].get<std::string>(),
                                           quad[2].get<std::string>(),
                                           quad[3].get<std::string>()});
            }
        }
    }
    return cfg;
}

json PipelineConfig::canonical_json() const {
    json j;
    j["version"] = version;
    j["out_dir"] = out_dir.string();
    j["cache_dir"] = cache_dir.string();
    j["input_events"] = input_events.string();
    j["seed"] = seed;
    j["ingest"] = {{"max_bad_line_fraction", ingest.max_bad_line_fraction}};
    j["normalize"] = {{"benign_sample", normalize.benign_sample},
                      {"sample_seed", normalize.sample_seed},
                      {"temp_extensions", normalize.temp_extensions}};
    j["augment"] = {{"provider", augment.provider},
                    {"chat_base_url", augment.chat_base_url},
                    {"chat_model", augment.chat_model},
                    {"max_in_flight", augment.max_in_flight},
                    {"max_retries", augment.max_retries},
                    {"retry_backoff_ms", augment.retry_backoff_ms},
                    {"seed_fixtures", augment.seed_fixtures}};
    j["embed"] = {{"provider", embed.provider},
                  {"embed_base_url", embed.embed_base_url},
                  {"embed_model", embed.embed_model},
                  {"width", embed.width},
                  {"batch_size", embed.batch_size},
                  {"max_retries", embed.max_retries},
                  {"retry_backoff_ms", embed.retry_backoff_ms}};
    j["reduce"] = {{"k", reduce.k},
                   {"gamma", reduce.gamma},
                   {"gamma_heuristic", reduce.gamma_heuristic}};
    j["detect"] = {{"mlp",
                    {{"hidden", detect.mlp.hidden},
                     {"epochs", detect.mlp.epochs},
                     {"learning_rate", detect.mlp.learning_rate},
                     {"momentum", detect.mlp.momentum},
                     {"batch_size", detect.mlp.batch_size},
                     {"validation_fraction", detect.mlp.validation_fraction}}},
                   {"gbdt",
                    {{"rounds", detect.gbdt.rounds},
                     {"max_depth", detect.gbdt.max_depth},
                     {"learning_rate", detect.gbdt.learning_rate},
                     {"reg_lambda", detect.gbdt.reg_lambda},
                     {"leaf_clamp", detect.gbdt.leaf_clamp}}},
                   {"gbdt_grid_search", detect.gbdt_grid_search},
                   {"gbdt_grid",
                    {{"depths", detect.gbdt_grid.depths},
                     {"rounds", detect.gbdt_grid.rounds},
                     {"learning_rates", detect.gbdt_grid.learning_rates},
                     {"cv_folds", detect.gbdt_grid.cv_folds}}},
                   {"xgbod",
                    {{"scorers", detect.xgbod_scorers.scorers},
                     {"knn_k", detect.xgbod_scorers.knn_k},
                     {"lof_k", detect.xgbod_scorers.lof_k},
                     {"hbos_bins", detect.xgbod_scorers.hbos_bins},
                     {"hbos_max_dims", detect.xgbod_scorers.hbos_max_dims}}}};
    j["eval"] = {{"train_fraction", eval.train_fraction},
                 {"split_seed", eval.split_seed},
                 {"train_seed", eval.train_seed},
                 {"modes", eval.modes},
                 {"holdout_scenario", eval.holdout_scenario},
                 {"unseen_test_per_class", eval.unseen_test_per_class}};
    json quads = json::array();
    for (const auto& q : audit.quads) quads.push_back({q[0], q[1], q[2], q[3]});
    j["audit"] = {{"sample_per_label", audit.sample_per_label},
                  {"sample_seed", audit.sample_seed},
                  {"analogy_tolerance", audit.analogy_tolerance},
                  {"quads", quads}};
    return j;
}

std::string PipelineConfig::config_hash() const { return sha256_hex(canonical_json().dump()); }

std::string PipelineConfig::stage_config_hash(const std::string& stage) const {
    const json full = canonical_json();
    json subset;
    subset["stage"] = stage;
    if (stage == "ingest") {
        subset["input_events"] = full["input_events"];
        subset["ingest"] = full["ingest"];
    } else if (stage == "normalize") {
        subset["normalize"] = full["normalize"];
    } else if (stage == "explain") {
        subset["augment"] = full["augment"];
    } else if (stage == "embed") {
        subset["embed"] = full["embed"];
    } else if (stage == "reduce") {
        subset["reduce"] = full["reduce"];
    } else if (stage == "train") {
        subset["detect"] = full["detect"];
        subset["train_fraction"] = full["eval"]["train_fraction"];
        subset["split_seed"] = full["eval"]["split_seed"];
        subset["train_seed"] = full["eval"]["train_seed"];
    } else if (stage == "evaluate") {
        subset["detect"] = full["detect"];
        subset["eval"] = full["eval"];
    } else if (stage == "audit") {
        subset["audit"] = full["audit"];
    } else {
        throw Error(ErrorKind::Config, "unknown stage: " + stage);
    }
    return sha256_hex(subset.dump());
}

// ---------------------------------------------------------------------------
// Stage manifests
// ---------------------------------------------------------------------------

namespace {

struct StagePaths {
    std::filesystem::path out;
    std::filesystem::path manifests;

    explicit StagePaths(const PipelineConfig& cfg) : out(cfg.out_dir), manifests(cfg.out_dir / "manifests") {}

    std::filesystem::path manifest(const std::string& stage) const {
        return manifests / (stage + ".json");
    }
    std::filesystem::path events() const { return out / "events.jsonl"; }
    std::filesystem::path normalized() const { return out / "normalized.jsonl"; }
    std::filesystem::path explanations_dir() const { return out / "explanations"; }
    std::filesystem::path explanations() const {
        return explanations_dir() / "explanations.jsonl";
    }
    std::filesystem::path embeddings_bin() const { return out / "embeddings.bin"; }
    std::filesystem::path embeddings_manifest() const { return out / "embeddings.manifest.json"; }
    std::filesystem::path reduced_bin() const { return out / "reduced.bin"; }
    std::filesystem::path reduced_manifest() const { return out / "reduced.manifest.json"; }
    std::filesystem::path models_dir() const { return out / "models"; }
    std::filesystem::path kpca_manifest() const { return models_dir() / "kpca" / "model.json"; }
    std::filesystem::path kpca_blob() const { return models_dir() / "kpca" / "model.bin"; }
    std::filesystem::path model_manifest(const std::string& name) const {
        return models_dir() / name / "model.json";
    }
    std::filesystem::path model_blob(const std::string& name) const {
        return models_dir() / name / "model.bin";
    }
    std::filesystem::path reports_dir() const { return out / "reports"; }
    std::filesystem::path report(const std::string& mode) const {
        return reports_dir() / ("report_" + mode + ".json");
    }
    std::filesystem::path roc_csv(const std::string& mode) const {
        return reports_dir() / ("roc_" + mode + ".csv");
    }
    std::filesystem::path audit_dir() const { return out / "audit"; }
    std::filesystem::path projection_csv() const { return audit_dir() / "projection.csv"; }
    std::filesystem::path analogies() const { return audit_dir() / "analogies.json"; }
};

json input_hashes_json(const std::vector<std::filesystem::path>& inputs) {
    json j = json::object();
    for (const auto& p : inputs) j[p.filename().string()] = sha256_file(p);
    return j;
}

bool stage_up_to_date(const StagePaths& paths, const std::string& stage,
                      const std::string& stage_hash, const json& input_hashes,
                      const std::vector<std::filesystem::path>& outputs) {
    std::ifstream in(paths.manifest(stage));
    if (!in) return false;
    json m;
    try {
        in >> m;
    } catch (const json::parse_error&) {
        return false;
    }
    if (m.value("stage_config_hash", "") != stage_hash) return false;
    if (m.value("input_hashes", json::object()) != input_hashes) return false;
    for (const auto& out : outputs)
        if (!std::filesystem::exists(out)) return false;
    // verify outputs are the ones this manifest recorded
    const json recorded = m.value("output_hashes", json::object());
    for (const auto& out : outputs) {
        const auto name = out.filename().string();
        if (!recorded.contains(name)) return false;
        if (recorded[name].get<std::string>() != sha256_file(out)) return false;
    }
    return true;
}

void write_stage_manifest(const StagePaths& paths, const PipelineConfig& cfg,
                          const std::string& stage, const json& input_hashes,
                          const std::vector<std::filesystem::path>& outputs,
                          json extra = json::object()) {
    std::filesystem::create_directories(paths.manifests);
    json m;
    m["stage"] = stage;
    m["stage_config_hash"] = cfg.stage_config_hash(stage);
    m["config_hash"] = cfg.config_hash();
    m["seed"] = cfg.seed;
    m["input_hashes"] = input_hashes;
    json outs = json::array();
    json out_hashes = json::object();
    for (const auto& out : outputs) {
        outs.push_back(out.string());
        out_hashes[out.filename().string()] = sha256_file(out);
    }
    m["outputs"] = outs;
    m["output_hashes"] = out_hashes;
    m["extra"] = std::move(extra);
    std::ofstream out(paths.manifest(stage), std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::Data, "cannot write manifest: " + paths.manifest(stage).string());
    out << m.dump(2) << '\n';
}

void require_input(const std::filesystem::path& p, const std::string& producing_stage) {
    if (!std::filesystem::exists(p))
        throw Error(ErrorKind::Data, "missing upstream artifact " + p.string() + " (run the '" +
                                         producing_stage + "' stage first)");
}

std::vector<std::string> load_explanation_texts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Data, "cannot read explanations: " + path.string());
    std::vector<std::string> texts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        texts.push_back(json::parse(line).at("text").get<std::string>());
    }
    return texts;
}

Eigen::MatrixXd load_reduced_matrix(const StagePaths& paths) {
    std::ifstream mf(paths.reduced_manifest());
    if (!mf)
        throw Error(ErrorKind::Data,
                    "cannot read reduced manifest: " + paths.reduced_manifest().string());
    json manifest;
    mf >> manifest;
    const auto count = manifest.at("count").get<std::size_t>();
    const auto k = manifest.at("k").get<std::size_t>();
    std::ifstream in(paths.reduced_bin(), std::ios::binary);
    if (!in) throw Error(ErrorKind::Data, "cannot read reduced matrix");
    std::vector<float> raw(count * k);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!in) throw Error(ErrorKind::Data, "truncated reduced matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < k; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = raw[i * k + j];
    return m;
}

ExperimentConfig experiment_config_of(const PipelineConfig& cfg) {
    ExperimentConfig ec;
    ec.train_fraction = cfg.eval.train_fraction;
    ec.split_seed = cfg.eval.split_seed;
    ec.train_seed = cfg.eval.train_seed;
    ec.mlp = cfg.detect.mlp;
    ec.gbdt = cfg.detect.gbdt;
    ec.xgbod.scorers = cfg.detect.xgbod_scorers;
    ec.xgbod.combiner = cfg.detect.gbdt;
    ec.holdout_scenario = cfg.eval.holdout_scenario;
    ec.unseen_test_per_class = cfg.eval.unseen_test_per_class;
    ec.config_hash = cfg.config_hash();
    return ec;
}

void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write ROC csv: " + path.string());
    out << "threshold,fpr,tpr\n";
    out.precision(17);
    for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
        if (std::isinf(roc.thresholds[i]))
            out << "inf";
        else
            out << roc.thresholds[i];
        out << ',' << roc.fpr[i] << ',' << roc.tpr[i] << '\n';
    }
}

}  // namespace

StageResult run_ingest(const PipelineConfig& cfg, bool force) {
    StagePaths paths(cfg);
    StageResult result{"ingest", false, {paths.events()}};
    if (cfg.input_events.empty())
        throw Error(ErrorKind::Config, "input_events not set in config");
    require_input(cfg.input_events, "external export");
    const json inputs = input_hashes_json({cfg.input_events});
    if (!force && stage_up_to_date(paths, "ingest", cfg.stage_config_hash("ingest"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    std::filesystem::create_directories(paths.out);

    const EventCorpus corpus = load_corpus(cfg.input_events, cfg.ingest.max_bad_line_fraction);
    {
        std::ofstream out(paths.events(), std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write events: " + paths.events().string());
        for (const auto& e : corpus.events) out << serialize_event(e) << '\n';
    }
    json extra;
    extra["counts"] = {{"file", corpus.ingest_stats.n_file},
                       {"process", corpus.ingest_stats.n_process},
                       {"network", corpus.ingest_stats.n_network},
                       {"other", corpus.ingest_stats.n_other},
                       {"benign", corpus.ingest_stats.n_benign},
                       {"adversary", corpus.ingest_stats.n_adversary},
                       {"unlabeled", corpus.ingest_stats.n_unlabeled},
                       {"failed_lines", corpus.ingest_stats.failed_lines},
                       {"unknown_fields", corpus.ingest_stats.unknown_fields}};
    write_stage_manifest(paths, cfg, "ingest", inputs, result.outputs, extra);
    return result;
}

StageResult run_normalize(const PipelineConfig& cfg, bool force) {
    StagePaths paths(cfg);
    StageResult result{"normalize", false, {paths.normalized()}};
    require_input(paths.events(), "ingest");
    const json inputs = input_hashes_json({paths.events()});
    if (!force && stage_up_to_date(paths, "normalize", cfg.stage_config_hash("normalize"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }

    const EventCorpus corpus = load_corpus(paths.events(), 0.0);
    NormalizeOptions options;
    options.temp_extensions = cfg.normalize.temp_extensions;

    std::vector<NormalizedEvent> benign, adversary;
    std::size_t dropped_unlabeled = 0;
    for (const auto& e : corpus.events) {
        if (!e.label || *e.label == Label::Unlabeled) {
            ++dropped_unlabeled;
            continue;
        }
        auto n = to_normalized_event(e, options);
        (*e.label == Label::Benign ? benign : adversary).push_back(std::move(n));
    }

    std::optional<std::size_t> sample;
    if (cfg.normalize.benign_sample > 0) sample = cfg.normalize.benign_sample;
    const LabeledEventSet set =
        dedup_and_filter(benign, adversary, sample, cfg.normalize.sample_seed);
    save_labeled_set(set, paths.normalized());

    json extra;
    std::size_t n_benign = 0, n_adversary = 0;
    for (auto l : set.labels) (l == Label::Benign ? n_benign : n_adversary)++;
    extra["counts"] = {{"benign", n_benign},
                       {"adversary", n_adversary},
                       {"dropped_unlabeled", dropped_unlabeled},
                       {"raw_benign", benign.size()},
                       {"raw_adversary", adversary.size()}};
    extra["sample_seed"] = cfg.normalize.sample_seed;
    write_stage_manifest(paths, cfg, "normalize", inputs, result.outputs, extra);
    return result;
}

StageResult run_explain(const PipelineConfig& cfg, const PipelineProviders& providers,
                        bool force) {
    StagePaths paths(cfg);
    StageResult result{"explain", false, {paths.explanations()}};
    require_input(paths.normalized(), "normalize");
    const json inputs = input_hashes_json({paths.normalized()});
    if (!force && stage_up_to_date(paths, "explain", cfg.stage_config_hash("explain"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    const LabeledEventSet set = load_labeled_set(paths.normalized());
    std::filesystem::create_directories(paths.explanations_dir());

    std::vector<Explanation> explanations;
    if (cfg.augment.provider == "template") {
        explanations.resize(set.events.size());
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(set.events.size()); ++i)
            explanations[static_cast<std::size_t>(i)] =
                template_explain(set.events[static_cast<std::size_t>(i)]);
    } else {
        DiskCache cache(cfg.cache_dir / "chat");
        if (!cfg.augment.seed_fixtures.empty())
            seed_cache_from_fixture(cfg.augment.seed_fixtures, cache);
        std::unique_ptr<HttpChatProvider> owned;
        ChatProvider* chat = providers.chat;
        if (!chat) {
            HttpProviderOptions options;
            options.base_url = cfg.augment.chat_base_url;
            options.api_key = api_key_from_env();
            options.max_retries = cfg.augment.max_retries;
            options.retry_backoff_ms = cfg.augment.retry_backoff_ms;
            owned = std::make_unique<HttpChatProvider>(options);
            chat = owned.get();
        }
        std::vector<PromptRequest> requests;
        requests.reserve(set.events.size());
        for (const auto& e : set.events) requests.push_back(build_prompt(e, cfg.augment.chat_model));
        explanations = explain_events(requests, *chat, cache, cfg.augment.max_in_flight);
    }

    {
        std::ofstream out(paths.explanations(), std::ios::trunc);
        if (!out)
            throw Error(ErrorKind::Data,
                        "cannot write explanations: " + paths.explanations().string());
        for (const auto& ex : explanations) {
            json row;
            row["event_key"] = ex.event_key;
            row["text"] = ex.text;
            row["provider"] = ex.provider == ExplanationProvider::Remote ? "remote" : "template";
            row["model_id"] = ex.model_id;
            row["cached"] = ex.cached;
            out << row.dump() << '\n';
        }
    }
    json extra;
    extra["count"] = explanations.size();
    std::size_t hits = 0;
    for (const auto& ex : explanations)
        if (ex.cached) ++hits;
    extra["cache_hits"] = hits;
    write_stage_manifest(paths, cfg, "explain", inputs, result.outputs, extra);
    return result;
}

StageResult run_embed(const PipelineConfig& cfg, const PipelineProviders& providers, bool force) {
    StagePaths paths(cfg);
    StageResult result{"embed", false, {paths.embeddings_bin(), paths.embeddings_manifest()}};
    require_input(paths.explanations(), "explain");
    const json inputs = input_hashes_json({paths.explanations()});
    if (!force && stage_up_to_date(paths, "embed", cfg.stage_config_hash("embed"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    const std::vector<std::string> texts = load_explanation_texts(paths.explanations());

    EmbeddingMatrix matrix;
    if (cfg.embed.provider == "local_hash") {
        matrix = local_hash_embed_all(texts, cfg.embed.width);
    } else {
        DiskCache cache(cfg.cache_dir / "embed");
        std::unique_ptr<HttpEmbedProvider> owned;
        EmbedProvider* embed = providers.embed;
        if (!embed) {
            HttpProviderOptions options;
            options.base_url = cfg.embed.embed_base_url;
            options.api_key = api_key_from_env();
            options.max_retries = cfg.embed.max_retries;
            options.retry_backoff_ms = cfg.embed.retry_backoff_ms;
            owned = std::make_unique<HttpEmbedProvider>(options);
            embed = owned.get();
        }
        EmbedOptions options;
        options.model_id = cfg.embed.embed_model;
        options.batch_size = cfg.embed.batch_size;
        matrix = embed_texts(texts, *embed, cache, options);
    }
    matrix.provenance.config_hash = cfg.config_hash();
    save_embedding_matrix(matrix, paths.embeddings_bin(), paths.embeddings_manifest());

    json extra;
    extra["count"] = matrix.rows();
    extra["width"] = matrix.width;
    write_stage_manifest(paths, cfg, "embed", inputs, result.outputs, extra);
    return result;
}

StageResult run_reduce(const PipelineConfig& cfg, bool force) {
    StagePaths paths(cfg);
    StageResult result{"reduce",
                       false,
                       {paths.reduced_bin(), paths.reduced_manifest(), paths.kpca_manifest(),
                        paths.kpca_blob()}};
    require_input(paths.embeddings_bin(), "embed");
    require_input(paths.embeddings_manifest(), "embed");
    const json inputs = input_hashes_json({paths.embeddings_bin(), paths.embeddings_manifest()});
    if (!force && stage_up_to_date(paths, "reduce", cfg.stage_config_hash("reduce"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    const EmbeddingMatrix embeddings =
        load_embedding_matrix(paths.embeddings_bin(), paths.embeddings_manifest());
    const Eigen::MatrixXd x = embeddings.to_eigen();

    double gamma = cfg.reduce.gamma;
    if (gamma <= 0.0)
        gamma = cfg.reduce.gamma_heuristic == "median" ? kpca_median_gamma(x)
                                                       : kpca_auto_gamma(x);
    const int k = std::min<int>(cfg.reduce.k, static_cast<int>(x.rows()) - 1);
    auto [model, projected] = kpca_fit_transform(x, gamma, k);

    std::filesystem::create_directories(paths.kpca_manifest().parent_path());
    save_kpca(model, paths.kpca_manifest(), paths.kpca_blob());
    {
        std::ofstream out(paths.reduced_bin(), std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write reduced matrix");
        for (Eigen::Index i = 0; i < projected.rows(); ++i)
            for (Eigen::Index j = 0; j < projected.cols(); ++j) {
                const float v = static_cast<float>(projected(i, j));
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
    }
    {
        json manifest;
        manifest["count"] = projected.rows();
        manifest["k"] = projected.cols();
        manifest["requested_k"] = cfg.reduce.k;
        manifest["gamma"] = gamma;
        manifest["truncated"] = model.truncated;
        manifest["dtype"] = "f32";
        manifest["layout"] = "row-major";
        manifest["config_hash"] = cfg.config_hash();
        std::ofstream out(paths.reduced_manifest(), std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write reduced manifest");
        out << manifest.dump(2) << '\n';
    }
    json extra;
    extra["gamma"] = gamma;
    extra["usable_k"] = model.usable_components();
    write_stage_manifest(paths, cfg, "reduce", inputs, result.outputs, extra);
    return result;
}

namespace {

struct CorpusFeatures {
    ExperimentInputs inputs;
};

CorpusFeatures load_corpus_features(const StagePaths& paths) {
    CorpusFeatures cf;
    const LabeledEventSet set = load_labeled_set(paths.normalized());
    cf.inputs.features = load_reduced_matrix(paths);
    if (static_cast<std::size_t>(cf.inputs.features.rows()) != set.events.size())
        throw Error(ErrorKind::Data, "reduced matrix row count does not match the labeled set");
    cf.inputs.labels = set.labels;
    cf.inputs.scenario_ids = set.scenario_ids;
    cf.inputs.keys.reserve(set.events.size());
    for (const auto& e : set.events) cf.inputs.keys.push_back(e.canonical_key);
    return cf;
}

}  // namespace

StageResult run_train(const PipelineConfig& cfg, bool force) {
    StagePaths paths(cfg);
    StageResult result{"train",
                       false,
                       {paths.model_manifest("mlp"), paths.model_blob("mlp"),
                        paths.model_manifest("gbdt"), paths.model_blob("gbdt"),
                        paths.model_manifest("xgbod"), paths.model_blob("xgbod")}};
    require_input(paths.normalized(), "normalize");
    require_input(paths.reduced_bin(), "reduce");
    const json inputs = input_hashes_json({paths.normalized(), paths.reduced_bin()});
    if (!force && stage_up_to_date(paths, "train", cfg.stage_config_hash("train"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    const CorpusFeatures cf = load_corpus_features(paths);

    auto [train_idx, test_idx] = stratified_split_indices(
        cf.inputs.labels, cfg.eval.train_fraction, cfg.eval.split_seed);
    Eigen::MatrixXd x_train(static_cast<Eigen::Index>(train_idx.size()),
                            cf.inputs.features.cols());
    std::vector<int> y_train;
    y_train.reserve(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        x_train.row(static_cast<Eigen::Index>(i)) =
            cf.inputs.features.row(static_cast<Eigen::Index>(train_idx[i]));
        y_train.push_back(cf.inputs.labels[train_idx[i]] == Label::Adversary ? 1 : 0);
    }
    Eigen::MatrixXd benign_train(
        static_cast<Eigen::Index>(std::count(y_train.begin(), y_train.end(), 0)),
        x_train.cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < y_train.size(); ++i)
        if (y_train[i] == 0) benign_train.row(r++) = x_train.row(static_cast<Eigen::Index>(i));

    for (const auto& name : {"mlp", "gbdt", "xgbod"})
        std::filesystem::create_directories(paths.models_dir() / name);

    const MlpModel mlp = train_mlp(x_train, y_train, cfg.detect.mlp, cfg.eval.train_seed);
    save_mlp(mlp, paths.model_manifest("mlp"), paths.model_blob("mlp"));

    const GbdtModel gbdt =
        cfg.detect.gbdt_grid_search
            ? train_gbdt_grid(x_train, y_train, cfg.detect.gbdt_grid, cfg.detect.gbdt,
                              cfg.eval.train_seed)
            : train_gbdt(x_train, y_train, cfg.detect.gbdt, cfg.eval.train_seed);
    save_gbdt(gbdt, paths.model_manifest("gbdt"), paths.model_blob("gbdt"));

    XgbodConfig xc;
    xc.scorers = cfg.detect.xgbod_scorers;
    xc.combiner = cfg.detect.gbdt;
    const XgbodModel xgbod = train_xgbod(x_train, y_train, benign_train, xc, cfg.eval.train_seed);
    save_xgbod(xgbod, paths.model_manifest("xgbod"), paths.model_blob("xgbod"));

    json extra;
    extra["train_size"] = train_idx.size();
    extra["test_size"] = test_idx.size();
    extra["split_seed"] = cfg.eval.split_seed;
    extra["train_seed"] = cfg.eval.train_seed;
    write_stage_manifest(paths, cfg, "train", inputs, result.outputs, extra);
    return result;
}

StageResult run_evaluate(const PipelineConfig& cfg, bool force) {
    StagePaths paths(cfg);
    StageResult result{"evaluate", false, {}};
    for (const auto& mode : cfg.eval.modes) {
        result.outputs.push_back(paths.report(mode));
        result.outputs.push_back(paths.roc_csv(mode));
    }
    require_input(paths.normalized(), "normalize");
    require_input(paths.reduced_bin(), "reduce");
    const json inputs = input_hashes_json({paths.normalized(), paths.reduced_bin()});
    if (!force && stage_up_to_date(paths, "evaluate", cfg.stage_config_hash("evaluate"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    const CorpusFeatures cf = load_corpus_features(paths);
    std::filesystem::create_directories(paths.reports_dir());

    const ExperimentConfig ec = experiment_config_of(cfg);
    for (const auto& mode_name : cfg.eval.modes) {
        const auto mode = experiment_mode_from_string(mode_name);
        const ExperimentReport report = run_experiment(cf.inputs, *mode, ec, cfg.seed);
        {
            std::ofstream out(paths.report(mode_name), std::ios::trunc);
            if (!out) throw Error(ErrorKind::Data, "cannot write report");
            out << report.to_json().dump(2) << '\n';
        }
        if (report.roc) write_roc_csv(*report.roc, paths.roc_csv(mode_name));
    }
    write_stage_manifest(paths, cfg, "evaluate", inputs, result.outputs);
    return result;
}

StageResult run_audit(const PipelineConfig& cfg, bool force) {
    StagePaths paths(cfg);
    StageResult result{"audit", false, {paths.projection_csv(), paths.analogies()}};
    require_input(paths.normalized(), "normalize");
    require_input(paths.embeddings_bin(), "embed");
    const json inputs = input_hashes_json({paths.normalized(), paths.embeddings_bin()});
    if (!force && stage_up_to_date(paths, "audit", cfg.stage_config_hash("audit"), inputs,
                                   result.outputs)) {
        result.skipped = true;
        return result;
    }
    const LabeledEventSet set = load_labeled_set(paths.normalized());
    const EmbeddingMatrix embeddings =
        load_embedding_matrix(paths.embeddings_bin(), paths.embeddings_manifest());
    std::filesystem::create_directories(paths.audit_dir());

    std::vector<std::string> keys;
    keys.reserve(set.events.size());
    for (const auto& e : set.events) keys.push_back(e.canonical_key);

    ProjectOptions options;
    options.seed = cfg.audit.sample_seed;
    std::size_t n_benign = 0, n_adversary = 0;
    for (auto l : set.labels) (l == Label::Benign ? n_benign : n_adversary)++;
    if (cfg.audit.sample_per_label > 0 && cfg.audit.sample_per_label < n_benign &&
        cfg.audit.sample_per_label < n_adversary)
        options.sample_per_label = cfg.audit.sample_per_label;
    const Projection projection = project_2d(embeddings, set.labels, keys, options);
    write_projection_csv(projection, paths.projection_csv());

    json analogies = json::array();
    if (!cfg.audit.quads.empty()) {
        // resolve canonical keys to embedding rows
        std::map<std::string, std::size_t> row_of;
        for (std::size_t i = 0; i < keys.size(); ++i) row_of.emplace(keys[i], i);
        auto vector_at = [&](const std::string& key) {
            auto it = row_of.find(key);
            if (it == row_of.end())
                throw Error(ErrorKind::Config, "audit quad key not found in corpus: " + key);
            EmbeddingVector v;
            v.values.assign(embeddings.row(it->second),
                            embeddings.row(it->second) + embeddings.width);
            double n2 = 0.0;
            for (double x : v.values) n2 += x * x;
            v.norm = std::sqrt(n2);
            v.text_key = embeddings.text_keys[it->second];
            return v;
        };
        for (const auto& q : cfg.audit.quads) {
            const AnalogyQuad quad =
                analogy_residual(vector_at(q[0]), vector_at(q[1]), vector_at(q[2]),
                                 vector_at(q[3]), cfg.audit.analogy_tolerance, q);
            analogies.push_back({{"keys", q},
                                 {"residual", quad.residual},
                                 {"vector_residual", quad.vector_residual},
                                 {"pass", quad.pass}});
        }
    }
    {
        std::ofstream out(paths.analogies(), std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write analogies");
        out << analogies.dump(2) << '\n';
    }
    json extra;
    extra["projection_rows"] = projection.keys.size();
    extra["stress"] = projection.coords.stress;
    write_stage_manifest(paths, cfg, "audit", inputs, result.outputs, extra);
    return result;
}

std::vector<StageResult> run_pipeline(const PipelineConfig& cfg,
                                      const PipelineProviders& providers, bool force) {
    std::vector<StageResult> results;
    results.push_back(run_ingest(cfg, force));
    results.push_back(run_normalize(cfg, force));
    results.push_back(run_explain(cfg, providers, force));
    results.push_back(run_embed(cfg, providers, force));
    results.push_back(run_reduce(cfg, force));
    results.push_back(run_train(cfg, force));
    results.push_back(run_evaluate(cfg, force));
    results.push_back(run_audit(cfg, force));
    return results;
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        switch (err->kind()) {
            case ErrorKind::Data: return 1;
            case ErrorKind::Config: return 2;
            case ErrorKind::Provider: return 3;
        }
    }
    return 1;
}

}  // namespace provsem
