// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "provsem/detect.hpp"
#include "provsem/normalize.hpp"

namespace provsem {

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    // Degenerate ratios (0/0) are reported as 0 with the flag cleared.
    bool precision_defined = true;
    bool recall_defined = true;
    bool f1_defined = true;
};

// Positive class is 1 (adversary).
Metrics confusion_metrics(const std::vector<int>& labels, const std::vector<int>& predictions);

struct RocCurve {
    std::vector<double> fpr;         // nondecreasing, starts 0, ends 1
    std::vector<double> tpr;
    std::vector<double> thresholds;  // thresholds[0] = +inf; then distinct scores desc
    double auc = 0.0;                // trapezoid rule
    double auc_rank = 0.0;           // Mann-Whitney statistic; must agree with auc
};

// Sweeps thresholds over the distinct scores (ties grouped into one step) and
// computes the AUC two ways as a built-in self-check.
RocCurve roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

// Per-class split: train takes floor(fraction * n_c) of each class after a
// seeded shuffle, the rest is test. Index lists are returned sorted ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split_indices(
    const std::vector<Label>& labels, double train_fraction, std::uint64_t seed);

std::pair<LabeledEventSet, LabeledEventSet> stratified_split(const LabeledEventSet& ds,
                                                             double train_fraction,
                                                             std::uint64_t seed);

enum class ExperimentMode { SupervisedMlp, SupervisedGbdt, SemisupervisedXgbod, UnseenAttack };

const char* to_string(ExperimentMode m);
std::optional<ExperimentMode> experiment_mode_from_string(std::string_view s);

struct ExperimentInputs {
    Eigen::MatrixXd features;              // n x d reduced vectors, corpus order
    std::vector<Label> labels;             // parallel
    std::vector<std::string> scenario_ids; // parallel; "" when absent
    std::vector<std::string> keys;         // parallel canonical keys
};

struct ExperimentConfig {
    double train_fraction = 0.8;
    std::uint64_t split_seed = 13;
    std::uint64_t train_seed = 17;
    MlpConfig mlp;
    GbdtConfig gbdt;
    XgbodConfig xgbod;
    // unseen_attack mode
    std::string holdout_scenario;
    std::size_t unseen_test_per_class = 500;
    ExperimentMode unseen_detector = ExperimentMode::SemisupervisedXgbod;

    std::string config_hash;       // recorded into the report
    nlohmann::json* dataset_refs = nullptr;  // optional manifest references
};

struct ExperimentReport {
    std::string mode;
    Metrics metrics;
    std::optional<RocCurve> roc;
    std::string config_hash;
    std::uint64_t seed = 0;
    nlohmann::json to_json() const;
};

// Supervised modes: stratified split, train, evaluate on the held-out test.
// Unseen-attack mode: the named scenario's adversary events are excluded from
// training; the test set is a balanced sample of scenario adversary events and
// benign events disjoint from the training benign set.
ExperimentReport run_experiment(const ExperimentInputs& inputs, ExperimentMode mode,
                                const ExperimentConfig& config, std::uint64_t seed);

}  // namespace provsem
