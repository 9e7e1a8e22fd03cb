// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace provsem {

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

struct MlpConfig {
    std::vector<int> hidden = {128, 64};
    int epochs = 50;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 64;
    double validation_fraction = 0.2;  // held-out fold for best-epoch selection
};

// Two-class MLP: rectifier hidden layers, softmax output, cross-entropy loss.
struct MlpModel {
    std::vector<Eigen::MatrixXd> weights;  // layer l: (in x out)
    std::vector<Eigen::VectorXd> biases;
    MlpConfig config;
    std::uint64_t seed = 0;
    int best_epoch = -1;
    double best_accuracy = 0.0;

    std::vector<int> layer_widths() const;
    int input_width() const;
};

struct MlpGradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
};

// Labels are 0/1. Deterministic given (data, config, seed). Snapshots after
// each epoch are scored on the held-out fold (training accuracy when the fold
// is empty) and the best one is returned; ties keep the earlier epoch.
MlpModel train_mlp(const Eigen::MatrixXd& x, const std::vector<int>& y,
                   const MlpConfig& config, std::uint64_t seed);

// n x 2 class probabilities; each row sums to 1.
Eigen::MatrixXd mlp_forward_probs(const MlpModel& model, const Eigen::MatrixXd& x);

// Mean cross-entropy and its analytic gradients; exposed so tests can compare
// against finite differences.
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y);
MlpGradients mlp_loss_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                const std::vector<int>& y);

void save_mlp(const MlpModel& model, const std::filesystem::path& manifest_path,
              const std::filesystem::path& blob_path);
MlpModel load_mlp(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& blob_path);

// ---------------------------------------------------------------------------
// GBDT
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;  // < 0 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct GbdtConfig {
    int rounds = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    double reg_lambda = 1.0;   // L2 on leaf values (second-order objective)
    double leaf_clamp = 8.0;   // cap on |leaf value| before shrinkage
};

struct GbdtGrid {
    std::vector<int> depths = {2, 3, 4};
    std::vector<int> rounds = {100, 200};
    std::vector<double> learning_rates = {0.05, 0.1};
    int cv_folds = 3;
};

struct GbdtModel {
    std::vector<RegressionTree> trees;
    GbdtConfig config;
    double base_score = 0.0;  // log-odds of the positive prior (clamped)
    int n_features = 0;
    std::vector<double> train_losses;  // logistic loss after each round
};

GbdtModel train_gbdt(const Eigen::MatrixXd& x, const std::vector<int>& y,
                     const GbdtConfig& config, std::uint64_t seed);

// Cross-validated grid search on accuracy; ties resolve to the first grid
// entry in declared order (depth, rounds, learning rate).
GbdtModel train_gbdt_grid(const Eigen::MatrixXd& x, const std::vector<int>& y,
                          const GbdtGrid& grid, const GbdtConfig& base,
                          std::uint64_t seed);

// Positive-class probabilities.
Eigen::VectorXd gbdt_scores(const GbdtModel& model, const Eigen::MatrixXd& x);

void save_gbdt(const GbdtModel& model, const std::filesystem::path& manifest_path,
               const std::filesystem::path& blob_path);
GbdtModel load_gbdt(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& blob_path);

// ---------------------------------------------------------------------------
// Unsupervised outlier scores + XGBOD-style combiner
// ---------------------------------------------------------------------------

struct ScorerConfig {
    std::vector<std::string> scorers = {"knn_max", "knn_mean", "lof", "hbos"};
    int knn_k = 5;
    int lof_k = 10;
    int hbos_bins = 10;
    int hbos_max_dims = 32;  // histograms over the first min(d, this) dims
};

struct OutlierScoreSet {
    std::vector<std::string> columns;
    Eigen::MatrixXd scores;  // n x columns, higher = more anomalous
};

// Scores each row of x against a benign-only reference set. Deterministic;
// throws a Config error when a k reaches the reference size.
OutlierScoreSet unsupervised_score_features(const Eigen::MatrixXd& reference,
                                            const Eigen::MatrixXd& x,
                                            const ScorerConfig& config);

struct XgbodConfig {
    ScorerConfig scorers;
    GbdtConfig combiner;
};

struct XgbodModel {
    ScorerConfig scorers;
    Eigen::MatrixXd reference;  // benign points the score columns are computed against
    GbdtModel combiner;
};

// Augments the features with unsupervised score columns, then boosts. With an
// empty scorer list this reduces exactly to train_gbdt.
XgbodModel train_xgbod(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::MatrixXd& reference, const XgbodConfig& config,
                       std::uint64_t seed);

Eigen::VectorXd xgbod_scores(const XgbodModel& model, const Eigen::MatrixXd& x);

void save_xgbod(const XgbodModel& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path);
XgbodModel load_xgbod(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& blob_path);

// ---------------------------------------------------------------------------
// Shared inference contract
// ---------------------------------------------------------------------------

struct Prediction {
    Eigen::VectorXd scores;   // positive-class probabilities in [0, 1]
    std::vector<int> labels;  // score >= threshold
};

inline constexpr double kDecisionThreshold = 0.5;

Prediction predict(const MlpModel& model, const Eigen::MatrixXd& x);
Prediction predict(const GbdtModel& model, const Eigen::MatrixXd& x);
Prediction predict(const XgbodModel& model, const Eigen::MatrixXd& x);

}  // namespace provsem
