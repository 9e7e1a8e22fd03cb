// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "detect_internal.hpp"
#include "provsem/blob.hpp"
#include "provsem/detect.hpp"
#include "provsem/error.hpp"
#include "provsem/rng.hpp"

namespace provsem {

using nlohmann::json;

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double clamp_prob(double p) { return std::min(1.0 - 1e-15, std::max(1e-15, p)); }

constexpr double kMaxLogOdds = 15.0;

double log_odds(double p) {
    p = std::min(1.0 - 1e-9, std::max(1e-9, p));
    return std::max(-kMaxLogOdds, std::min(kMaxLogOdds, std::log(p / (1.0 - p))));
}

double logistic_loss(const Eigen::VectorXd& margins, const std::vector<int>& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        const double p = clamp_prob(sigmoid(margins[i]));
        loss -= y[static_cast<std::size_t>(i)] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return loss / static_cast<double>(margins.size());
}

// Exact greedy split finder over presorted feature orders. Second-order
// objective: gain = GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l); leaves get the
// Newton step -G/(H+l), clamped.
class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& sorted_idx,
                const GbdtConfig& config)
        : x_(x), sorted_idx_(sorted_idx), config_(config) {}

    RegressionTree build(const Eigen::VectorXd& grad, const Eigen::VectorXd& hess) {
        grad_ = &grad;
        hess_ = &hess;
        RegressionTree tree;
        std::vector<char> in_node(static_cast<std::size_t>(x_.rows()), 1);
        grow(tree, in_node, static_cast<int>(x_.rows()), 0);
        return tree;
    }

private:
    double leaf_value(double g, double h) const {
        const double raw = -g / (h + config_.reg_lambda);
        return std::max(-config_.leaf_clamp, std::min(config_.leaf_clamp, raw));
    }

    int grow(RegressionTree& tree, const std::vector<char>& in_node, int count, int depth) {
        double g_sum = 0.0, h_sum = 0.0;
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            if (!in_node[static_cast<std::size_t>(i)]) continue;
            g_sum += (*grad_)[i];
            h_sum += (*hess_)[i];
        }

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_id)].leaf_value = leaf_value(g_sum, h_sum);

        if (depth >= config_.max_depth || count < 2) return node_id;

        const double parent_obj = g_sum * g_sum / (h_sum + config_.reg_lambda);
        double best_gain = 1e-12;  // require strictly useful splits
        int best_feature = -1;
        double best_threshold = 0.0;

        for (int f = 0; f < x_.cols(); ++f) {
            double gl = 0.0, hl = 0.0;
            int left_count = 0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (int idx : sorted_idx_[static_cast<std::size_t>(f)]) {
                if (!in_node[static_cast<std::size_t>(idx)]) continue;
                const double value = x_(idx, f);
                if (have_prev && value > prev_value && left_count > 0 && left_count < count) {
                    const double gr = g_sum - gl, hr = h_sum - hl;
                    const double gain = gl * gl / (hl + config_.reg_lambda) +
                                        gr * gr / (hr + config_.reg_lambda) - parent_obj;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = f;
                        best_threshold = (prev_value + value) / 2.0;
                    }
                }
                gl += (*grad_)[idx];
                hl += (*hess_)[idx];
                ++left_count;
                prev_value = value;
                have_prev = true;
            }
        }

        if (best_feature < 0) return node_id;

        std::vector<char> left_mask(in_node.size(), 0), right_mask(in_node.size(), 0);
        int left_count = 0, right_count = 0;
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            if (!in_node[static_cast<std::size_t>(i)]) continue;
            if (x_(i, best_feature) < best_threshold) {
                left_mask[static_cast<std::size_t>(i)] = 1;
                ++left_count;
            } else {
                right_mask[static_cast<std::size_t>(i)] = 1;
                ++right_count;
            }
        }

        const int left_id = grow(tree, left_mask, left_count, depth + 1);
        const int right_id = grow(tree, right_mask, right_count, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<std::vector<int>>& sorted_idx_;
    const GbdtConfig& config_;
    const Eigen::VectorXd* grad_ = nullptr;
    const Eigen::VectorXd* hess_ = nullptr;
};

std::vector<std::vector<int>> presort_features(const Eigen::MatrixXd& x) {
    std::vector<std::vector<int>> sorted_idx(static_cast<std::size_t>(x.cols()));
    for (int f = 0; f < x.cols(); ++f) {
        auto& idx = sorted_idx[static_cast<std::size_t>(f)];
        idx.resize(static_cast<std::size_t>(x.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return x(a, f) < x(b, f); });
    }
    return sorted_idx;
}

void check_training_inputs(const Eigen::MatrixXd& x, const std::vector<int>& y,
                           const char* who) {
    if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorKind::Data, std::string(who) + ": features and labels length mismatch");
    if (!x.allFinite()) throw Error(ErrorKind::Data, std::string(who) + ": non-finite features");
    const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
    if (!has_pos || !has_neg)
        throw Error(ErrorKind::Data, std::string(who) + ": training set needs both classes");
}

Eigen::VectorXd margins_of(const GbdtModel& model, const Eigen::MatrixXd& x) {
    Eigen::VectorXd m = Eigen::VectorXd::Constant(x.rows(), model.base_score);
    for (const auto& tree : model.trees)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            m[i] += model.config.learning_rate * tree.predict(x.row(i));
    return m;
}

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(node)];
        node = row[n.feature] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].leaf_value;
}

GbdtModel train_gbdt(const Eigen::MatrixXd& x, const std::vector<int>& y,
                     const GbdtConfig& config, std::uint64_t seed) {
    (void)seed;  // training is deterministic; seed kept for the shared contract
    if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorKind::Data, "train_gbdt: features and labels length mismatch");
    if (!x.allFinite()) throw Error(ErrorKind::Data, "train_gbdt: non-finite features");

    GbdtModel model;
    model.config = config;
    model.n_features = static_cast<int>(x.cols());
    const auto n = static_cast<double>(x.rows());
    const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
    model.base_score = log_odds(pos / n);

    const auto sorted_idx = presort_features(x);
    Eigen::VectorXd margins = Eigen::VectorXd::Constant(x.rows(), model.base_score);
    TreeBuilder builder(x, sorted_idx, config);

    for (int round = 0; round < config.rounds; ++round) {
        Eigen::VectorXd grad(x.rows()), hess(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double p = sigmoid(margins[i]);
            grad[i] = p - static_cast<double>(y[static_cast<std::size_t>(i)]);
            hess[i] = std::max(p * (1.0 - p), 1e-16);
        }
        RegressionTree tree = builder.build(grad, hess);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            margins[i] += config.learning_rate * tree.predict(x.row(i));
        model.trees.push_back(std::move(tree));
        const double loss = logistic_loss(margins, y);
        if (!std::isfinite(loss))
            throw Error(ErrorKind::Data,
                        "train_gbdt: loss diverged at round " + std::to_string(round));
        model.train_losses.push_back(loss);
    }
    return model;
}

GbdtModel train_gbdt_grid(const Eigen::MatrixXd& x, const std::vector<int>& y,
                          const GbdtGrid& grid, const GbdtConfig& base, std::uint64_t seed) {
    check_training_inputs(x, y, "train_gbdt_grid");

    const int folds = std::max(2, grid.cv_folds);
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = static_cast<int>(i % folds);

    double best_acc = -1.0;
    GbdtConfig best_config = base;
    for (int depth : grid.depths) {
        for (int rounds : grid.rounds) {
            for (double lr : grid.learning_rates) {
                GbdtConfig candidate = base;
                candidate.max_depth = depth;
                candidate.rounds = rounds;
                candidate.learning_rate = lr;

                double acc_sum = 0.0;
                int usable_folds = 0;
                for (int f = 0; f < folds; ++f) {
                    std::vector<std::size_t> train_idx, test_idx;
                    for (std::size_t i = 0; i < n; ++i)
                        (fold_of[i] == f ? test_idx : train_idx).push_back(i);
                    if (train_idx.empty() || test_idx.empty()) continue;
                    std::vector<int> y_train, y_test;
                    Eigen::MatrixXd x_train(static_cast<Eigen::Index>(train_idx.size()), x.cols());
                    Eigen::MatrixXd x_test(static_cast<Eigen::Index>(test_idx.size()), x.cols());
                    for (std::size_t i = 0; i < train_idx.size(); ++i) {
                        x_train.row(static_cast<Eigen::Index>(i)) =
                            x.row(static_cast<Eigen::Index>(train_idx[i]));
                        y_train.push_back(y[train_idx[i]]);
                    }
                    for (std::size_t i = 0; i < test_idx.size(); ++i) {
                        x_test.row(static_cast<Eigen::Index>(i)) =
                            x.row(static_cast<Eigen::Index>(test_idx[i]));
                        y_test.push_back(y[test_idx[i]]);
                    }
                    if (std::find(y_train.begin(), y_train.end(), 1) == y_train.end() ||
                        std::find(y_train.begin(), y_train.end(), 0) == y_train.end())
                        continue;
                    const GbdtModel fold_model = train_gbdt(x_train, y_train, candidate, seed);
                    const Eigen::VectorXd scores = gbdt_scores(fold_model, x_test);
                    std::size_t correct = 0;
                    for (Eigen::Index i = 0; i < scores.size(); ++i) {
                        const int pred = scores[i] >= kDecisionThreshold ? 1 : 0;
                        if (pred == y_test[static_cast<std::size_t>(i)]) ++correct;
                    }
                    acc_sum += static_cast<double>(correct) / static_cast<double>(test_idx.size());
                    ++usable_folds;
                }
                const double acc = usable_folds > 0 ? acc_sum / usable_folds : 0.0;
                if (acc > best_acc) {  // ties keep the first grid entry
                    best_acc = acc;
                    best_config = candidate;
                }
            }
        }
    }
    return train_gbdt(x, y, best_config, seed);
}

Eigen::VectorXd gbdt_scores(const GbdtModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.n_features)
        throw Error(ErrorKind::Data, "gbdt: width mismatch " + std::to_string(x.cols()) +
                                         " vs " + std::to_string(model.n_features));
    const Eigen::VectorXd m = margins_of(model, x);
    Eigen::VectorXd scores(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) scores[i] = sigmoid(m[i]);
    return scores;
}

Prediction predict(const GbdtModel& model, const Eigen::MatrixXd& x) {
    Prediction p;
    p.scores = gbdt_scores(model, x);
    p.labels.resize(static_cast<std::size_t>(p.scores.size()));
    for (Eigen::Index i = 0; i < p.scores.size(); ++i)
        p.labels[static_cast<std::size_t>(i)] = p.scores[i] >= kDecisionThreshold ? 1 : 0;
    return p;
}

namespace {

json tree_to_json(const RegressionTree& tree) {
    json nodes = json::array();
    for (const auto& n : tree.nodes)
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"leaf_value", n.leaf_value}});
    return nodes;
}

RegressionTree tree_from_json(const json& nodes) {
    RegressionTree tree;
    for (const auto& n : nodes) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.leaf_value = n.at("leaf_value").get<double>();
        tree.nodes.push_back(node);
    }
    return tree;
}

}  // namespace

json gbdt_manifest_json(const GbdtModel& model) {
    json manifest;
    manifest["version"] = 1;
    manifest["kind"] = "gbdt";
    manifest["base_score"] = model.base_score;
    manifest["n_features"] = model.n_features;
    manifest["config"] = {{"rounds", model.config.rounds},
                          {"max_depth", model.config.max_depth},
                          {"learning_rate", model.config.learning_rate},
                          {"reg_lambda", model.config.reg_lambda},
                          {"leaf_clamp", model.config.leaf_clamp}};
    json trees = json::array();
    for (const auto& t : model.trees) trees.push_back(tree_to_json(t));
    manifest["trees"] = trees;
    return manifest;
}

GbdtModel gbdt_from_manifest_json(const json& manifest) {
    GbdtModel model;
    model.base_score = manifest.at("base_score").get<double>();
    model.n_features = manifest.at("n_features").get<int>();
    const auto& cfg = manifest.at("config");
    model.config.rounds = cfg.at("rounds").get<int>();
    model.config.max_depth = cfg.at("max_depth").get<int>();
    model.config.learning_rate = cfg.at("learning_rate").get<double>();
    model.config.reg_lambda = cfg.at("reg_lambda").get<double>();
    model.config.leaf_clamp = cfg.at("leaf_clamp").get<double>();
    for (const auto& t : manifest.at("trees")) model.trees.push_back(tree_from_json(t));
    return model;
}

void save_gbdt(const GbdtModel& model, const std::filesystem::path& manifest_path,
               const std::filesystem::path& blob_path) {
    BlobWriter blob;
    Eigen::VectorXd losses(static_cast<Eigen::Index>(model.train_losses.size()));
    for (std::size_t i = 0; i < model.train_losses.size(); ++i)
        losses[static_cast<Eigen::Index>(i)] = model.train_losses[i];
    blob.add_vector("train_losses", losses);
    blob.write(blob_path);

    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write manifest: " + manifest_path.string());
    out << gbdt_manifest_json(model).dump(2) << '\n';
}

GbdtModel load_gbdt(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& blob_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::Data, "cannot read manifest: " + manifest_path.string());
    json manifest;
    in >> manifest;
    if (manifest.value("kind", "") != "gbdt")
        throw Error(ErrorKind::Data, "manifest kind mismatch: expected gbdt");
    GbdtModel model = gbdt_from_manifest_json(manifest);
    BlobReader blob(blob_path);
    const Eigen::VectorXd losses = blob.vector("train_losses");
    model.train_losses.assign(losses.data(), losses.data() + losses.size());
    return model;
}

}  // namespace provsem
