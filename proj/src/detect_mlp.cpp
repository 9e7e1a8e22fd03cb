// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "provsem/blob.hpp"
#include "provsem/detect.hpp"
#include "provsem/error.hpp"
#include "provsem/rng.hpp"

namespace provsem {

using nlohmann::json;

std::vector<int> MlpModel::layer_widths() const {
    std::vector<int> widths;
    if (weights.empty()) return widths;
    widths.push_back(static_cast<int>(weights.front().rows()));
    for (const auto& w : weights) widths.push_back(static_cast<int>(w.cols()));
    return widths;
}

int MlpModel::input_width() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().rows());
}

namespace {

constexpr int kNumClasses = 2;

struct ForwardPass {
    std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
    std::vector<Eigen::MatrixXd> post;  // post-activation (post[0] = input)
    Eigen::MatrixXd probs;
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd p(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            p(i, j) = std::exp(z(i, j) - m);
            sum += p(i, j);
        }
        p.row(i) /= sum;
    }
    return p;
}

ForwardPass forward(const MlpModel& model, const Eigen::MatrixXd& x) {
    ForwardPass f;
    f.post.push_back(x);
    const std::size_t layers = model.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = f.post.back() * model.weights[l];
        z.rowwise() += model.biases[l].transpose();
        f.pre.push_back(z);
        if (l + 1 < layers)
            f.post.push_back(z.cwiseMax(0.0));  // rectifier
        else
            f.post.push_back(z);
    }
    f.probs = softmax_rows(f.pre.back());
    return f;
}

double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const double p = std::max(probs(i, y[static_cast<std::size_t>(i)]), 1e-15);
        loss -= std::log(p);
    }
    return loss / static_cast<double>(probs.rows());
}

MlpGradients backward(const MlpModel& model, const ForwardPass& f, const std::vector<int>& y) {
    const auto n = static_cast<double>(f.probs.rows());
    const std::size_t layers = model.weights.size();
    MlpGradients g;
    g.dw.resize(layers);
    g.db.resize(layers);

    Eigen::MatrixXd delta = f.probs;  // dL/dz for softmax + cross-entropy
    for (Eigen::Index i = 0; i < delta.rows(); ++i)
        delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= n;

    for (std::size_t l = layers; l-- > 0;) {
        g.dw[l] = f.post[l].transpose() * delta;
        g.db[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = delta * model.weights[l].transpose();
            // rectifier mask of the previous layer
            delta = delta.array() * (f.pre[l - 1].array() > 0.0).cast<double>();
        }
    }
    return g;
}

double accuracy_of(const MlpModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y) {
    if (x.rows() == 0) return 0.0;
    const Eigen::MatrixXd probs = forward(model, x).probs;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const int pred = probs(i, 1) >= probs(i, 0) ? 1 : 0;
        if (pred == y[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

}  // namespace

MlpModel train_mlp(const Eigen::MatrixXd& x, const std::vector<int>& y, const MlpConfig& config,
                   std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    if (n == 0 || static_cast<std::size_t>(n) != y.size())
        throw Error(ErrorKind::Data, "train_mlp: features and labels length mismatch");
    if (!x.allFinite()) throw Error(ErrorKind::Data, "train_mlp: non-finite features");
    const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
    if (!has_pos || !has_neg)
        throw Error(ErrorKind::Data, "train_mlp: training set needs both classes");

    MlpModel model;
    model.config = config;
    model.seed = seed;
    Rng rng(seed);

    std::vector<int> widths;
    widths.push_back(static_cast<int>(x.cols()));
    for (int h : config.hidden) widths.push_back(h);
    widths.push_back(kNumClasses);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l], out = widths[l + 1];
        Eigen::MatrixXd w(in, out);
        const double scale = std::sqrt(2.0 / static_cast<double>(in));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(out));
    }

    // held-out fold for best-epoch selection
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto val_n = static_cast<std::size_t>(
        std::floor(config.validation_fraction * static_cast<double>(n)));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_n));
    std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(val_n), order.end());
    if (fit_idx.empty()) fit_idx = order;  // degenerate tiny sets train on everything

    auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& xs,
                      std::vector<int>& ys) {
        xs.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
        ys.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            xs.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
            ys[i] = y[idx[i]];
        }
    };
    Eigen::MatrixXd x_fit, x_val;
    std::vector<int> y_fit, y_val;
    gather(fit_idx, x_fit, y_fit);
    gather(val_idx, x_val, y_val);

    std::vector<Eigen::MatrixXd> vel_w;
    std::vector<Eigen::VectorXd> vel_b;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        vel_w.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
        vel_b.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
    }

    MlpModel best = model;
    best.best_epoch = -1;
    best.best_accuracy = -1.0;

    const int batch = std::max(1, config.batch_size);
    std::vector<std::size_t> epoch_order(fit_idx.size());
    for (std::size_t i = 0; i < epoch_order.size(); ++i) epoch_order[i] = i;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(epoch_order);
        for (std::size_t start = 0; start < epoch_order.size();
             start += static_cast<std::size_t>(batch)) {
            const std::size_t end =
                std::min(start + static_cast<std::size_t>(batch), epoch_order.size());
            Eigen::MatrixXd xb(static_cast<Eigen::Index>(end - start), x.cols());
            std::vector<int> yb(end - start);
            for (std::size_t i = start; i < end; ++i) {
                xb.row(static_cast<Eigen::Index>(i - start)) =
                    x_fit.row(static_cast<Eigen::Index>(epoch_order[i]));
                yb[i - start] = y_fit[epoch_order[i]];
            }
            ForwardPass f = forward(model, xb);
            MlpGradients g = backward(model, f, yb);
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                vel_w[l] = config.momentum * vel_w[l] - config.learning_rate * g.dw[l];
                vel_b[l] = config.momentum * vel_b[l] - config.learning_rate * g.db[l];
                model.weights[l] += vel_w[l];
                model.biases[l] += vel_b[l];
            }
        }
        const double epoch_loss = cross_entropy(forward(model, x_fit).probs, y_fit);
        if (!std::isfinite(epoch_loss))
            throw Error(ErrorKind::Data,
                        "train_mlp: loss diverged at epoch " + std::to_string(epoch));
        const double acc = val_idx.empty() ? accuracy_of(model, x_fit, y_fit)
                                           : accuracy_of(model, x_val, y_val);
        if (acc > best.best_accuracy) {
            best.weights = model.weights;
            best.biases = model.biases;
            best.best_epoch = epoch;
            best.best_accuracy = acc;
        }
    }
    best.config = config;
    best.seed = seed;
    return best;
}

Eigen::MatrixXd mlp_forward_probs(const MlpModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.input_width())
        throw Error(ErrorKind::Data, "mlp: width mismatch " + std::to_string(x.cols()) + " vs " +
                                         std::to_string(model.input_width()));
    if (x.rows() == 0) return Eigen::MatrixXd(0, kNumClasses);
    return forward(model, x).probs;
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y) {
    return cross_entropy(forward(model, x).probs, y);
}

MlpGradients mlp_loss_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                const std::vector<int>& y) {
    ForwardPass f = forward(model, x);
    return backward(model, f, y);
}

Prediction predict(const MlpModel& model, const Eigen::MatrixXd& x) {
    Prediction p;
    const Eigen::MatrixXd probs = mlp_forward_probs(model, x);
    p.scores.resize(probs.rows());
    p.labels.resize(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        p.scores[i] = probs(i, 1);
        p.labels[static_cast<std::size_t>(i)] = p.scores[i] >= kDecisionThreshold ? 1 : 0;
    }
    return p;
}

void save_mlp(const MlpModel& model, const std::filesystem::path& manifest_path,
              const std::filesystem::path& blob_path) {
    BlobWriter blob;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        blob.add_matrix("w" + std::to_string(l), model.weights[l]);
        blob.add_vector("b" + std::to_string(l), model.biases[l]);
    }
    blob.write(blob_path);

    json manifest;
    manifest["version"] = 1;
    manifest["kind"] = "mlp";
    manifest["layer_widths"] = model.layer_widths();
    manifest["seed"] = model.seed;
    manifest["best_epoch"] = model.best_epoch;
    manifest["best_accuracy"] = model.best_accuracy;
    manifest["config"] = {{"hidden", model.config.hidden},
                          {"epochs", model.config.epochs},
                          {"learning_rate", model.config.learning_rate},
                          {"momentum", model.config.momentum},
                          {"batch_size", model.config.batch_size},
                          {"validation_fraction", model.config.validation_fraction}};
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write manifest: " + manifest_path.string());
    out << manifest.dump(2) << '\n';
}

MlpModel load_mlp(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& blob_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::Data, "cannot read manifest: " + manifest_path.string());
    json manifest;
    in >> manifest;
    if (manifest.value("kind", "") != "mlp")
        throw Error(ErrorKind::Data, "manifest kind mismatch: expected mlp");

    MlpModel model;
    model.seed = manifest.at("seed").get<std::uint64_t>();
    model.best_epoch = manifest.at("best_epoch").get<int>();
    model.best_accuracy = manifest.at("best_accuracy").get<double>();
    const auto& cfg = manifest.at("config");
    model.config.hidden = cfg.at("hidden").get<std::vector<int>>();
    model.config.epochs = cfg.at("epochs").get<int>();
    model.config.learning_rate = cfg.at("learning_rate").get<double>();
    model.config.momentum = cfg.at("momentum").get<double>();
    model.config.batch_size = cfg.at("batch_size").get<int>();
    model.config.validation_fraction = cfg.at("validation_fraction").get<double>();

    const auto widths = manifest.at("layer_widths").get<std::vector<int>>();
    BlobReader blob(blob_path);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        model.weights.push_back(blob.matrix("w" + std::to_string(l)));
        model.biases.push_back(blob.vector("b" + std::to_string(l)));
    }
    return model;
}

}  // namespace provsem
