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
#include "provsem/kernels.hpp"

namespace provsem {

using nlohmann::json;

namespace {

// k nearest reference indices by (distance, index); dist2 is one row of a
// squared-distance matrix against the reference set.
std::vector<int> k_nearest(const Eigen::RowVectorXd& dist2, int k) {
    std::vector<int> idx(static_cast<std::size_t>(dist2.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        if (dist2[a] != dist2[b]) return dist2[a] < dist2[b];
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

struct LofReference {
    Eigen::MatrixXd dist;        // pairwise distances within the reference
    Eigen::VectorXd k_distance;  // distance to the k-th neighbor (self excluded)
    Eigen::VectorXd lrd;         // local reachability density
    std::vector<std::vector<int>> neighbors;
};

constexpr double kLrdEpsilon = 1e-12;

LofReference fit_lof_reference(const Eigen::MatrixXd& reference, int k) {
    const Eigen::Index n = reference.rows();
    LofReference ref;
    ref.dist = kernels::squared_distances(reference, reference).cwiseSqrt();
    ref.k_distance.resize(n);
    ref.lrd.resize(n);
    ref.neighbors.resize(static_cast<std::size_t>(n));

    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<int> idx;
        idx.reserve(static_cast<std::size_t>(n - 1));
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) idx.push_back(static_cast<int>(j));
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (ref.dist(i, a) != ref.dist(i, b)) return ref.dist(i, a) < ref.dist(i, b);
            return a < b;
        });
        idx.resize(static_cast<std::size_t>(k));
        ref.k_distance[i] = ref.dist(i, idx.back());
        ref.neighbors[static_cast<std::size_t>(i)] = std::move(idx);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        double reach_sum = 0.0;
        for (int j : ref.neighbors[static_cast<std::size_t>(i)])
            reach_sum += std::max(ref.k_distance[j], ref.dist(i, j));
        ref.lrd[i] = static_cast<double>(k) / (reach_sum + kLrdEpsilon);
    }
    return ref;
}

struct HbosReference {
    int dims = 0;
    int bins = 0;
    std::vector<double> mins, maxs;          // per selected dim
    std::vector<std::vector<long>> counts;   // per selected dim
    long n = 0;
};

HbosReference fit_hbos_reference(const Eigen::MatrixXd& reference, int bins, int max_dims) {
    HbosReference h;
    h.dims = static_cast<int>(std::min<Eigen::Index>(reference.cols(), max_dims));
    h.bins = bins;
    h.n = reference.rows();
    h.mins.resize(static_cast<std::size_t>(h.dims));
    h.maxs.resize(static_cast<std::size_t>(h.dims));
    h.counts.assign(static_cast<std::size_t>(h.dims),
                    std::vector<long>(static_cast<std::size_t>(bins), 0));
    for (int d = 0; d < h.dims; ++d) {
        h.mins[static_cast<std::size_t>(d)] = reference.col(d).minCoeff();
        h.maxs[static_cast<std::size_t>(d)] = reference.col(d).maxCoeff();
    }
    for (Eigen::Index i = 0; i < reference.rows(); ++i) {
        for (int d = 0; d < h.dims; ++d) {
            const double lo = h.mins[static_cast<std::size_t>(d)];
            const double hi = h.maxs[static_cast<std::size_t>(d)];
            int b = 0;
            if (hi > lo) {
                b = static_cast<int>(std::floor((reference(i, d) - lo) / (hi - lo) *
                                                static_cast<double>(bins)));
                b = std::clamp(b, 0, bins - 1);
            }
            ++h.counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(b)];
        }
    }
    return h;
}

// Laplace-smoothed negative log density; out-of-range values clamp to the
// edge bins. Higher = more anomalous.
double hbos_score(const HbosReference& h, const Eigen::RowVectorXd& row) {
    double score = 0.0;
    for (int d = 0; d < h.dims; ++d) {
        const double lo = h.mins[static_cast<std::size_t>(d)];
        const double hi = h.maxs[static_cast<std::size_t>(d)];
        int b = 0;
        if (hi > lo) {
            b = static_cast<int>(
                std::floor((row[d] - lo) / (hi - lo) * static_cast<double>(h.bins)));
            b = std::clamp(b, 0, h.bins - 1);
        }
        const long count = h.counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(b)];
        score -= std::log(static_cast<double>(count + 1) /
                          static_cast<double>(h.n + h.bins));
    }
    return score;
}

}  // namespace

OutlierScoreSet unsupervised_score_features(const Eigen::MatrixXd& reference,
                                            const Eigen::MatrixXd& x,
                                            const ScorerConfig& config) {
    if (reference.rows() == 0)
        throw Error(ErrorKind::Config, "unsupervised_score_features: empty reference set");
    if (x.cols() != reference.cols() && x.rows() > 0)
        throw Error(ErrorKind::Data, "unsupervised_score_features: width mismatch");

    OutlierScoreSet out;
    out.columns = config.scorers;
    out.scores.resize(x.rows(), static_cast<Eigen::Index>(config.scorers.size()));
    if (config.scorers.empty() || x.rows() == 0) return out;

    bool wants_knn = false, wants_lof = false, wants_hbos = false;
    for (const auto& name : config.scorers) {
        if (name == "knn_max" || name == "knn_mean") wants_knn = true;
        else if (name == "lof") wants_lof = true;
        else if (name == "hbos") wants_hbos = true;
        else throw Error(ErrorKind::Config, "unknown scorer: " + name);
    }

    if (wants_knn && config.knn_k >= reference.rows())
        throw Error(ErrorKind::Config, "knn k must be smaller than the reference size");
    if (wants_lof && config.lof_k >= reference.rows())
        throw Error(ErrorKind::Config, "lof k must be smaller than the reference size");

    Eigen::MatrixXd cross_dist;
    if (wants_knn || wants_lof)
        cross_dist = kernels::squared_distances(x, reference).cwiseSqrt();

    LofReference lof_ref;
    if (wants_lof) lof_ref = fit_lof_reference(reference, config.lof_k);
    HbosReference hbos_ref;
    if (wants_hbos) hbos_ref = fit_hbos_reference(reference, config.hbos_bins, config.hbos_max_dims);

#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < config.scorers.size(); ++c) {
            const std::string& name = config.scorers[c];
            double value = 0.0;
            if (name == "knn_max" || name == "knn_mean") {
                const auto nn = k_nearest(cross_dist.row(i), config.knn_k);
                if (name == "knn_max") {
                    value = cross_dist(i, nn.back());
                } else {
                    double s = 0.0;
                    for (int j : nn) s += cross_dist(i, j);
                    value = s / static_cast<double>(nn.size());
                }
            } else if (name == "lof") {
                const auto nn = k_nearest(cross_dist.row(i), config.lof_k);
                double reach_sum = 0.0;
                double lrd_sum = 0.0;
                for (int j : nn) {
                    reach_sum += std::max(lof_ref.k_distance[j], cross_dist(i, j));
                    lrd_sum += lof_ref.lrd[j];
                }
                const double lrd_q =
                    static_cast<double>(config.lof_k) / (reach_sum + kLrdEpsilon);
                value = lrd_sum / (static_cast<double>(config.lof_k) * lrd_q);
            } else {  // hbos; names validated above
                value = hbos_score(hbos_ref, x.row(i));
            }
            out.scores(i, static_cast<Eigen::Index>(c)) = value;
        }
    }
    if (!out.scores.allFinite())
        throw Error(ErrorKind::Data, "unsupervised_score_features: non-finite score");
    return out;
}

namespace {

Eigen::MatrixXd augment_features(const Eigen::MatrixXd& x, const Eigen::MatrixXd& scores) {
    if (scores.cols() == 0) return x;
    Eigen::MatrixXd out(x.rows(), x.cols() + scores.cols());
    out.leftCols(x.cols()) = x;
    out.rightCols(scores.cols()) = scores;
    return out;
}

}  // namespace

XgbodModel train_xgbod(const Eigen::MatrixXd& x, const std::vector<int>& y,
                       const Eigen::MatrixXd& reference, const XgbodConfig& config,
                       std::uint64_t seed) {
    XgbodModel model;
    model.scorers = config.scorers;
    model.reference = reference;
    const OutlierScoreSet scores = unsupervised_score_features(reference, x, config.scorers);
    const Eigen::MatrixXd augmented = augment_features(x, scores.scores);
    model.combiner = train_gbdt(augmented, y, config.combiner, seed);
    return model;
}

Eigen::VectorXd xgbod_scores(const XgbodModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.reference.cols())
        throw Error(ErrorKind::Data, "xgbod: width mismatch " + std::to_string(x.cols()) +
                                         " vs " + std::to_string(model.reference.cols()));
    const OutlierScoreSet scores = unsupervised_score_features(model.reference, x, model.scorers);
    return gbdt_scores(model.combiner, augment_features(x, scores.scores));
}

Prediction predict(const XgbodModel& model, const Eigen::MatrixXd& x) {
    Prediction p;
    p.scores = xgbod_scores(model, x);
    p.labels.resize(static_cast<std::size_t>(p.scores.size()));
    for (Eigen::Index i = 0; i < p.scores.size(); ++i)
        p.labels[static_cast<std::size_t>(i)] = p.scores[i] >= kDecisionThreshold ? 1 : 0;
    return p;
}

void save_xgbod(const XgbodModel& model, const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path) {
    BlobWriter blob;
    blob.add_matrix("reference", model.reference);
    Eigen::VectorXd losses(static_cast<Eigen::Index>(model.combiner.train_losses.size()));
    for (std::size_t i = 0; i < model.combiner.train_losses.size(); ++i)
        losses[static_cast<Eigen::Index>(i)] = model.combiner.train_losses[i];
    blob.add_vector("train_losses", losses);
    blob.write(blob_path);

    json manifest;
    manifest["version"] = 1;
    manifest["kind"] = "xgbod";
    manifest["scorers"] = {{"scorers", model.scorers.scorers},
                           {"knn_k", model.scorers.knn_k},
                           {"lof_k", model.scorers.lof_k},
                           {"hbos_bins", model.scorers.hbos_bins},
                           {"hbos_max_dims", model.scorers.hbos_max_dims}};
    manifest["combiner"] = gbdt_manifest_json(model.combiner);
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write manifest: " + manifest_path.string());
    out << manifest.dump(2) << '\n';
}

XgbodModel load_xgbod(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& blob_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::Data, "cannot read manifest: " + manifest_path.string());
    json manifest;
    in >> manifest;
    if (manifest.value("kind", "") != "xgbod")
        throw Error(ErrorKind::Data, "manifest kind mismatch: expected xgbod");

    XgbodModel model;
    const auto& sc = manifest.at("scorers");
    model.scorers.scorers = sc.at("scorers").get<std::vector<std::string>>();
    model.scorers.knn_k = sc.at("knn_k").get<int>();
    model.scorers.lof_k = sc.at("lof_k").get<int>();
    model.scorers.hbos_bins = sc.at("hbos_bins").get<int>();
    model.scorers.hbos_max_dims = sc.at("hbos_max_dims").get<int>();
    model.combiner = gbdt_from_manifest_json(manifest.at("combiner"));

    BlobReader blob(blob_path);
    model.reference = blob.matrix("reference");
    const Eigen::VectorXd losses = blob.vector("train_losses");
    model.combiner.train_losses.assign(losses.data(), losses.data() + losses.size());
    return model;
}

}  // namespace provsem
