// SPDX-License-Identifier: Apache-2.0
#include "provsem/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "provsem/error.hpp"
#include "provsem/rng.hpp"

namespace provsem {

using nlohmann::json;

Metrics confusion_metrics(const std::vector<int>& labels, const std::vector<int>& predictions) {
    if (labels.size() != predictions.size() || labels.empty())
        throw Error(ErrorKind::Data, "confusion_metrics: length mismatch or empty input");

    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual = labels[i] == 1;
        const bool predicted = predictions[i] == 1;
        if (actual && predicted) ++m.tp;
        else if (!actual && predicted) ++m.fp;
        else if (!actual && !predicted) ++m.tn;
        else ++m.fn;
    }
    const auto total = static_cast<double>(labels.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / total;
    if (m.tp + m.fp > 0) {
        m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    } else {
        m.precision = 0.0;
        m.precision_defined = false;
    }
    if (m.tp + m.fn > 0) {
        m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    } else {
        m.recall = 0.0;
        m.recall_defined = false;
    }
    if (m.precision + m.recall > 0.0) {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f1 = 0.0;
        m.f1_defined = false;
    }
    return m;
}

RocCurve roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size() || labels.empty())
        throw Error(ErrorKind::Data, "roc_auc: length mismatch or empty input");
    long p_total = 0, n_total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(scores[i]))
            throw Error(ErrorKind::Data, "roc_auc: non-finite score at " + std::to_string(i));
        (labels[i] == 1 ? p_total : n_total)++;
    }
    if (p_total == 0 || n_total == 0)
        throw Error(ErrorKind::Data, "roc_auc: both classes must be present");

    // distinct scores descending, ties grouped into one step
    std::map<double, std::pair<long, long>, std::greater<double>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& [pos, neg] = groups[scores[i]];
        (labels[i] == 1 ? pos : neg)++;
    }

    RocCurve curve;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    // Both AUC routes reduce to an integer numerator over 2*N*P, so they agree
    // exactly; computed independently as a self-check.
    long tp = 0, fp = 0;
    long long trap_num = 0;  // sum of dFP * (TP_prev + TP_cur)
    for (const auto& [score, counts] : groups) {
        const auto [pos, neg] = counts;
        trap_num += static_cast<long long>(neg) * (2 * tp + pos);
        tp += pos;
        fp += neg;
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_total));
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(p_total));
        curve.thresholds.push_back(score);
    }

    long long rank_num = 0;  // 2*U: pos>neg pairs count twice, ties once
    long neg_below = n_total;
    for (const auto& [score, counts] : groups) {
        const auto [pos, neg] = counts;
        neg_below -= neg;
        rank_num += static_cast<long long>(pos) * (2 * neg_below + neg);
    }

    const auto denom = 2.0 * static_cast<double>(n_total) * static_cast<double>(p_total);
    curve.auc = static_cast<double>(trap_num) / denom;
    curve.auc_rank = static_cast<double>(rank_num) / denom;
    if (std::abs(curve.auc - curve.auc_rank) > 1e-12)
        throw Error(ErrorKind::Data, "roc_auc: dual AUC computation disagreement");
    return curve;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split_indices(
    const std::vector<Label>& labels, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorKind::Config, "stratified_split: fraction must be in (0, 1)");

    std::vector<std::size_t> benign_idx, adversary_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == Label::Benign) benign_idx.push_back(i);
        else if (labels[i] == Label::Adversary) adversary_idx.push_back(i);
        else throw Error(ErrorKind::Data, "stratified_split: unlabeled event at " +
                                              std::to_string(i));
    }
    if (benign_idx.size() < 2 || adversary_idx.size() < 2)
        throw Error(ErrorKind::Data, "stratified_split: each class needs at least 2 members");

    Rng rng(seed);
    std::vector<std::size_t> train, test;
    for (auto* cls : {&benign_idx, &adversary_idx}) {
        rng.shuffle(*cls);
        // floor with a nudge so fractions that are mathematically integral
        // stay integral; the remainder goes to the test side
        const auto train_n = static_cast<std::size_t>(std::floor(
            train_fraction * static_cast<double>(cls->size()) + 1e-9));
        for (std::size_t i = 0; i < cls->size(); ++i)
            (i < train_n ? train : test).push_back((*cls)[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

namespace {

LabeledEventSet subset_of(const LabeledEventSet& ds, const std::vector<std::size_t>& idx,
                          SplitTag tag) {
    LabeledEventSet out;
    out.split_tag = tag;
    out.events.reserve(idx.size());
    for (auto i : idx) {
        out.events.push_back(ds.events[i]);
        out.labels.push_back(ds.labels[i]);
        out.scenario_ids.push_back(ds.scenario_ids[i]);
    }
    return out;
}

}  // namespace

std::pair<LabeledEventSet, LabeledEventSet> stratified_split(const LabeledEventSet& ds,
                                                             double train_fraction,
                                                             std::uint64_t seed) {
    auto [train_idx, test_idx] = stratified_split_indices(ds.labels, train_fraction, seed);
    return {subset_of(ds, train_idx, SplitTag::Train), subset_of(ds, test_idx, SplitTag::Test)};
}

const char* to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::SupervisedMlp: return "supervised_mlp";
        case ExperimentMode::SupervisedGbdt: return "supervised_gbdt";
        case ExperimentMode::SemisupervisedXgbod: return "semisupervised_xgbod";
        case ExperimentMode::UnseenAttack: return "unseen_attack";
    }
    return "unknown";
}

std::optional<ExperimentMode> experiment_mode_from_string(std::string_view s) {
    if (s == "supervised_mlp") return ExperimentMode::SupervisedMlp;
    if (s == "supervised_gbdt") return ExperimentMode::SupervisedGbdt;
    if (s == "semisupervised_xgbod") return ExperimentMode::SemisupervisedXgbod;
    if (s == "unseen_attack") return ExperimentMode::UnseenAttack;
    return std::nullopt;
}

namespace {

json roc_to_json(const RocCurve& roc) {
    json j;
    j["auc"] = roc.auc;
    j["auc_rank"] = roc.auc_rank;
    json points = json::array();
    for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
        const double t = roc.thresholds[i];
        points.push_back({{"threshold", std::isinf(t) ? json("inf") : json(t)},
                          {"fpr", roc.fpr[i]},
                          {"tpr", roc.tpr[i]}});
    }
    j["points"] = points;
    return j;
}

struct IndexedData {
    Eigen::MatrixXd x;
    std::vector<int> y;  // 0 benign, 1 adversary
};

IndexedData gather(const ExperimentInputs& inputs, const std::vector<std::size_t>& idx) {
    IndexedData d;
    d.x.resize(static_cast<Eigen::Index>(idx.size()), inputs.features.cols());
    d.y.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        d.x.row(static_cast<Eigen::Index>(i)) =
            inputs.features.row(static_cast<Eigen::Index>(idx[i]));
        d.y.push_back(inputs.labels[idx[i]] == Label::Adversary ? 1 : 0);
    }
    return d;
}

Eigen::MatrixXd benign_rows_of(const IndexedData& d) {
    const long n_benign = std::count(d.y.begin(), d.y.end(), 0);
    Eigen::MatrixXd out(n_benign, d.x.cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < d.y.size(); ++i)
        if (d.y[i] == 0) out.row(r++) = d.x.row(static_cast<Eigen::Index>(i));
    return out;
}

Prediction predict_with(ExperimentMode detector, const IndexedData& train,
                        const IndexedData& test, const ExperimentConfig& config,
                        std::uint64_t train_seed) {
    switch (detector) {
        case ExperimentMode::SupervisedMlp: {
            const MlpModel model = train_mlp(train.x, train.y, config.mlp, train_seed);
            return predict(model, test.x);
        }
        case ExperimentMode::SupervisedGbdt: {
            const GbdtModel model = train_gbdt(train.x, train.y, config.gbdt, train_seed);
            return predict(model, test.x);
        }
        case ExperimentMode::SemisupervisedXgbod:
        case ExperimentMode::UnseenAttack: {
            XgbodConfig xc = config.xgbod;
            const XgbodModel model =
                train_xgbod(train.x, train.y, benign_rows_of(train), xc, train_seed);
            return predict(model, test.x);
        }
    }
    throw Error(ErrorKind::Config, "unknown detector mode");
}

}  // namespace

json ExperimentReport::to_json() const {
    json j;
    j["version"] = 1;
    j["mode"] = mode;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["metrics"] = {{"accuracy", metrics.accuracy},
                    {"precision", metrics.precision},
                    {"recall", metrics.recall},
                    {"f1", metrics.f1},
                    {"tp", metrics.tp},
                    {"fp", metrics.fp},
                    {"tn", metrics.tn},
                    {"fn", metrics.fn},
                    {"precision_defined", metrics.precision_defined},
                    {"recall_defined", metrics.recall_defined},
                    {"f1_defined", metrics.f1_defined}};
    if (roc) j["roc"] = roc_to_json(*roc);
    return j;
}

ExperimentReport run_experiment(const ExperimentInputs& inputs, ExperimentMode mode,
                                const ExperimentConfig& config, std::uint64_t seed) {
    const std::size_t n = inputs.labels.size();
    if (static_cast<std::size_t>(inputs.features.rows()) != n ||
        inputs.scenario_ids.size() != n)
        throw Error(ErrorKind::Data, "run_experiment: parallel arrays length mismatch");

    ExperimentReport report;
    report.mode = to_string(mode);
    report.config_hash = config.config_hash;
    report.seed = seed;

    std::vector<std::size_t> train_idx, test_idx;
    if (mode == ExperimentMode::UnseenAttack) {
        if (config.holdout_scenario.empty())
            throw Error(ErrorKind::Config, "unseen_attack: holdout_scenario not set");
        std::vector<std::size_t> benign_idx, adv_holdout, adv_train;
        for (std::size_t i = 0; i < n; ++i) {
            if (inputs.labels[i] == Label::Benign) {
                benign_idx.push_back(i);
            } else if (inputs.labels[i] == Label::Adversary) {
                (inputs.scenario_ids[i] == config.holdout_scenario ? adv_holdout : adv_train)
                    .push_back(i);
            }
        }
        if (adv_holdout.empty())
            throw Error(ErrorKind::Config,
                        "unseen_attack: scenario '" + config.holdout_scenario +
                            "' not present in the corpus");
        const std::size_t per_class = config.unseen_test_per_class;
        if (adv_holdout.size() < per_class)
            throw Error(ErrorKind::Data,
                        "unseen_attack: scenario has " + std::to_string(adv_holdout.size()) +
                            " events, need " + std::to_string(per_class));
        if (benign_idx.size() < per_class + 1)
            throw Error(ErrorKind::Data, "unseen_attack: not enough benign events to hold out " +
                                             std::to_string(per_class));

        // benign test events are disjoint from the training benign set
        Rng rng(seed);
        auto benign_pick = rng.sample_without_replacement(benign_idx.size(), per_class);
        std::sort(benign_pick.begin(), benign_pick.end());
        std::vector<char> benign_is_test(benign_idx.size(), 0);
        for (auto i : benign_pick) benign_is_test[i] = 1;
        auto adv_pick = rng.sample_without_replacement(adv_holdout.size(), per_class);
        std::sort(adv_pick.begin(), adv_pick.end());

        for (std::size_t i = 0; i < benign_idx.size(); ++i)
            (benign_is_test[i] ? test_idx : train_idx).push_back(benign_idx[i]);
        train_idx.insert(train_idx.end(), adv_train.begin(), adv_train.end());
        for (auto i : adv_pick) test_idx.push_back(adv_holdout[i]);
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
    } else {
        std::tie(train_idx, test_idx) =
            stratified_split_indices(inputs.labels, config.train_fraction, config.split_seed);
    }

    const IndexedData train = gather(inputs, train_idx);
    const IndexedData test = gather(inputs, test_idx);

    const ExperimentMode detector =
        mode == ExperimentMode::UnseenAttack ? config.unseen_detector : mode;
    const Prediction pred = predict_with(detector, train, test, config, config.train_seed);

    report.metrics = confusion_metrics(test.y, pred.labels);
    std::vector<double> scores(pred.scores.data(), pred.scores.data() + pred.scores.size());
    report.roc = roc_auc(test.y, scores);
    return report;
}

}  // namespace provsem
