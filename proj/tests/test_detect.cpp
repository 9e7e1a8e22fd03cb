// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "provsem/detect.hpp"
#include "provsem/error.hpp"
#include "provsem/eval.hpp"
#include "provsem/rng.hpp"

using namespace provsem;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("provsem_detect_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

TEST_CASE("mlp fits a two-point separable set perfectly") {
    Eigen::MatrixXd x(2, 2);
    x << -1.0, 0.0, 1.0, 0.0;
    const std::vector<int> y = {0, 1};
    MlpConfig config;
    config.hidden = {8};
    config.batch_size = 2;
    const MlpModel model = train_mlp(x, y, config, 1);
    const Prediction p = predict(model, x);
    CHECK(p.labels == y);
    CHECK(model.best_accuracy == 1.0);
}

TEST_CASE("mlp analytic gradients match central finite differences") {
    auto [x, y] = oracle::gaussian_clusters(3, 4, 2.0, 1.0, 5);
    // 3-sample batch as specified
    Eigen::MatrixXd xb = x.topRows(3);
    std::vector<int> yb = {y[0], y[1], y[2]};
    yb[2] = 1;  // ensure both classes in the batch

    MlpConfig config;
    config.hidden = {6, 4};
    MlpModel model = train_mlp(xb, yb, config, 3);  // start from trained weights

    const MlpGradients grads = mlp_loss_gradients(model, xb, yb);
    const double h = 1e-5;
    Rng rng(17);
    double max_rel_err = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        const auto layer = rng.bounded(model.weights.size());
        const auto r = static_cast<Eigen::Index>(rng.bounded(
            static_cast<std::uint64_t>(model.weights[layer].rows())));
        const auto c = static_cast<Eigen::Index>(rng.bounded(
            static_cast<std::uint64_t>(model.weights[layer].cols())));

        MlpModel plus = model, minus = model;
        plus.weights[layer](r, c) += h;
        minus.weights[layer](r, c) -= h;
        const double numeric = (mlp_loss(plus, xb, yb) - mlp_loss(minus, xb, yb)) / (2.0 * h);
        const double analytic = grads.dw[layer](r, c);
        const double rel =
            std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
        max_rel_err = std::max(max_rel_err, rel);
    }
    CHECK(max_rel_err < 1e-4);
}

TEST_CASE("mlp training is deterministic given the seed") {
    auto [x, y] = oracle::gaussian_clusters(40, 6, 3.0, 1.0, 11);
    MlpConfig config;
    config.epochs = 10;
    const MlpModel a = train_mlp(x, y, config, 42);
    const MlpModel b = train_mlp(x, y, config, 42);
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        CHECK(a.weights[l] == b.weights[l]);  // bitwise
        CHECK(a.biases[l] == b.biases[l]);
    }
    const MlpModel c = train_mlp(x, y, config, 43);
    CHECK(a.weights[0] != c.weights[0]);
}

TEST_CASE("mlp rejects single-class training sets") {
    Eigen::MatrixXd x(3, 2);
    x << 1, 2, 3, 4, 5, 6;
    CHECK_THROWS_AS(train_mlp(x, {1, 1, 1}, MlpConfig{}, 1), Error);
}

TEST_CASE("mlp probabilities sum to one") {
    auto [x, y] = oracle::gaussian_clusters(25, 5, 2.0, 1.0, 23);
    MlpConfig config;
    config.epochs = 5;
    const MlpModel model = train_mlp(x, y, config, 7);
    const Eigen::MatrixXd probs = mlp_forward_probs(model, x);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        CHECK(std::abs(probs.row(i).sum() - 1.0) <= 1e-9);
        CHECK(probs(i, 0) >= 0.0);
        CHECK(probs(i, 1) >= 0.0);
    }
}

TEST_CASE("mlp divergence is reported with the epoch") {
    Eigen::MatrixXd x(4, 2);
    x << 1e8, -1e8, -1e8, 1e8, 1e8, 1e8, -1e8, -1e8;
    const std::vector<int> y = {0, 1, 0, 1};
    MlpConfig config;
    config.learning_rate = 1e10;
    config.epochs = 10;
    config.validation_fraction = 0.0;
    try {
        train_mlp(x, y, config, 1);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("mlp save/load preserves predictions exactly") {
    auto [x, y] = oracle::gaussian_clusters(30, 4, 3.0, 1.0, 77);
    MlpConfig config;
    config.epochs = 8;
    const MlpModel model = train_mlp(x, y, config, 5);
    const auto dir = fresh_dir("mlp_io");
    save_mlp(model, dir / "model.json", dir / "model.bin");
    const MlpModel back = load_mlp(dir / "model.json", dir / "model.bin");
    CHECK(mlp_forward_probs(back, x) == mlp_forward_probs(model, x));
}

// ---------------------------------------------------------------------------
// GBDT
// ---------------------------------------------------------------------------

TEST_CASE("gbdt constant labels saturate to that label") {
    Eigen::MatrixXd x(5, 2);
    x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
    const GbdtModel model = train_gbdt(x, {1, 1, 1, 1, 1}, GbdtConfig{.rounds = 3}, 1);
    const Prediction p = predict(model, x);
    for (int label : p.labels) CHECK(label == 1);

    const GbdtModel zeros = train_gbdt(x, {0, 0, 0, 0, 0}, GbdtConfig{.rounds = 3}, 1);
    for (int label : predict(zeros, x).labels) CHECK(label == 0);
}

TEST_CASE("gbdt depth zero, one round reproduces the prior") {
    Eigen::MatrixXd x(8, 3);
    Rng rng(3);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    const std::vector<int> y = {1, 0, 0, 1, 1, 0, 0, 0};  // 3/8 positive
    GbdtConfig config;
    config.rounds = 1;
    config.max_depth = 0;
    const GbdtModel model = train_gbdt(x, y, config, 1);
    const Eigen::VectorXd scores = gbdt_scores(model, x);
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        CHECK(std::abs(scores[i] - 3.0 / 8.0) <= 1e-9);
}

TEST_CASE("gbdt learns the xor pattern with depth-2 trees") {
    Eigen::MatrixXd x(4, 2);
    x << 0, 0, 0, 1, 1, 0, 1, 1;
    const std::vector<int> y = {0, 1, 1, 0};
    GbdtConfig config;
    config.rounds = 50;
    config.max_depth = 2;
    config.learning_rate = 0.1;
    const GbdtModel model = train_gbdt(x, y, config, 1);
    const Prediction p = predict(model, x);
    CHECK(p.labels == y);
    // the trees must realize the partition, not just the threshold side
    CHECK(p.scores[1] > 0.5);
    CHECK(p.scores[2] > 0.5);
    CHECK(p.scores[0] < 0.5);
    CHECK(p.scores[3] < 0.5);
}

TEST_CASE("gbdt staged training loss is nonincreasing on random data") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const int n = 40 + static_cast<int>(rng.bounded(40));
        const int d = 2 + static_cast<int>(rng.bounded(5));
        Eigen::MatrixXd x(n, d);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
            y[static_cast<std::size_t>(i)] = static_cast<int>(rng.bounded(2));
        }
        if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
        if (std::count(y.begin(), y.end(), 0) == 0) y[1] = 0;

        GbdtConfig config;
        config.rounds = 60;
        const GbdtModel model = train_gbdt(x, y, config, seed);
        REQUIRE(model.train_losses.size() == 60);
        for (std::size_t r = 1; r < model.train_losses.size(); ++r) {
            CAPTURE(seed);
            CAPTURE(r);
            CHECK(model.train_losses[r] <= model.train_losses[r - 1] + 1e-12);
        }
    }
}

TEST_CASE("gbdt grid search is deterministic and picks a working config") {
    auto [x, y] = oracle::gaussian_clusters(30, 3, 3.0, 1.0, 19);
    GbdtGrid grid;
    grid.depths = {1, 2};
    grid.rounds = {10, 20};
    grid.learning_rates = {0.1, 0.3};
    const GbdtModel a = train_gbdt_grid(x, y, grid, GbdtConfig{}, 7);
    const GbdtModel b = train_gbdt_grid(x, y, grid, GbdtConfig{}, 7);
    CHECK(a.config.max_depth == b.config.max_depth);
    CHECK(a.config.rounds == b.config.rounds);
    CHECK(a.config.learning_rate == b.config.learning_rate);
    CHECK(gbdt_scores(a, x) == gbdt_scores(b, x));

    const Prediction p = predict(a, x);
    const Metrics m = confusion_metrics(y, p.labels);
    CHECK(m.accuracy >= 0.95);
}

TEST_CASE("gbdt save/load preserves predictions exactly") {
    auto [x, y] = oracle::gaussian_clusters(25, 4, 2.5, 1.0, 41);
    GbdtConfig config;
    config.rounds = 20;
    const GbdtModel model = train_gbdt(x, y, config, 2);
    const auto dir = fresh_dir("gbdt_io");
    save_gbdt(model, dir / "model.json", dir / "model.bin");
    const GbdtModel back = load_gbdt(dir / "model.json", dir / "model.bin");
    CHECK(gbdt_scores(back, x) == gbdt_scores(model, x));
    CHECK(back.train_losses == model.train_losses);
}

// ---------------------------------------------------------------------------
// Shared predict contract
// ---------------------------------------------------------------------------

TEST_CASE("predict handles empty inputs and checks widths") {
    auto [x, y] = oracle::gaussian_clusters(10, 3, 4.0, 1.0, 13);
    const GbdtModel gbdt = train_gbdt(x, y, GbdtConfig{.rounds = 10}, 1);
    const Prediction empty = predict(gbdt, Eigen::MatrixXd(0, 3));
    CHECK(empty.scores.size() == 0);
    CHECK(empty.labels.empty());
    CHECK_THROWS_AS(predict(gbdt, Eigen::MatrixXd::Zero(2, 5)), Error);

    MlpConfig mc;
    mc.epochs = 5;
    const MlpModel mlp = train_mlp(x, y, mc, 1);
    CHECK(predict(mlp, Eigen::MatrixXd(0, 3)).labels.empty());
    CHECK_THROWS_AS(predict(mlp, Eigen::MatrixXd::Zero(2, 4)), Error);
}

TEST_CASE("perfectly fit training rows keep their labels") {
    auto [x, y] = oracle::gaussian_clusters(50, 4, 8.0, 1.0, 29);
    const GbdtModel model = train_gbdt(x, y, GbdtConfig{.rounds = 50}, 1);
    CHECK(predict(model, x).labels == y);
}

TEST_CASE("raising the decision threshold never increases the positive count") {
    auto [x, y] = oracle::gaussian_clusters(60, 4, 1.0, 1.5, 97);  // overlapping clusters
    const GbdtModel model = train_gbdt(x, y, GbdtConfig{.rounds = 30}, 1);
    const Eigen::VectorXd scores = gbdt_scores(model, x);
    long previous = scores.size() + 1;
    for (double t = 0.0; t <= 1.0001; t += 0.05) {
        long positives = 0;
        for (Eigen::Index i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) ++positives;
        CHECK(positives <= previous);
        previous = positives;
    }
}

// ---------------------------------------------------------------------------
// Outlier scores
// ---------------------------------------------------------------------------

TEST_CASE("knn distances vanish for a point identical to a reference point") {
    Eigen::MatrixXd reference(5, 2);
    reference << 0, 0, 1, 0, 0, 1, 1, 1, 2, 2;
    Eigen::MatrixXd x(1, 2);
    x << 1, 0;  // equals reference row 1
    ScorerConfig config;
    config.scorers = {"knn_max", "knn_mean"};
    config.knn_k = 1;
    const OutlierScoreSet scores = unsupervised_score_features(reference, x, config);
    CHECK(scores.scores(0, 0) == 0.0);
    CHECK(scores.scores(0, 1) == 0.0);
}

TEST_CASE("a far outlier scores strictly higher on every column") {
    Rng rng(4);
    Eigen::MatrixXd reference(20, 3);
    for (Eigen::Index i = 0; i < reference.rows(); ++i)
        for (Eigen::Index j = 0; j < 3; ++j) reference(i, j) = rng.normal();

    Eigen::MatrixXd x(21, 3);
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
    x.row(20) << 10.0, 10.0, 10.0;  // ten sigma away

    ScorerConfig config;
    config.knn_k = 5;
    config.lof_k = 10;
    const OutlierScoreSet scores = unsupervised_score_features(reference, x, config);
    REQUIRE(scores.columns.size() == 4);
    for (Eigen::Index c = 0; c < scores.scores.cols(); ++c)
        for (Eigen::Index i = 0; i < 20; ++i) {
            CAPTURE(c);
            CHECK(scores.scores(20, c) > scores.scores(i, c));
        }
}

TEST_CASE("lof of interior grid points is about one and matches brute force") {
    // 7x7 uniform grid; interior points have perfectly regular neighborhoods
    Eigen::MatrixXd grid(49, 2);
    int r = 0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) grid.row(r++) << static_cast<double>(i), static_cast<double>(j);

    Eigen::MatrixXd queries(1, 2);
    queries << 3.0, 3.0;  // dead center

    ScorerConfig config;
    config.scorers = {"lof"};
    config.lof_k = 10;
    const OutlierScoreSet scores = unsupervised_score_features(grid, queries, config);
    CHECK(std::abs(scores.scores(0, 0) - 1.0) <= 0.1);

    const auto brute = oracle::brute_force_lof(grid, queries, config.lof_k);
    CHECK(scores.scores(0, 0) == doctest::Approx(brute[0]).epsilon(1e-9));
}

TEST_CASE("lof against brute force on random data") {
    Rng rng(6);
    Eigen::MatrixXd reference(30, 2), queries(10, 2);
    for (Eigen::Index i = 0; i < reference.rows(); ++i)
        for (Eigen::Index j = 0; j < 2; ++j) reference(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < queries.rows(); ++i)
        for (Eigen::Index j = 0; j < 2; ++j) queries(i, j) = 2.0 * rng.normal();
    ScorerConfig config;
    config.scorers = {"lof"};
    config.lof_k = 5;
    const OutlierScoreSet scores = unsupervised_score_features(reference, queries, config);
    const auto brute = oracle::brute_force_lof(reference, queries, config.lof_k);
    for (Eigen::Index i = 0; i < queries.rows(); ++i)
        CHECK(scores.scores(i, 0) == doctest::Approx(brute[static_cast<std::size_t>(i)])
                                         .epsilon(1e-9));
}

TEST_CASE("scorers validate k against the reference size") {
    Eigen::MatrixXd reference(4, 2);
    reference << 0, 0, 1, 0, 0, 1, 1, 1;
    ScorerConfig config;
    config.knn_k = 4;  // k == reference size
    CHECK_THROWS_AS(unsupervised_score_features(reference, reference, config), Error);
    CHECK_THROWS_AS(
        unsupervised_score_features(Eigen::MatrixXd(0, 2), reference, ScorerConfig{}), Error);
}

// ---------------------------------------------------------------------------
// XGBOD
// ---------------------------------------------------------------------------

TEST_CASE("xgbod with no scorers reduces exactly to gbdt") {
    auto [x, y] = oracle::gaussian_clusters(40, 4, 2.0, 1.2, 53);
    Eigen::MatrixXd reference(10, 4);
    for (Eigen::Index i = 0; i < 10; ++i) reference.row(i) = x.row(i);

    XgbodConfig config;
    config.scorers.scorers = {};
    config.combiner.rounds = 25;
    const XgbodModel xgbod = train_xgbod(x, y, reference, config, 9);
    const GbdtModel gbdt = train_gbdt(x, y, config.combiner, 9);

    const Eigen::VectorXd a = xgbod_scores(xgbod, x);
    const Eigen::VectorXd b = gbdt_scores(gbdt, x);
    CHECK(a == b);  // bit-identical reduction
}

TEST_CASE("xgbod separates two shifted clusters almost perfectly") {
    // 500 + 500 points, 6 sigma apart; nearest-centroid oracle confirms the
    // construction is separable before the detector is held to it
    auto [x, y] = oracle::gaussian_clusters(500, 8, 6.0, 1.0, 61);
    auto [xt, yt] = oracle::gaussian_clusters(150, 8, 6.0, 1.0, 62);
    CHECK(oracle::nearest_centroid_accuracy(x, y, xt, yt) >= 0.999);

    Eigen::MatrixXd reference(500, 8);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (y[static_cast<std::size_t>(i)] == 0) reference.row(r++) = x.row(i);
    REQUIRE(r == 500);

    XgbodConfig config;
    config.combiner.rounds = 60;
    const XgbodModel model = train_xgbod(x, y, reference, config, 3);
    const Prediction p = predict(model, xt);
    const Metrics m = confusion_metrics(yt, p.labels);
    CHECK(m.accuracy >= 0.99);
}

TEST_CASE("xgbod training and serialization are byte-identical across runs") {
    auto [x, y] = oracle::gaussian_clusters(30, 4, 3.0, 1.0, 71);
    Eigen::MatrixXd reference(15, 4);
    for (Eigen::Index i = 0; i < 15; ++i) reference.row(i) = x.row(i);
    XgbodConfig config;
    config.combiner.rounds = 15;

    const auto dir_a = fresh_dir("xgbod_a");
    const auto dir_b = fresh_dir("xgbod_b");
    save_xgbod(train_xgbod(x, y, reference, config, 31), dir_a / "model.json",
               dir_a / "model.bin");
    save_xgbod(train_xgbod(x, y, reference, config, 31), dir_b / "model.json",
               dir_b / "model.bin");
    CHECK(file_bytes(dir_a / "model.json") == file_bytes(dir_b / "model.json"));
    CHECK(file_bytes(dir_a / "model.bin") == file_bytes(dir_b / "model.bin"));

    const XgbodModel back = load_xgbod(dir_a / "model.json", dir_a / "model.bin");
    const XgbodModel original = train_xgbod(x, y, reference, config, 31);
    CHECK(xgbod_scores(back, x) == xgbod_scores(original, x));
}
