// SPDX-License-Identifier: Apache-2.0
#include "provsem/reduce.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "provsem/blob.hpp"
#include "provsem/error.hpp"
#include "provsem/kernels.hpp"

namespace provsem {

using nlohmann::json;

namespace {

// Largest-magnitude entry made positive so eigenvector signs are stable
// across runs; first index wins a magnitude tie.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index best = 0;
    double best_abs = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (a > best_abs) {
            best_abs = a;
            best = i;
        }
    }
    if (v[best] < 0.0) v = -v;
}

struct EigenPairs {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // columns matching values
};

EigenPairs symmetric_eigs_descending(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorKind::Data, "eigendecomposition failed to converge");
    const Eigen::Index n = m.rows();
    EigenPairs out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = solver.eigenvalues()[n - 1 - i];
        out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
        fix_sign(out.vectors.col(i));
    }
    return out;
}

}  // namespace

double kpca_auto_gamma(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (n < 2 || d < 1) return 1.0;
    double mean_var = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mu = x.col(j).mean();
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = x(i, j) - mu;
            s += c * c;
        }
        mean_var += s / static_cast<double>(n);
    }
    mean_var /= static_cast<double>(d);
    if (mean_var <= 0.0) return 1.0;
    return 1.0 / (static_cast<double>(d) * mean_var);
}

double kpca_median_gamma(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    if (n < 2) return 1.0;
    // deterministic pair subsample via strides once the pair count gets large
    std::vector<double> d2;
    const Eigen::Index max_pairs = 20000;
    Eigen::Index stride = 1;
    const Eigen::Index total = n * (n - 1) / 2;
    if (total > max_pairs) stride = total / max_pairs;
    Eigen::Index counter = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (counter++ % stride != 0) continue;
            d2.push_back((x.row(i) - x.row(j)).squaredNorm());
        }
    }
    if (d2.empty()) return 1.0;
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2),
                     d2.end());
    const double med = d2[d2.size() / 2];
    if (med <= 0.0) return 1.0;
    return 1.0 / med;
}

std::pair<KpcaModel, Eigen::MatrixXd> kpca_fit_transform(const Eigen::MatrixXd& x, double gamma,
                                                         int k) {
    const Eigen::Index n = x.rows();
    if (n < 2) throw Error(ErrorKind::Config, "kpca: need at least 2 rows");
    if (gamma <= 0.0) throw Error(ErrorKind::Config, "kpca: gamma must be positive");
    if (k < 1 || k > n - 1)
        throw Error(ErrorKind::Config, "kpca: k must be in [1, n-1], got k=" +
                                           std::to_string(k) + " with n=" + std::to_string(n));

    const Eigen::MatrixXd gram = kernels::rbf_kernel(x, gamma);
    Eigen::VectorXd row_means = gram.rowwise().mean();
    const double total_mean = gram.mean();

    Eigen::MatrixXd centered(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            centered(i, j) = gram(i, j) - row_means[i] - row_means[j] + total_mean;

    EigenPairs eigs = symmetric_eigs_descending(centered);

    int usable = 0;
    while (usable < k && eigs.values[usable] > kEigenvalueFloor) ++usable;

    KpcaModel model;
    model.training_rows = x;
    model.gamma = gamma;
    model.requested_k = k;
    model.truncated = usable < k;
    model.eigenvalues = eigs.values.head(usable);
    model.row_means = std::move(row_means);
    model.total_mean = total_mean;
    model.components.resize(n, usable);
    Eigen::MatrixXd projected(n, usable);
    for (int c = 0; c < usable; ++c) {
        const double lambda = eigs.values[c];
        const double scale = std::sqrt(lambda);
        model.components.col(c) = eigs.vectors.col(c) / scale;
        projected.col(c) = eigs.vectors.col(c) * scale;
    }
    return {std::move(model), std::move(projected)};
}

Eigen::MatrixXd kpca_transform(const KpcaModel& model, const Eigen::MatrixXd& y) {
    const Eigen::Index m = y.rows();
    const int k = model.usable_components();
    if (m == 0) return Eigen::MatrixXd(0, k);
    if (y.cols() != model.training_rows.cols())
        throw Error(ErrorKind::Data, "kpca_transform: width mismatch " +
                                         std::to_string(y.cols()) + " vs " +
                                         std::to_string(model.training_rows.cols()));

    Eigen::MatrixXd cross = kernels::rbf_cross_kernel(y, model.training_rows, model.gamma);
    const Eigen::Index n = model.training_rows.rows();
    Eigen::MatrixXd centered(m, n);
    for (Eigen::Index t = 0; t < m; ++t) {
        const double rm = cross.row(t).mean();
        for (Eigen::Index j = 0; j < n; ++j)
            centered(t, j) = cross(t, j) - rm - model.row_means[j] + model.total_mean;
    }
    return centered * model.components;
}

void save_kpca(const KpcaModel& model, const std::filesystem::path& manifest_path,
               const std::filesystem::path& blob_path) {
    BlobWriter blob;
    blob.add_matrix("training_rows", model.training_rows);
    blob.add_matrix("components", model.components);
    blob.add_vector("eigenvalues", model.eigenvalues);
    blob.add_vector("row_means", model.row_means);
    blob.write(blob_path);

    json manifest;
    manifest["version"] = 1;
    manifest["kind"] = "kpca_rbf";
    manifest["gamma"] = model.gamma;
    manifest["requested_k"] = model.requested_k;
    manifest["usable_k"] = model.usable_components();
    manifest["truncated"] = model.truncated;
    manifest["total_mean"] = model.total_mean;
    manifest["n_training_rows"] = model.training_rows.rows();
    manifest["width"] = model.training_rows.cols();
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Data, "cannot write manifest: " + manifest_path.string());
    out << manifest.dump(2) << '\n';
}

KpcaModel load_kpca(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& blob_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::Data, "cannot read manifest: " + manifest_path.string());
    json manifest;
    in >> manifest;
    if (manifest.value("kind", "") != "kpca_rbf")
        throw Error(ErrorKind::Data, "manifest kind mismatch: expected kpca_rbf");

    BlobReader blob(blob_path);
    KpcaModel model;
    model.training_rows = blob.matrix("training_rows");
    model.components = blob.matrix("components");
    model.eigenvalues = blob.vector("eigenvalues");
    model.row_means = blob.vector("row_means");
    model.gamma = manifest.at("gamma").get<double>();
    model.requested_k = manifest.at("requested_k").get<int>();
    model.truncated = manifest.at("truncated").get<bool>();
    model.total_mean = manifest.at("total_mean").get<double>();
    return model;
}

Coordinates2D classical_mds(const Eigen::MatrixXd& d, int m) {
    const Eigen::Index n = d.rows();
    if (n < 2) throw Error(ErrorKind::Data, "classical_mds: need at least 2 points");
    if (d.cols() != n) throw Error(ErrorKind::Data, "classical_mds: matrix must be square");
    if (m < 1 || m > n) throw Error(ErrorKind::Config, "classical_mds: bad output dimension");
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(d(i, i)) > 1e-12 * scale)
            throw Error(ErrorKind::Data, "classical_mds: nonzero diagonal");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (d(i, j) < -1e-12 * scale)
                throw Error(ErrorKind::Data, "classical_mds: negative distance");
            if (std::abs(d(i, j) - d(j, i)) > 1e-12 * scale)
                throw Error(ErrorKind::Data, "classical_mds: asymmetric distance matrix");
        }
    }

    // B = -1/2 J D^2 J, J = I - 11^T/n
    Eigen::MatrixXd d2 = d.array().square();
    Eigen::VectorXd row_means = d2.rowwise().mean();
    const double total_mean = d2.mean();
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            b(i, j) = -0.5 * (d2(i, j) - row_means[i] - row_means[j] + total_mean);

    EigenPairs eigs = symmetric_eigs_descending(b);

    Coordinates2D out;
    out.points.resize(n, m);
    for (int c = 0; c < m; ++c) {
        const double lambda = std::max(eigs.values[c], 0.0);
        out.points.col(c) = eigs.vectors.col(c) * std::sqrt(lambda);
    }

    // stress = ||D - D_hat||_F / ||D||_F
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double dij = (out.points.row(i) - out.points.row(j)).norm();
            const double r = d(i, j) - dij;
            num += r * r;
            den += d(i, j) * d(i, j);
        }
    }
    out.stress = den > 0.0 ? std::sqrt(num / den) : 0.0;
    return out;
}

}  // namespace provsem
