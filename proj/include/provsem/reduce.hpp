// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <utility>

namespace provsem {

// RBF kernel PCA model. Training rows are retained so out-of-sample transforms
// are exact; acceptable at desk scale.
struct KpcaModel {
    Eigen::MatrixXd training_rows;  // n x d
    double gamma = 1.0;
    int requested_k = 0;
    Eigen::MatrixXd components;   // n x k' dual coefficients (eigvec / sqrt(eigval))
    Eigen::VectorXd eigenvalues;  // k' strictly descending, all > tolerance
    Eigen::VectorXd row_means;    // centering statistics of the training Gram matrix
    double total_mean = 0.0;
    bool truncated = false;  // fewer than requested_k eigenvalues above tolerance

    int usable_components() const { return static_cast<int>(eigenvalues.size()); }
};

// Eigenvalues at or below this are treated as numerically null.
inline constexpr double kEigenvalueFloor = 1e-10;

// Fits on X (n x d) and returns the model plus the n x k' projection.
// Requires n >= 2, 1 <= k <= n-1, gamma > 0. Components use a fixed sign
// convention (largest-magnitude coefficient positive) so runs are comparable.
std::pair<KpcaModel, Eigen::MatrixXd> kpca_fit_transform(const Eigen::MatrixXd& x,
                                                         double gamma, int k);

// Out-of-sample projection through the stored dual coefficients.
Eigen::MatrixXd kpca_transform(const KpcaModel& model, const Eigen::MatrixXd& y);

// Default gamma: 1 / (d * mean per-feature variance).
double kpca_auto_gamma(const Eigen::MatrixXd& x);
// Alternative heuristic: 1 / median squared pairwise distance (deterministic
// subsample for large n).
double kpca_median_gamma(const Eigen::MatrixXd& x);

void save_kpca(const KpcaModel& model, const std::filesystem::path& manifest_path,
               const std::filesystem::path& blob_path);
KpcaModel load_kpca(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& blob_path);

// Classical MDS embedding of a distance matrix.
struct Coordinates2D {
    Eigen::MatrixXd points;  // n x m, column means ~ 0
    double stress = 0.0;     // ||D - D_hat||_F / ||D||_F
};

// D must be square, symmetric, nonnegative with zero diagonal.
Coordinates2D classical_mds(const Eigen::MatrixXd& d, int m = 2);

}  // namespace provsem
