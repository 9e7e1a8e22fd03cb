// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace provsem::kernels {

// Dense pairwise kernels used by the reducers and scorers. The default entry
// points parallelize over output rows with OpenMP; each element is produced by
// exactly one thread with the same inner-loop order as the serial versions, so
// outputs are bitwise identical. The serial namespace is the reference used by
// tests and the benchmark.

// m x n matrix of squared Euclidean distances between rows of a and b.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// n x n RBF Gram matrix: exp(-gamma * ||x_i - x_j||^2), unit diagonal.
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& x, double gamma);

// m x n cross kernel between rows of y and rows of x.
Eigen::MatrixXd rbf_cross_kernel(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                                 double gamma);

// n x n cosine distance matrix (1 - cosine similarity) between rows.
// Zero-norm rows are rejected.
Eigen::MatrixXd cosine_distance_matrix(const Eigen::MatrixXd& rows);

namespace serial {
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& x, double gamma);
Eigen::MatrixXd rbf_cross_kernel(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                                 double gamma);
Eigen::MatrixXd cosine_distance_matrix(const Eigen::MatrixXd& rows);
}  // namespace serial

}  // namespace provsem::kernels
