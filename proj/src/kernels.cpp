// SPDX-License-Identifier: Apache-2.0
#include "provsem/kernels.hpp"

#include <cmath>

#include "provsem/error.hpp"

namespace provsem::kernels {

namespace {

inline double sq_dist_rows(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                           Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double d = a(i, k) - b(j, k);
        s += d * d;
    }
    return s;
}

inline double dot_rows(const Eigen::MatrixXd& a, Eigen::Index i, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * a(j, k);
    return s;
}

void check_widths(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols())
        throw Error(ErrorKind::Data, "kernel width mismatch: " + std::to_string(a.cols()) +
                                         " vs " + std::to_string(b.cols()));
}

Eigen::VectorXd row_norms(const Eigen::MatrixXd& rows) {
    Eigen::VectorXd norms(rows.rows());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        norms[i] = std::sqrt(dot_rows(rows, i, i));
        if (norms[i] <= 0.0)
            throw Error(ErrorKind::Data,
                        "cosine distance matrix: zero-norm row " + std::to_string(i));
    }
    return norms;
}

}  // namespace

namespace serial {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    check_widths(a, b);
    Eigen::MatrixXd d(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = sq_dist_rows(a, i, b, j);
    return d;
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& x, double gamma) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = std::exp(-gamma * sq_dist_rows(x, i, x, j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::MatrixXd rbf_cross_kernel(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                                 double gamma) {
    check_widths(y, x);
    Eigen::MatrixXd k(y.rows(), x.rows());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            k(i, j) = std::exp(-gamma * sq_dist_rows(y, i, x, j));
    return k;
}

Eigen::MatrixXd cosine_distance_matrix(const Eigen::MatrixXd& rows) {
    const Eigen::Index n = rows.rows();
    const Eigen::VectorXd norms = row_norms(rows);
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = 1.0 - dot_rows(rows, i, j) / (norms[i] * norms[j]);
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

}  // namespace serial

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    check_widths(a, b);
    Eigen::MatrixXd d(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = sq_dist_rows(a, i, b, j);
    return d;
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& x, double gamma) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j)
            k(i, j) = std::exp(-gamma * sq_dist_rows(x, i, x, j));
    }
    // mirror the upper triangle
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) k(j, i) = k(i, j);
    return k;
}

Eigen::MatrixXd rbf_cross_kernel(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                                 double gamma) {
    check_widths(y, x);
    Eigen::MatrixXd k(y.rows(), x.rows());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (Eigen::Index j = 0; j < x.rows(); ++j)
            k(i, j) = std::exp(-gamma * sq_dist_rows(y, i, x, j));
    return k;
}

Eigen::MatrixXd cosine_distance_matrix(const Eigen::MatrixXd& rows) {
    const Eigen::Index n = rows.rows();
    const Eigen::VectorXd norms = row_norms(rows);
    Eigen::MatrixXd d(n, n);
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j)
            d(i, j) = 1.0 - dot_rows(rows, i, j) / (norms[i] * norms[j]);
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d(j, i) = d(i, j);
    return d;
}

}  // namespace provsem::kernels
