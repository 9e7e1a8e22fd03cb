// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "provsem/rng.hpp"

namespace provsem::oracle {

EigenPairs jacobi_eigen_symmetric(const Eigen::MatrixXd& m, int max_sweeps) {
    const Eigen::Index n = m.rows();
    Eigen::MatrixXd a = m;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

    EigenPairs out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace {

void fix_sign_like_library(Eigen::Ref<Eigen::VectorXd> v) {
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

}  // namespace

Eigen::MatrixXd kpca_oracle(const Eigen::MatrixXd& x, double gamma, int k,
                            Eigen::VectorXd* eigenvalues_out) {
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double d2 = 0.0;
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const double d = x(i, c) - x(j, c);
                d2 += d * d;
            }
            gram(i, j) = std::exp(-gamma * d2);
        }
    }

    Eigen::MatrixXd centered(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double row_mean = 0.0, col_mean = 0.0, total = 0.0;
            for (Eigen::Index t = 0; t < n; ++t) {
                row_mean += gram(i, t);
                col_mean += gram(t, j);
            }
            for (Eigen::Index a = 0; a < n; ++a)
                for (Eigen::Index b = 0; b < n; ++b) total += gram(a, b);
            centered(i, j) = gram(i, j) - row_mean / n - col_mean / n + total / (n * n);
        }
    }

    EigenPairs eigs = jacobi_eigen_symmetric(centered);
    int usable = 0;
    while (usable < k && usable < n && eigs.values[usable] > 1e-10) ++usable;

    Eigen::MatrixXd projected(n, usable);
    for (int c = 0; c < usable; ++c) {
        Eigen::VectorXd v = eigs.vectors.col(c);
        fix_sign_like_library(v);
        projected.col(c) = v * std::sqrt(eigs.values[c]);
    }
    if (eigenvalues_out) *eigenvalues_out = eigs.values.head(usable);
    return projected;
}

std::vector<double> brute_force_lof(const Eigen::MatrixXd& reference,
                                    const Eigen::MatrixXd& queries, int k) {
    const Eigen::Index n = reference.rows();
    auto dist = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
        return (a - b).norm();
    };
    auto knn_of_ref = [&](Eigen::Index self) {
        std::vector<std::pair<double, Eigen::Index>> d;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != self) d.emplace_back(dist(reference.row(self), reference.row(j)), j);
        std::sort(d.begin(), d.end());
        d.resize(static_cast<std::size_t>(k));
        return d;
    };

    std::vector<double> k_dist(static_cast<std::size_t>(n));
    std::vector<std::vector<std::pair<double, Eigen::Index>>> neighbors(
        static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        neighbors[static_cast<std::size_t>(i)] = knn_of_ref(i);
        k_dist[static_cast<std::size_t>(i)] = neighbors[static_cast<std::size_t>(i)].back().first;
    }
    std::vector<double> lrd(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double reach = 0.0;
        for (const auto& [d, j] : neighbors[static_cast<std::size_t>(i)])
            reach += std::max(k_dist[static_cast<std::size_t>(j)], d);
        lrd[static_cast<std::size_t>(i)] = static_cast<double>(k) / (reach + 1e-12);
    }

    std::vector<double> out;
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        std::vector<std::pair<double, Eigen::Index>> d;
        for (Eigen::Index j = 0; j < n; ++j)
            d.emplace_back(dist(queries.row(q), reference.row(j)), j);
        std::sort(d.begin(), d.end());
        d.resize(static_cast<std::size_t>(k));
        double reach = 0.0, lrd_sum = 0.0;
        for (const auto& [dd, j] : d) {
            reach += std::max(k_dist[static_cast<std::size_t>(j)], dd);
            lrd_sum += lrd[static_cast<std::size_t>(j)];
        }
        const double lrd_q = static_cast<double>(k) / (reach + 1e-12);
        out.push_back(lrd_sum / (static_cast<double>(k) * lrd_q));
    }
    return out;
}

double procrustes_residual(const Eigen::MatrixXd& points, const Eigen::MatrixXd& target) {
    Eigen::MatrixXd a = points.rowwise() - points.colwise().mean();
    Eigen::MatrixXd b = target.rowwise() - target.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd rotation = svd.matrixU() * svd.matrixV().transpose();
    return (a * rotation - b).norm();
}

double nearest_centroid_accuracy(const Eigen::MatrixXd& x_train, const std::vector<int>& y_train,
                                 const Eigen::MatrixXd& x_test, const std::vector<int>& y_test) {
    Eigen::RowVectorXd c0 = Eigen::RowVectorXd::Zero(x_train.cols());
    Eigen::RowVectorXd c1 = Eigen::RowVectorXd::Zero(x_train.cols());
    double n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < x_train.rows(); ++i) {
        if (y_train[static_cast<std::size_t>(i)] == 1) {
            c1 += x_train.row(i);
            ++n1;
        } else {
            c0 += x_train.row(i);
            ++n0;
        }
    }
    c0 /= n0;
    c1 /= n1;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < x_test.rows(); ++i) {
        const int pred =
            (x_test.row(i) - c1).norm() < (x_test.row(i) - c0).norm() ? 1 : 0;
        if (pred == y_test[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(x_test.rows());
}

std::pair<Eigen::MatrixXd, std::vector<int>> gaussian_clusters(int n_per_class, int dims,
                                                               double separation, double sigma,
                                                               std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(2 * n_per_class, dims);
    std::vector<int> y(static_cast<std::size_t>(2 * n_per_class));
    for (int i = 0; i < 2 * n_per_class; ++i) {
        const int label = i < n_per_class ? 0 : 1;
        y[static_cast<std::size_t>(i)] = label;
        for (int j = 0; j < dims; ++j) {
            const double center = (label == 1 && j == 0) ? separation : 0.0;
            x(i, j) = center + sigma * rng.normal();
        }
    }
    return {std::move(x), std::move(y)};
}

}  // namespace provsem::oracle
