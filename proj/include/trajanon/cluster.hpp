#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajanon/data.hpp"
#include "trajanon/detail/mix.hpp"
#include "trajanon/merge.hpp"
#include "trajanon/model.hpp"

namespace trajanon {

/// Symmetric matrix of pairwise two-user merge costs for one epoch.
/// Only users with samples in the epoch appear; diagonal is zero.
class CostMatrix {
public:
    CostMatrix() = default;

    CostMatrix(std::vector<UserId> users, std::vector<Cost> entries)
        : users_(std::move(users)), entries_(std::move(entries)) {
        const std::size_t n = users_.size();
        if (entries_.size() != n * n) throw std::invalid_argument("cost matrix shape mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            if (entries_[i * n + i] != 0)
                throw std::invalid_argument("cost matrix diagonal must be zero");
            for (std::size_t j = i + 1; j < n; ++j)
                if (entries_[i * n + j] != entries_[j * n + i])
                    throw std::invalid_argument("cost matrix must be symmetric");
        }
    }

    const std::vector<UserId>& users() const { return users_; }
    std::size_t size() const { return users_.size(); }

    Cost at(std::size_t i, std::size_t j) const { return entries_[i * users_.size() + j]; }

private:
    std::vector<UserId> users_;
    std::vector<Cost> entries_;
};

/// Pairwise merge costs over the samples of one epoch. Entry (i, j) is the
/// optimal two-user merge cost of the users' epoch sub-trajectories.
inline CostMatrix pairwise_costs(const Dataset& d, std::int64_t epoch, Coord epsilon) {
    if (epsilon < 1) throw std::invalid_argument("epsilon must be >= 1");
    if (epoch < 1) throw std::invalid_argument("epoch must be >= 1");
    const Coord lo = epoch_first_slot(epoch, epsilon);
    const Coord hi = epoch_end_slot(epoch, epsilon);

    std::vector<UserId> users;
    std::vector<Trajectory> slices;
    for (const auto& [user, tr] : d.trajectories) {
        auto s = samples_between(tr, lo, hi);
        if (s.empty()) continue;
        users.push_back(user);
        slices.emplace_back(user, std::move(s));
    }

    const std::size_t n = users.size();
    std::vector<Cost> entries(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            MergeInput in;
            in.trajectories = {slices[i], slices[j]};
            const Cost c = kmerge(in).cost;
            entries[i * n + j] = c;
            entries[j * n + i] = c;
        }
    return CostMatrix(std::move(users), std::move(entries));
}

/// A dense labelling of the matrix's users into n_clusters groups; labels
/// are contiguous in [0, n_clusters) and every label is used.
struct Clustering {
    std::vector<UserId> users;
    std::vector<int> labels;
    int n_clusters = 0;

    int label_of(const UserId& u) const {
        auto it = std::lower_bound(users.begin(), users.end(), u);
        if (it == users.end() || *it != u) return -1;
        return labels[static_cast<std::size_t>(it - users.begin())];
    }
};

namespace detail {

/// Gaussian similarity with sigma at the median off-diagonal cost. All
/// entries land in (0, 1]; a degenerate sigma means all-alike users.
inline Eigen::MatrixXd similarity_matrix(const CostMatrix& m) {
    const auto n = static_cast<Eigen::Index>(m.size());
    std::vector<Cost> off;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            off.push_back(m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
    double sigma = 0.0;
    if (!off.empty()) {
        std::sort(off.begin(), off.end());
        sigma = static_cast<double>(off[(off.size() - 1) / 2]);
    }
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (sigma <= 0.0) {
                w(i, j) = 1.0;
            } else {
                const double c = static_cast<double>(
                    m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
                w(i, j) = std::exp(-c / sigma);
            }
        }
    return w;
}

/// Symmetric-normalized graph Laplacian; eigenvalues live in [0, 2].
inline Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& w) {
    const Eigen::Index n = w.rows();
    Eigen::VectorXd d = w.rowwise().sum();
    Eigen::VectorXd dinv = d.array().rsqrt();
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n) -
                        dinv.asDiagonal() * w * dinv.asDiagonal();
    return l;
}

/// Deterministic seeded k-means on row vectors: k-means++ seeding, Lloyd
/// iterations with lowest-index tie-breaking, explicit empty-cluster repair.
inline std::vector<int> kmeans_rows(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                                    int max_iters = 100) {
    const Eigen::Index n = x.rows();
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
    Eigen::VectorXd d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
    while (static_cast<int>(centers.size()) < k) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double threshold = u(rng), acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc >= threshold) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(centers.size()) % n;
        }
        centers.push_back(pick);
        d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
    }

    Eigen::MatrixXd c(k, x.cols());
    for (int j = 0; j < k; ++j) c.row(j) = x.row(centers[static_cast<std::size_t>(j)]);

    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (x.row(i) - c.row(0)).squaredNorm();
            for (int j = 1; j < k; ++j) {
                const double d = (x.row(i) - c.row(j)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        // Repair empty clusters by stealing the point farthest from its
        // centroid; keeps the labelling dense in [0, k).
        std::vector<Eigen::Index> count(static_cast<std::size_t>(k), 0);
        for (auto l : labels) ++count[static_cast<std::size_t>(l)];
        for (int j = 0; j < k; ++j) {
            if (count[static_cast<std::size_t>(j)] > 0) continue;
            Eigen::Index donor = -1;
            double worst = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int l = labels[static_cast<std::size_t>(i)];
                if (count[static_cast<std::size_t>(l)] < 2) continue;
                const double d = (x.row(i) - c.row(l)).squaredNorm();
                if (d > worst) {
                    worst = d;
                    donor = i;
                }
            }
            if (donor < 0) continue;
            --count[static_cast<std::size_t>(labels[static_cast<std::size_t>(donor)])];
            labels[static_cast<std::size_t>(donor)] = j;
            ++count[static_cast<std::size_t>(j)];
            changed = true;
        }
        for (int j = 0; j < k; ++j) c.row(j).setZero();
        std::vector<double> sz(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            c.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
            sz[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] += 1.0;
        }
        for (int j = 0; j < k; ++j)
            if (sz[static_cast<std::size_t>(j)] > 0) c.row(j) /= sz[static_cast<std::size_t>(j)];
        if (!changed) break;
    }
    return labels;
}

} // namespace detail

/// Spectral clustering: Gaussian similarity, symmetric-normalized Laplacian,
/// rows of the n_clusters smallest-eigenvalue eigenvectors (row-normalized),
/// then seeded k-means. Deterministic for a fixed seed.
inline Clustering spectral_cluster(const CostMatrix& m, int n_clusters, std::uint64_t seed) {
    const std::size_t n = m.size();
    if (n_clusters < 1) throw std::invalid_argument("n_clusters must be >= 1");
    if (static_cast<std::size_t>(n_clusters) > n)
        throw std::invalid_argument("n_clusters exceeds user count");

    Clustering out;
    out.users = m.users();
    out.n_clusters = n_clusters;
    if (static_cast<std::size_t>(n_clusters) == n) {
        out.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(i);
        return out;
    }
    if (n_clusters == 1) {
        out.labels.assign(n, 0);
        return out;
    }

    Eigen::MatrixXd w = detail::similarity_matrix(m);
    Eigen::MatrixXd l = detail::normalized_laplacian(w);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    Eigen::MatrixXd v = es.eigenvectors().leftCols(n_clusters);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double norm = v.row(i).norm();
        if (norm > 0) v.row(i) /= norm;
    }
    out.labels = detail::kmeans_rows(v, n_clusters, seed);
    return out;
}

} // namespace trajanon
