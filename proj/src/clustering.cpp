#include "metapinn/clustering.hpp"

#include <algorithm>
#include <cmath>

namespace metapinn {

namespace {

bool is_constant(const VectorXd& x) {
    double mean = x.mean();
    double ss = (x.array() - mean).square().sum();
    return ss <= 1e-24 * std::max(1.0, x.squaredNorm());
}

}  // namespace

double correlation_distance(const VectorXd& x, const VectorXd& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ValidationError("correlation_distance: need equal series, n>=2");
    if (is_constant(x) || is_constant(y)) return 1.0;
    VectorXd a = x.array() - x.mean();
    VectorXd b = y.array() - y.mean();
    double rho = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
    return 1.0 - rho;
}

MatrixXd distance_matrix(const std::vector<MatrixXd>& trajs,
                         std::vector<int>* constant_states) {
    if (trajs.empty())
        throw ValidationError("distance_matrix: no trajectories");
    const Eigen::Index S = trajs[0].cols();
    for (const auto& t : trajs)
        if (t.cols() != S || t.rows() < 2)
            throw ValidationError("distance_matrix: inconsistent shapes");
    MatrixXd d = MatrixXd::Zero(S, S);
    for (const auto& t : trajs) {
        for (Eigen::Index i = 0; i < S; ++i)
            for (Eigen::Index j = i + 1; j < S; ++j) {
                double dij = correlation_distance(t.col(i), t.col(j));
                d(i, j) += dij;
                d(j, i) += dij;
            }
    }
    d /= double(trajs.size());
    if (constant_states) {
        constant_states->clear();
        for (Eigen::Index i = 0; i < S; ++i) {
            bool all_const = true;
            for (const auto& t : trajs)
                if (!is_constant(t.col(i))) all_const = false;
            if (all_const) constant_states->push_back(int(i));
        }
    }
    return d;
}

std::vector<int> cluster_states(const MatrixXd& dist, int k) {
    const int S = int(dist.rows());
    if (dist.cols() != S) throw ValidationError("cluster_states: not square");
    if (k < 1 || k > S)
        throw ValidationError("cluster_states: k must be in [1, n]");
    for (int i = 0; i < S; ++i) {
        if (std::abs(dist(i, i)) > 1e-12)
            throw ValidationError("cluster_states: nonzero diagonal");
        for (int j = 0; j < S; ++j) {
            if (std::abs(dist(i, j) - dist(j, i)) > 1e-12)
                throw ValidationError("cluster_states: asymmetric distances");
            if (dist(i, j) < -1e-12 || dist(i, j) > 2.0 + 1e-12)
                throw ValidationError(
                    "cluster_states: distance outside [0, 2]");
        }
    }

    std::vector<std::vector<int>> groups(S);
    for (int i = 0; i < S; ++i) groups[i] = {i};
    MatrixXd d = dist;

    while (int(groups.size()) > k) {
        int bi = 0, bj = 1;
        double best = d(0, 1);
        for (int i = 0; i < int(groups.size()); ++i)
            for (int j = i + 1; j < int(groups.size()); ++j)
                if (d(i, j) < best) {
                    best = d(i, j);
                    bi = i;
                    bj = j;
                }
        double na = double(groups[bi].size()), nb = double(groups[bj].size());
        for (int c = 0; c < int(groups.size()); ++c) {
            if (c == bi || c == bj) continue;
            double nd = (na * d(bi, c) + nb * d(bj, c)) / (na + nb);
            d(bi, c) = nd;
            d(c, bi) = nd;
        }
        groups[bi].insert(groups[bi].end(), groups[bj].begin(),
                          groups[bj].end());
        groups.erase(groups.begin() + bj);
        // compact the distance matrix
        int n = int(groups.size());
        MatrixXd d2(n, n);
        int r2 = 0;
        for (int r = 0; r < n + 1; ++r) {
            if (r == bj) continue;
            int c2 = 0;
            for (int c = 0; c < n + 1; ++c) {
                if (c == bj) continue;
                d2(r2, c2++) = d(r, c);
            }
            ++r2;
        }
        d = d2;
    }

    std::vector<int> labels(S, -1);
    int next = 0;
    for (int s = 0; s < S; ++s) {
        if (labels[s] != -1) continue;
        for (const auto& g : groups) {
            if (std::find(g.begin(), g.end(), s) != g.end()) {
                for (int member : g) labels[member] = next;
                ++next;
                break;
            }
        }
    }
    return labels;
}

std::vector<int> cluster_trajectories(const std::vector<MatrixXd>& trajs,
                                      int k) {
    return cluster_states(distance_matrix(trajs), k);
}

}  // namespace metapinn
