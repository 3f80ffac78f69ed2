#pragma once

#include "metapinn/common.hpp"

#include <vector>

namespace metapinn {

// Pearson correlation distance 1 - rho(x, y). A constant series carries
// no shape information; pairs involving one get the neutral distance 1.
double correlation_distance(const VectorXd& x, const VectorXd& y);

// Pairwise state distances averaged over one trajectory per task
// (each n_t x S). `constant_states` collects indices whose series is
// constant in every task.
MatrixXd distance_matrix(const std::vector<MatrixXd>& trajs,
                         std::vector<int>* constant_states = nullptr);

// Agglomerative average-linkage grouping down to k groups. Ties break
// toward the first pair in ascending (i, j) scan order. Labels are
// assigned by first appearance over the state index.
std::vector<int> cluster_states(const MatrixXd& dist, int k);

std::vector<int> cluster_trajectories(const std::vector<MatrixXd>& trajs,
                                      int k);

inline int n_clusters(const std::vector<int>& labels) {
    int n = 0;
    for (int l : labels) n = std::max(n, l + 1);
    return n;
}

}  // namespace metapinn
