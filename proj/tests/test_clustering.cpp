#include "doctest.h"

#include "metapinn/clustering.hpp"
#include "metapinn/solver.hpp"

#include <algorithm>
#include <cmath>

using namespace metapinn;

namespace {

VectorXd vec3(double a, double b, double c) {
    VectorXd v(3);
    v << a, b, c;
    return v;
}

// Partition A coarsens B when every pair together in B stays together in A.
bool coarsens(const std::vector<int>& a, const std::vector<int>& b) {
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = i + 1; j < a.size(); ++j)
            if (b[i] == b[j] && a[i] != a[j]) return false;
    return true;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    return coarsens(a, b) && coarsens(b, a);
}

MatrixXd random_distances(int n, uint64_t seed) {
    SplitMix64 rng(seed);
    MatrixXd d = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            d(i, j) = rng.uniform(0.0, 2.0);
            d(j, i) = d(i, j);
        }
    return d;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("correlation distance on small hand series") {
    CHECK(correlation_distance(vec3(1, 2, 3), vec3(2, 4, 6)) ==
          doctest::Approx(0.0).epsilon(1e-14));
    CHECK(correlation_distance(vec3(1, 2, 3), vec3(3, 2, 1)) ==
          doctest::Approx(2.0).epsilon(1e-14));
    CHECK(correlation_distance(vec3(1, 2, 3), vec3(1, 3, 2)) ==
          doctest::Approx(0.5).epsilon(1e-14));
    CHECK(correlation_distance(vec3(1, 2, 3), vec3(1, 2, 3)) ==
          doctest::Approx(0.0).epsilon(1e-14));
    // A constant series carries no shape: neutral distance.
    CHECK(correlation_distance(vec3(5, 5, 5), vec3(1, 2, 3)) == 1.0);
    CHECK(correlation_distance(vec3(1, 2, 3), vec3(0, 0, 0)) == 1.0);
    VectorXd two(2);
    two << 1, 2;
    CHECK_THROWS_AS(correlation_distance(two, vec3(1, 2, 3)),
                    ValidationError);
    VectorXd one(1);
    one << 1;
    CHECK_THROWS_AS(correlation_distance(one, one), ValidationError);
}

TEST_CASE("two zero-distance blocks are recovered exactly") {
    // States 0,2,4 follow one shape, 1,3 the mirrored one.
    int n = 16;
    VectorXd t = VectorXd::LinSpaced(n, 0.0, 1.0);
    MatrixXd traj(n, 5);
    for (int i = 0; i < n; ++i) {
        double up = t[i], down = 1.0 - t[i];
        traj.row(i) << up, down, 2 * up, 5 * down, 0.25 * up;
    }
    std::vector<int> labels = cluster_trajectories({traj}, 2);
    CHECK(labels == std::vector<int>{0, 1, 0, 1, 0});
}

TEST_CASE("edge cluster counts") {
    MatrixXd d = random_distances(6, 3);
    std::vector<int> fine = cluster_states(d, 6);
    for (int i = 0; i < 6; ++i) CHECK(fine[size_t(i)] == i);
    std::vector<int> one = cluster_states(d, 1);
    CHECK(*std::max_element(one.begin(), one.end()) == 0);
    CHECK_THROWS_AS(cluster_states(d, 0), ValidationError);
    CHECK_THROWS_AS(cluster_states(d, 7), ValidationError);
}

TEST_CASE("malformed distance matrices are rejected") {
    MatrixXd d = random_distances(4, 4);
    MatrixXd asym = d;
    asym(1, 2) += 0.5;
    CHECK_THROWS_AS(cluster_states(asym, 2), ValidationError);
    MatrixXd diag = d;
    diag(2, 2) = 0.3;
    CHECK_THROWS_AS(cluster_states(diag, 2), ValidationError);
    MatrixXd big = d;
    big(0, 3) = big(3, 0) = 2.7;
    CHECK_THROWS_AS(cluster_states(big, 2), ValidationError);
    CHECK_THROWS_AS(cluster_states(MatrixXd::Zero(3, 4), 2), ValidationError);
}

TEST_CASE("dendrogram cuts nest") {
    for (uint64_t seed : {11u, 12u, 13u, 14u}) {
        MatrixXd d = random_distances(9, seed);
        for (int k = 1; k < 9; ++k)
            CHECK(coarsens(cluster_states(d, k), cluster_states(d, k + 1)));
    }
}

TEST_CASE("permutation equivariance") {
    MatrixXd d = random_distances(7, 21);
    std::vector<int> base = cluster_states(d, 3);
    // Reverse the state order.
    int n = 7;
    MatrixXd p(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p(i, j) = d(n - 1 - i, n - 1 - j);
    std::vector<int> rev = cluster_states(p, 3);
    std::vector<int> undone(n);
    for (int i = 0; i < n; ++i) undone[size_t(i)] = rev[size_t(n - 1 - i)];
    CHECK(same_partition(base, undone));
}

TEST_CASE("scale invariance of trajectory clustering") {
    SplitMix64 rng(31);
    int n = 20, S = 6;
    MatrixXd traj(n, S);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < S; ++s) traj(i, s) = rng.uniform(0.0, 5.0);
    std::vector<int> base = cluster_trajectories({traj}, 3);
    MatrixXd scaled = traj;
    scaled.col(1) *= 353.0;
    scaled.col(4) *= 1e-6;
    CHECK(cluster_trajectories({scaled}, 3) == base);
}

TEST_CASE("duplicated state rows co-cluster") {
    SplitMix64 rng(32);
    int n = 14;
    MatrixXd traj(n, 5);
    for (int i = 0; i < n; ++i) {
        traj(i, 0) = rng.uniform(0.0, 1.0);
        traj(i, 1) = rng.uniform(0.0, 1.0);
        traj(i, 2) = rng.uniform(0.0, 1.0);
    }
    traj.col(3) = traj.col(0);
    traj.col(4) = traj.col(0);
    std::vector<int> labels = cluster_trajectories({traj}, 3);
    CHECK(labels[0] == labels[3]);
    CHECK(labels[0] == labels[4]);
}

TEST_CASE("distance averaging across tasks and constant flags") {
    int n = 10;
    MatrixXd a(n, 2), b(n, 2);
    for (int i = 0; i < n; ++i) {
        a(i, 0) = i;
        a(i, 1) = i;  // rho = 1 in task one
        b(i, 0) = i;
        b(i, 1) = n - i;  // rho = -1 in task two
    }
    MatrixXd d = distance_matrix({a, b});
    CHECK(d(0, 1) == doctest::Approx(1.0).epsilon(1e-14));

    MatrixXd c = a;
    c.col(1).setConstant(3.0);
    std::vector<int> constant;
    distance_matrix({a, c}, &constant);
    CHECK(constant.empty());  // column 1 varies in task one
    std::vector<int> constant2;
    MatrixXd cc = c;
    distance_matrix({c, cc}, &constant2);
    CHECK(constant2 == std::vector<int>{1});
}

TEST_CASE("pbpk assignments stay sane") {
    DoseSchedule d;
    d.route = Route::IV;
    d.dose_mg = 1400;
    d.infusion_h = 2;
    PbpkModel m = build_model("paracetamol", Route::IV, d);
    VectorXd grid = VectorXd::LinSpaced(201, 0.0, 24.0);
    Trajectory tr = integrate(m, initial_state(m), 24.0, grid);
    std::vector<int> labels = cluster_trajectories({tr.states}, 2);
    REQUIRE(int(labels.size()) == 22);
    CHECK(n_clusters(labels) == 2);
    // Both clusters populated.
    int c0 = int(std::count(labels.begin(), labels.end(), 0));
    CHECK(c0 > 0);
    CHECK(c0 < 22);
    // Singleton cut works on the full system too.
    CHECK(n_clusters(cluster_trajectories({tr.states}, 22)) == 22);
}

}  // TEST_SUITE
