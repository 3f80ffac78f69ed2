#pragma once

#include "metapinn/common.hpp"

#include <string>
#include <vector>

namespace metapinn {

// Sine-activated two-layer feature network shared by all states of one
// cluster: F(t) = sin(W2 sin(W1 t/T + b1) + b2), evaluated together with
// its exact time derivative.

struct FeatureSlice {
    MatrixXd F;   // n x H
    MatrixXd dF;  // n x H, dF/dt
};

struct BranchCache {
    VectorXd tau;
    MatrixXd z1, a1, da1, z2, dz2;
};

struct BranchGrads {
    VectorXd gW1, gb1;
    MatrixXd gW2;
    VectorXd gb2;
};

struct BranchNet {
    int H = 0;
    double T = 1, w0 = 1;
    VectorXd W1, b1;
    MatrixXd W2;
    VectorXd b2;

    // First layer uniform in [-w0, w0] (w0 sets the frequency reach),
    // second layer uniform in +-sqrt(6/H). Draw order is part of the
    // reproducibility contract: W1, b1, W2 row-major, b2.
    static BranchNet init(uint64_t seed, int width, double w0, double T);

    FeatureSlice forward(const VectorXd& times) const;
    FeatureSlice forward(const VectorXd& times, BranchCache& cache) const;
    BranchGrads backprop(const BranchCache& cache, const MatrixXd& adjF,
                         const MatrixXd& adjdF) const;

    int n_params() const { return H * (H + 3); }
    void pack(double* out) const;
    void unpack(const double* in);
    void pack_grads(const BranchGrads& g, double* out) const;
};

// The (value, derivative) pushforward of the sine output layer.
std::pair<MatrixXd, MatrixXd> features_with_dt(const MatrixXd& v,
                                               const MatrixXd& dv);

struct FeatureBundle {
    VectorXd times;
    std::vector<FeatureSlice> branch;
};

FeatureBundle eval_bundle(const std::vector<BranchNet>& nets,
                          const VectorXd& times);

// Small gated net producing a scalar time course; exactly 10 trainable
// numbers: w1, b1, w2 (3 each) and b2.
struct AuxNet {
    double T = 1, gamma = 1;
    Eigen::Vector3d w1, b1, w2;
    double b2 = 0;

    static AuxNet init(uint64_t seed, double gamma, double T);

    // g(t) and optionally the 10-column Jacobian d g/d params in pack
    // order [w1, b1, w2, b2].
    VectorXd eval(const VectorXd& times, MatrixXd* jac = nullptr) const;

    static constexpr int n_params() { return 10; }
    void pack(double* out) const;
    void unpack(const double* in);
};

void write_checkpoint(const std::vector<BranchNet>& nets,
                      const std::string& path);
std::vector<BranchNet> read_checkpoint(const std::string& path);

void write_aux_checkpoint(const AuxNet& aux, const std::string& path);
AuxNet read_aux_checkpoint(const std::string& path);

}  // namespace metapinn
