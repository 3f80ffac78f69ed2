#include "metapinn/representation.hpp"

#include "metapinn/csvio.hpp"

#include <cmath>

namespace metapinn {

BranchNet BranchNet::init(uint64_t seed, int width, double w0, double T) {
    if (width < 1) throw ValidationError("BranchNet: width must be >= 1");
    if (w0 <= 0 || T <= 0) throw ValidationError("BranchNet: w0, T must be > 0");
    BranchNet n;
    n.H = width;
    n.T = T;
    n.w0 = w0;
    SplitMix64 rng(seed);
    n.W1.resize(width);
    n.b1.resize(width);
    n.W2.resize(width, width);
    n.b2.resize(width);
    for (int i = 0; i < width; ++i) n.W1[i] = rng.uniform(-w0, w0);
    for (int i = 0; i < width; ++i) n.b1[i] = rng.uniform(-w0, w0);
    double lim = std::sqrt(6.0 / width);
    for (int i = 0; i < width; ++i)
        for (int j = 0; j < width; ++j) n.W2(i, j) = rng.uniform(-lim, lim);
    for (int i = 0; i < width; ++i) n.b2[i] = rng.uniform(-lim, lim);
    return n;
}

FeatureSlice BranchNet::forward(const VectorXd& times,
                                BranchCache& cache) const {
    cache.tau = times / T;
    cache.z1 = cache.tau * W1.transpose();
    cache.z1.rowwise() += b1.transpose();
    cache.a1 = cache.z1.array().sin();
    cache.da1 = cache.z1.array().cos().matrix() * W1.asDiagonal();
    cache.z2 = cache.a1 * W2.transpose();
    cache.z2.rowwise() += b2.transpose();
    cache.dz2 = cache.da1 * W2.transpose();
    FeatureSlice out;
    out.F = cache.z2.array().sin();
    out.dF = (cache.dz2.array() * cache.z2.array().cos()) / T;
    return out;
}

FeatureSlice BranchNet::forward(const VectorXd& times) const {
    BranchCache cache;
    return forward(times, cache);
}

BranchGrads BranchNet::backprop(const BranchCache& cache,
                                const MatrixXd& adjF,
                                const MatrixXd& adjdF) const {
    MatrixXd adjd = adjdF / T;
    Eigen::ArrayXXd cos_z2 = cache.z2.array().cos();
    Eigen::ArrayXXd sin_z2 = cache.z2.array().sin();
    MatrixXd adj_z2 =
        (adjF.array() * cos_z2 - adjd.array() * cache.dz2.array() * sin_z2)
            .matrix();
    MatrixXd adj_dz2 = (adjd.array() * cos_z2).matrix();

    BranchGrads g;
    g.gW2 = adj_z2.transpose() * cache.a1 + adj_dz2.transpose() * cache.da1;
    g.gb2 = adj_z2.colwise().sum().transpose();

    MatrixXd adj_a1 = adj_z2 * W2;
    MatrixXd adj_da1 = adj_dz2 * W2;
    Eigen::ArrayXXd cos_z1 = cache.z1.array().cos();
    Eigen::ArrayXXd sin_z1 = cache.z1.array().sin();
    MatrixXd w_sin_z1 = sin_z1.matrix() * W1.asDiagonal();
    MatrixXd adj_z1 =
        (adj_a1.array() * cos_z1 - adj_da1.array() * w_sin_z1.array())
            .matrix();
    g.gW1 = (cache.tau.asDiagonal() * adj_z1).colwise().sum().transpose() +
            (adj_da1.array() * cos_z1).matrix().colwise().sum().transpose();
    g.gb1 = adj_z1.colwise().sum().transpose();
    return g;
}

void BranchNet::pack(double* out) const {
    int p = 0;
    for (int i = 0; i < H; ++i) out[p++] = W1[i];
    for (int i = 0; i < H; ++i) out[p++] = b1[i];
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < H; ++j) out[p++] = W2(i, j);
    for (int i = 0; i < H; ++i) out[p++] = b2[i];
}

void BranchNet::unpack(const double* in) {
    int p = 0;
    for (int i = 0; i < H; ++i) W1[i] = in[p++];
    for (int i = 0; i < H; ++i) b1[i] = in[p++];
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < H; ++j) W2(i, j) = in[p++];
    for (int i = 0; i < H; ++i) b2[i] = in[p++];
}

void BranchNet::pack_grads(const BranchGrads& g, double* out) const {
    int p = 0;
    for (int i = 0; i < H; ++i) out[p++] = g.gW1[i];
    for (int i = 0; i < H; ++i) out[p++] = g.gb1[i];
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < H; ++j) out[p++] = g.gW2(i, j);
    for (int i = 0; i < H; ++i) out[p++] = g.gb2[i];
}

std::pair<MatrixXd, MatrixXd> features_with_dt(const MatrixXd& v,
                                               const MatrixXd& dv) {
    if (v.rows() != dv.rows() || v.cols() != dv.cols())
        throw ValidationError("features_with_dt: shape mismatch");
    return {v.array().sin().matrix(),
            (dv.array() * v.array().cos()).matrix()};
}

FeatureBundle eval_bundle(const std::vector<BranchNet>& nets,
                          const VectorXd& times) {
    FeatureBundle b;
    b.times = times;
    b.branch.reserve(nets.size());
    for (const auto& n : nets) b.branch.push_back(n.forward(times));
    return b;
}

AuxNet AuxNet::init(uint64_t seed, double gamma, double T) {
    if (T <= 0) throw ValidationError("AuxNet: T must be > 0");
    AuxNet a;
    a.T = T;
    a.gamma = gamma;
    SplitMix64 rng(seed);
    for (int i = 0; i < 3; ++i) a.w1[i] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) a.b1[i] = rng.uniform(-1.0, 1.0);
    a.w2.setZero();  // start at g == 0 with live gradients on w2, b2
    a.b2 = 0;
    return a;
}

VectorXd AuxNet::eval(const VectorXd& times, MatrixXd* jac) const {
    const int n = int(times.size());
    VectorXd g(n);
    if (jac) jac->resize(n, 10);
    for (int i = 0; i < n; ++i) {
        double tau = times[i] / T;
        double acc = b2;
        for (int k = 0; k < 3; ++k) {
            double z = w1[k] * tau + b1[k];
            double sig = 1.0 / (1.0 + std::exp(-z));
            double sw = z * sig;
            acc += w2[k] * sw;
            if (jac) {
                double dsw = sig * (1.0 + z * (1.0 - sig));
                (*jac)(i, k) = gamma * w2[k] * dsw * tau;  // d/dw1
                (*jac)(i, 3 + k) = gamma * w2[k] * dsw;    // d/db1
                (*jac)(i, 6 + k) = gamma * sw;             // d/dw2
            }
        }
        if (jac) (*jac)(i, 9) = gamma;  // d/db2
        g[i] = gamma * acc;
    }
    return g;
}

void AuxNet::pack(double* out) const {
    for (int i = 0; i < 3; ++i) out[i] = w1[i];
    for (int i = 0; i < 3; ++i) out[3 + i] = b1[i];
    for (int i = 0; i < 3; ++i) out[6 + i] = w2[i];
    out[9] = b2;
}

void AuxNet::unpack(const double* in) {
    for (int i = 0; i < 3; ++i) w1[i] = in[i];
    for (int i = 0; i < 3; ++i) b1[i] = in[3 + i];
    for (int i = 0; i < 3; ++i) w2[i] = in[6 + i];
    b2 = in[9];
}

// Checkpoint rows: branch,slot,i,j,value. Slot -1 carries (H, T, w0) in
// the i field selector; slots 0..3 are W1, b1, W2, b2.
void write_checkpoint(const std::vector<BranchNet>& nets,
                      const std::string& path) {
    long rows = 0;
    for (const auto& n : nets) rows += 3 + n.n_params();
    MatrixXd v(rows, 5);
    long r = 0;
    for (size_t m = 0; m < nets.size(); ++m) {
        const auto& n = nets[m];
        double meta[3] = {double(n.H), n.T, n.w0};
        for (int i = 0; i < 3; ++i)
            v.row(r++) << double(m), -1, double(i), 0, meta[i];
        for (int i = 0; i < n.H; ++i)
            v.row(r++) << double(m), 0, double(i), 0, n.W1[i];
        for (int i = 0; i < n.H; ++i)
            v.row(r++) << double(m), 1, double(i), 0, n.b1[i];
        for (int i = 0; i < n.H; ++i)
            for (int j = 0; j < n.H; ++j)
                v.row(r++) << double(m), 2, double(i), double(j), n.W2(i, j);
        for (int i = 0; i < n.H; ++i)
            v.row(r++) << double(m), 3, double(i), 0, n.b2[i];
    }
    write_csv(path, {"branch", "slot", "i", "j", "value"}, v);
}

std::vector<BranchNet> read_checkpoint(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"branch", "slot", "i", "j",
                                             "value"})
        throw ValidationError("checkpoint header mismatch in " + path);
    std::vector<BranchNet> nets;
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
        int m = int(t.values(r, 0)), slot = int(t.values(r, 1));
        int i = int(t.values(r, 2)), j = int(t.values(r, 3));
        double val = t.values(r, 4);
        if (m == int(nets.size())) nets.emplace_back();
        if (m >= int(nets.size()))
            throw ValidationError("checkpoint branch order broken in " + path);
        BranchNet& n = nets[m];
        if (slot == -1) {
            if (i == 0) {
                n.H = int(val);
                n.W1.resize(n.H);
                n.b1.resize(n.H);
                n.W2.resize(n.H, n.H);
                n.b2.resize(n.H);
            } else if (i == 1) {
                n.T = val;
            } else {
                n.w0 = val;
            }
        } else if (slot == 0) {
            n.W1[i] = val;
        } else if (slot == 1) {
            n.b1[i] = val;
        } else if (slot == 2) {
            n.W2(i, j) = val;
        } else if (slot == 3) {
            n.b2[i] = val;
        } else {
            throw ValidationError("checkpoint slot unknown in " + path);
        }
    }
    if (nets.empty()) throw ValidationError("checkpoint empty: " + path);
    return nets;
}

void write_aux_checkpoint(const AuxNet& aux, const std::string& path) {
    MatrixXd v(12, 2);
    double p[10];
    aux.pack(p);
    v.row(0) << -1, aux.T;
    v.row(1) << -2, aux.gamma;
    for (int i = 0; i < 10; ++i) v.row(2 + i) << double(i), p[i];
    write_csv(path, {"slot", "value"}, v);
}

AuxNet read_aux_checkpoint(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.values.rows() != 12)
        throw ValidationError("aux checkpoint shape mismatch in " + path);
    AuxNet a;
    double p[10];
    for (Eigen::Index r = 0; r < 12; ++r) {
        int slot = int(t.values(r, 0));
        double val = t.values(r, 1);
        if (slot == -1)
            a.T = val;
        else if (slot == -2)
            a.gamma = val;
        else
            p[slot] = val;
    }
    a.unpack(p);
    return a;
}

}  // namespace metapinn
