#include "doctest.h"

#include "metapinn/representation.hpp"

#include <cmath>
#include <vector>

using namespace metapinn;

namespace {

VectorXd some_times(int n, double T) {
    return VectorXd::LinSpaced(n, 0.13, 0.94 * T);
}

}  // namespace

TEST_SUITE("representation") {

TEST_CASE("init follows the documented draw order") {
    const int H = 4;
    const double w0 = 30.0;
    BranchNet n = BranchNet::init(77, H, w0, 24.0);
    SplitMix64 rng(77);
    for (int i = 0; i < H; ++i)
        CHECK(n.W1[i] == rng.uniform(-w0, w0));
    for (int i = 0; i < H; ++i)
        CHECK(n.b1[i] == rng.uniform(-w0, w0));
    double lim = std::sqrt(6.0 / H);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < H; ++j)
            CHECK(n.W2(i, j) == rng.uniform(-lim, lim));
    for (int i = 0; i < H; ++i)
        CHECK(n.b2[i] == rng.uniform(-lim, lim));

    BranchNet again = BranchNet::init(77, H, w0, 24.0);
    CHECK((n.W2 - again.W2).cwiseAbs().maxCoeff() == 0.0);
    BranchNet other = BranchNet::init(78, H, w0, 24.0);
    CHECK((n.W1 - other.W1).cwiseAbs().maxCoeff() > 0.0);

    CHECK_THROWS_AS(BranchNet::init(1, 0, w0, 24.0), ValidationError);
    CHECK_THROWS_AS(BranchNet::init(1, 4, -1.0, 24.0), ValidationError);
    CHECK_THROWS_AS(BranchNet::init(1, 4, w0, 0.0), ValidationError);
}

TEST_CASE("reported time derivative matches finite differences") {
    BranchNet n = BranchNet::init(5, 6, 12.0, 24.0);
    VectorXd t = some_times(9, 24.0);
    FeatureSlice f = n.forward(t);
    const double h = 1e-6;
    FeatureSlice fp = n.forward(VectorXd(t.array() + h));
    FeatureSlice fm = n.forward(VectorXd(t.array() - h));
    MatrixXd fd = (fp.F - fm.F) / (2 * h);
    CHECK((fd - f.dF).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("backprop matches finite differences over every parameter") {
    const int H = 5, n = 7;
    BranchNet net = BranchNet::init(9, H, 8.0, 24.0);
    VectorXd t = some_times(n, 24.0);
    SplitMix64 rng(10);
    MatrixXd A(n, H), B(n, H);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < H; ++j) {
            A(i, j) = rng.normal();
            B(i, j) = rng.normal();
        }
    // Scalar probe L = <A, F> + <B, dF>; its adjoints are A and B.
    BranchCache cache;
    net.forward(t, cache);
    BranchGrads g = net.backprop(cache, A, B);
    const int P = net.n_params();
    std::vector<double> theta(P), grad(P);
    net.pack(theta.data());
    net.pack_grads(g, grad.data());

    auto probe = [&](const std::vector<double>& p) {
        BranchNet nn = net;
        nn.unpack(p.data());
        FeatureSlice f = nn.forward(t);
        return (A.array() * f.F.array()).sum() +
               (B.array() * f.dF.array()).sum();
    };
    const double h = 1e-6;
    for (int p = 0; p < P; ++p) {
        std::vector<double> up = theta, dn = theta;
        up[size_t(p)] += h;
        dn[size_t(p)] -= h;
        double fd = (probe(up) - probe(dn)) / (2 * h);
        CHECK(std::abs(fd - grad[size_t(p)]) <=
              1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("pack and unpack are inverse") {
    BranchNet n = BranchNet::init(3, 4, 5.0, 10.0);
    std::vector<double> p(size_t(n.n_params()));
    n.pack(p.data());
    BranchNet copy = BranchNet::init(99, 4, 5.0, 10.0);
    copy.unpack(p.data());
    std::vector<double> q(p.size());
    copy.pack(q.data());
    CHECK(p == q);
    CHECK((copy.W2 - n.W2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(n.n_params() == 4 * 7);
}

TEST_CASE("sine output layer pushforward") {
    MatrixXd v(2, 2), dv(2, 2);
    v << 0.0, 1.0, -0.5, 2.0;
    dv << 1.0, 2.0, 3.0, 4.0;
    auto [f, df] = features_with_dt(v, dv);
    CHECK(f(0, 1) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
    CHECK(df(1, 0) == doctest::Approx(3.0 * std::cos(-0.5)).epsilon(1e-15));
    CHECK_THROWS_AS(features_with_dt(v, MatrixXd::Zero(3, 2)),
                    ValidationError);
}

TEST_CASE("bundle evaluation keeps branch order") {
    std::vector<BranchNet> nets = {BranchNet::init(1, 3, 4.0, 24.0),
                                   BranchNet::init(2, 5, 4.0, 24.0)};
    VectorXd t = some_times(6, 24.0);
    FeatureBundle b = eval_bundle(nets, t);
    REQUIRE(b.branch.size() == 2);
    CHECK(b.branch[0].F.cols() == 3);
    CHECK(b.branch[1].F.cols() == 5);
    CHECK(b.branch[0].F.rows() == 6);
    CHECK((b.branch[1].F - nets[1].forward(t).F).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("checkpoint round trip is exact for mixed widths") {
    std::vector<BranchNet> nets = {BranchNet::init(21, 4, 240.0, 24.0),
                                   BranchNet::init(22, 6, 10.0, 24.0)};
    write_checkpoint(nets, "/tmp/mp_ckpt_rt.csv");
    std::vector<BranchNet> back = read_checkpoint("/tmp/mp_ckpt_rt.csv");
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].H == nets[i].H);
        CHECK(back[i].T == nets[i].T);
        CHECK(back[i].w0 == nets[i].w0);
        CHECK((back[i].W1 - nets[i].W1).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[i].b1 - nets[i].b1).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[i].W2 - nets[i].W2).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back[i].b2 - nets[i].b2).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(read_checkpoint("/tmp/mp_no_such_ckpt.csv"),
                    ValidationError);
}

TEST_CASE("aux net starts silent and exposes exact jacobian") {
    AuxNet a = AuxNet::init(5, 1.0, 24.0);
    VectorXd t = some_times(8, 24.0);
    CHECK(a.eval(t).cwiseAbs().maxCoeff() == 0.0);  // w2 = 0, b2 = 0

    // Give it a voice, then check all 10 derivative columns.
    double p[10];
    a.pack(p);
    p[6] = 0.7;
    p[7] = -0.4;
    p[8] = 0.2;
    p[9] = 0.05;
    a.unpack(p);
    MatrixXd jac;
    VectorXd g = a.eval(t, &jac);
    REQUIRE(jac.rows() == 8);
    REQUIRE(jac.cols() == 10);
    CHECK(AuxNet::n_params() == 10);
    const double h = 1e-6;
    for (int k = 0; k < 10; ++k) {
        double pp[10], pm[10];
        a.pack(pp);
        a.pack(pm);
        pp[k] += h;
        pm[k] -= h;
        AuxNet up = a, dn = a;
        up.unpack(pp);
        dn.unpack(pm);
        VectorXd fd = (up.eval(t) - dn.eval(t)) / (2 * h);
        CHECK((fd - jac.col(k)).cwiseAbs().maxCoeff() <= 1e-7);
    }

    // gamma multiplies the whole output.
    AuxNet twice = a;
    twice.gamma = 2.0;
    CHECK((twice.eval(t) - 2.0 * g).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK_THROWS_AS(AuxNet::init(5, 1.0, 0.0), ValidationError);
}

TEST_CASE("aux checkpoint round trip is exact") {
    AuxNet a = AuxNet::init(6, 1.4, 24.0);
    double p[10];
    a.pack(p);
    for (int i = 0; i < 10; ++i) p[i] = 0.1 * (i + 1) / 3.0;
    a.unpack(p);
    write_aux_checkpoint(a, "/tmp/mp_aux_rt.csv");
    AuxNet back = read_aux_checkpoint("/tmp/mp_aux_rt.csv");
    CHECK(back.T == a.T);
    CHECK(back.gamma == a.gamma);
    double q[10];
    back.pack(q);
    for (int i = 0; i < 10; ++i) CHECK(q[i] == p[i]);
}

}  // TEST_SUITE
