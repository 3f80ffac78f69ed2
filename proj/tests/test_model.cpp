#include "doctest.h"

#include "metapinn/model.hpp"
#include "reference_rhs.hpp"

#include <cmath>

using namespace metapinn;

namespace {

PbpkModel iv_model(const std::string& drug, double dose = 0,
                   double inf = 1.0, MaskSpec mask = {}) {
    DoseSchedule d;
    d.route = Route::IV;
    d.dose_mg = dose;
    d.infusion_h = inf;
    return build_model(drug, Route::IV, d, mask);
}

PbpkModel oral_model(double dose = 0, MaskSpec mask = {}) {
    DoseSchedule d;
    d.route = Route::Oral;
    d.dose_mg = dose;
    return build_model("paracetamol", Route::Oral, d, mask);
}

VectorXd random_state(SplitMix64& rng, int n, double scale) {
    VectorXd u(n);
    for (int i = 0; i < n; ++i) u[i] = rng.uniform(0.0, scale);
    return u;
}

void check_close(const VectorXd& a, const VectorXd& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) {
        double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        CHECK(std::abs(a[i] - b[i]) <= tol * scale);
    }
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("state layout and bookkeeping indices") {
    PbpkModel miv = iv_model("theophylline");
    CHECK(miv.n_states == 22);
    CHECK(miv.state_names[0] == "Arterial");
    CHECK(miv.venous == 1);
    CHECK(miv.liver == 19);
    CHECK(miv.liver_met == 20);
    CHECK(miv.urine == 21);

    PbpkModel mo = oral_model();
    CHECK(mo.n_states == 33);
    CHECK(mo.state("StomachFluidSolid") == 24);
    CHECK(mo.state("Feces") == 29);
    CHECK(mo.liver == 30);
    CHECK(mo.urine == 32);
    CHECK(mo.state("NoSuchOrgan") == -1);
}

TEST_CASE("construction rejects invalid requests") {
    DoseSchedule d;
    d.route = Route::IV;
    d.dose_mg = 100;
    d.infusion_h = 1;
    CHECK_THROWS_AS(build_model("ibuprofen", Route::IV, d), ValidationError);
    DoseSchedule oral;
    oral.route = Route::Oral;
    oral.dose_mg = 100;
    CHECK_THROWS_AS(build_model("theophylline", Route::Oral, oral),
                    ValidationError);
    CHECK_THROWS_AS(build_model("paracetamol", Route::Oral, d),
                    ValidationError);
    DoseSchedule bad = d;
    bad.infusion_h = 0;
    CHECK_THROWS_AS(build_model("paracetamol", Route::IV, bad),
                    ValidationError);
    CHECK_THROWS_AS(
        build_model("paracetamol", Route::IV, d, {MaskKind::Parameter, 99}),
        ValidationError);
}

TEST_CASE("blood flows balance at the arterial node") {
    CHECK(flow_imbalance(iv_model("paracetamol")) <= 1e-6);
    CHECK(flow_imbalance(iv_model("theophylline")) <= 1e-5);
}

TEST_CASE("frozen coefficient and clearance values") {
    PbpkModel para = iv_model("paracetamol");
    // Brain perfusion coefficient Q/V on the arterial column.
    double brain_in = 0;
    for (const auto& [col, coef] : para.lin[para.state("Brain")])
        if (col == para.state("Arterial")) brain_in = coef;
    CHECK(brain_in == doctest::Approx(35.0037397157816).epsilon(1e-12));

    // UGT2B15 at zero concentration, L/h.
    CHECK(intrinsic_clearance(para, 2, 0.0) ==
          doctest::Approx(5.887176534704659).epsilon(1e-12));

    PbpkModel theo = iv_model("theophylline");
    CHECK(intrinsic_clearance(theo, 2, 0.0) ==
          doctest::Approx(2.551583077014573).epsilon(1e-12));
    CHECK_THROWS_AS(intrinsic_clearance(theo, 17, 1.0), ValidationError);
}

TEST_CASE("rhs matches the hand-written theophylline equations") {
    PbpkModel m = iv_model("theophylline", 300.0, 2.0 / 3.0);
    SplitMix64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        VectorXd u = random_state(rng, 22, 12.0);
        double t = rng.uniform(0.0, 24.0);
        check_close(rhs(m, t, u), refrhs::theophylline_iv(t, u, 300.0, 2.0 / 3.0),
                    1e-12);
    }
}

TEST_CASE("rhs matches the hand-written paracetamol equations") {
    PbpkModel m = iv_model("paracetamol", 1400.0, 2.0);
    SplitMix64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        VectorXd u = random_state(rng, 22, 30.0);
        double t = rng.uniform(0.0, 24.0);
        check_close(rhs(m, t, u), refrhs::paracetamol_iv(t, u, 1400.0, 2.0),
                    1e-12);
    }
}

TEST_CASE("rhs matches the hand-written oral equations") {
    PbpkModel m = oral_model(1000.0);
    SplitMix64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        VectorXd u = random_state(rng, 33, 25.0);
        // Solid pools can sit far above tissue concentrations.
        u[24] = rng.uniform(0.0, 1000.0);
        u[6] = rng.uniform(0.0, 500.0);
        u[17] = rng.uniform(0.0, 500.0);
        double t = rng.uniform(0.0, 24.0);
        check_close(rhs(m, t, u), refrhs::paracetamol_oral(t, u), 1e-12);
    }
}

TEST_CASE("mass weights match the hand-written accounting") {
    PbpkModel theo = iv_model("theophylline");
    PbpkModel oral = oral_model();
    SplitMix64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        VectorXd ut = random_state(rng, 22, 10.0);
        CHECK(total_mass(theo, ut) ==
              doctest::Approx(refrhs::theo_mass(ut)).epsilon(1e-12));
        VectorXd uo = random_state(rng, 33, 10.0);
        CHECK(total_mass(oral, uo) ==
              doctest::Approx(refrhs::para_oral_mass(uo)).epsilon(1e-12));
    }
}

TEST_CASE("masking at table values leaves the dynamics unchanged") {
    PbpkModel plain = iv_model("theophylline", 300.0, 2.0 / 3.0);
    PbpkModel pmask =
        iv_model("theophylline", 300.0, 2.0 / 3.0, {MaskKind::Parameter, 2});
    PbpkModel tmask =
        iv_model("theophylline", 300.0, 2.0 / 3.0, {MaskKind::Term, 2});
    SplitMix64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        VectorXd u = random_state(rng, 22, 12.0);
        double t = rng.uniform(0.0, 24.0);
        VectorXd base = rhs(plain, t, u);
        // Parameter mask with no override and with the table values.
        check_close(rhs(pmask, t, u), base, 1e-12);
        RhsOverride ov;
        ov.vk = std::array<double, 2>{4.39e-4, 230.0};
        check_close(rhs(pmask, t, u, ov), base, 1e-12);
        // Term mask without a supplied g falls back to the table term.
        check_close(rhs(tmask, t, u), base, 1e-12);
        // And with g supplied, exactly that rate moves liver -> pool.
        RhsOverride og;
        og.g = 0.37;
        VectorXd dg = rhs(tmask, t, u, og);
        VectorXd expect = base;
        const auto& e = tmask.drug.enzymes[2];
        double gtab = hepatic_term_rate(tmask, u[tmask.liver], e.vmax, e.km);
        expect[tmask.liver] += gtab - 0.37;
        expect[tmask.liver_met] += 0.37 - gtab;
        check_close(dg, expect, 1e-12);
    }
}

TEST_CASE("parameter override moves only the masked enzyme") {
    PbpkModel m = iv_model("theophylline", 0, 1.0, {MaskKind::Parameter, 2});
    double c = 3.7;
    RhsOverride ov;
    ov.vk = std::array<double, 2>{2 * 4.39e-4, 230.0};
    double base = metab_coef(m, c, {});
    double bumped = metab_coef(m, c, ov.vk);
    // Doubling vmax doubles exactly the masked enzyme's clearance term.
    double masked = intrinsic_clearance(m, 2, c) * m.beta;
    CHECK(bumped - base == doctest::Approx(masked).epsilon(1e-10));
}

TEST_CASE("metab_coef_dlog agrees with finite differences") {
    PbpkModel m = iv_model("theophylline", 0, 1.0, {MaskKind::Parameter, 2});
    double c = 5.1, vmax = 3.1e-4, km = 410.0;
    double dv, dk;
    metab_coef_dlog(m, c, vmax, km, dv, dk);
    double h = 1e-6;
    auto coef = [&](double v, double k) {
        return metab_coef(m, c, std::array<double, 2>{v, k});
    };
    double fd_v = (coef(vmax * std::exp(h), km) - coef(vmax * std::exp(-h), km)) /
                  (2 * h);
    double fd_k = (coef(vmax, km * std::exp(h)) - coef(vmax, km * std::exp(-h))) /
                  (2 * h);
    CHECK(dv == doctest::Approx(fd_v).epsilon(1e-6));
    CHECK(dk == doctest::Approx(fd_k).epsilon(1e-6));
    PbpkModel bad = iv_model("theophylline");
    CHECK_THROWS_AS(metab_coef_dlog(bad, c, vmax, km, dv, dk),
                    ValidationError);
}

TEST_CASE("hepatic term rate ties to intrinsic clearance") {
    PbpkModel m = iv_model("theophylline", 0, 1.0, {MaskKind::Term, 2});
    const auto& e = m.drug.enzymes[2];
    for (double c : {0.01, 0.5, 3.0, 9.0}) {
        double g = hepatic_term_rate(m, c, e.vmax, e.km);
        CHECK(g == doctest::Approx(intrinsic_clearance(m, 2, c) * c * m.beta)
                       .epsilon(1e-12));
    }
    PbpkModel plain = iv_model("theophylline");
    CHECK_THROWS_AS(hepatic_term_rate(plain, 1.0, e.vmax, e.km),
                    ValidationError);
}

TEST_CASE("lagged linear form reproduces the rhs at the freeze point") {
    SplitMix64 rng(12);
    PbpkModel models[] = {iv_model("theophylline", 300.0, 2.0 / 3.0),
                          oral_model(1000.0)};
    for (const PbpkModel& m : models) {
        for (int trial = 0; trial < 25; ++trial) {
            VectorXd u = random_state(rng, m.n_states, 8.0);
            double t = rng.uniform(0.0, 24.0);
            auto [L, s] = lagged_linear_form(m, t, u);
            check_close(VectorXd(L * u + s), rhs(m, t, u), 1e-12);
        }
    }
}

TEST_CASE("lagged table matches the dense linear form rowwise") {
    PbpkModel m = oral_model(1000.0, {MaskKind::Term, 2});
    SplitMix64 rng(13);
    int n = 6;
    VectorXd times = VectorXd::LinSpaced(n, 0.5, 20.0);
    MatrixXd frozen(n, m.n_states);
    for (int i = 0; i < n; ++i)
        frozen.row(i) = random_state(rng, m.n_states, 6.0).transpose();
    LaggedTable tab = lagged_table(m, times, frozen);
    for (int i = 0; i < n; ++i) {
        auto [L, s] = lagged_linear_form(m, times[i], frozen.row(i));
        MatrixXd Lt = MatrixXd::Zero(m.n_states, m.n_states);
        for (int r = 0; r < m.n_states; ++r)
            for (const auto& ent : tab.rows[r]) Lt(r, ent.col) += ent.coef[i];
        CHECK((Lt - L).cwiseAbs().maxCoeff() <= 1e-12);
        check_close(VectorXd(tab.src.row(i).transpose()), s, 1e-12);
    }
    CHECK_THROWS_AS(lagged_table(m, times, frozen.topRows(2)),
                    ValidationError);
}

}  // TEST_SUITE
