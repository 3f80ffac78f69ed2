#include "metapinn/solver.hpp"

#include "metapinn/csvio.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace metapinn {

VectorXd initial_state(const PbpkModel& m) {
    VectorXd u0 = VectorXd::Zero(m.n_states);
    if (m.dose.route == Route::Oral)
        u0[m.state("StomachFluidSolid")] = m.dose.dose_mg;
    return u0;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                 a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output weights for the 4th order interpolant.
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

struct Stepper {
    const PbpkModel& m;
    const RhsOverride& ov;
    const IntegrateOptions& opts;
    long steps = 0;

    VectorXd f(double t, const VectorXd& y) { return rhs(m, t, y, ov); }

    // One accepted step from (t, y, k1); returns the step size actually
    // taken and fills y_new, k_last (FSAL) and the dense coefficients.
    double step(double t, const VectorXd& y, VectorXd& k1, double& h,
                double t_end, VectorXd& y_new, MatrixXd& rcont) {
        const int n = int(y.size());
        VectorXd k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ys(n), err(n);
        while (true) {
            if (++steps > opts.max_steps)
                throw NumericError("integrate: step limit exceeded at t=" +
                                   format_double(t));
            bool clipped = t + h >= t_end;
            if (clipped) h = t_end - t;
            if (h <= std::abs(t) * 1e-14 + 1e-300)
                throw NumericError("integrate: step size underflow at t=" +
                                   format_double(t));
            ys = y + h * a21 * k1;
            k2 = f(t + c2 * h, ys);
            ys = y + h * (a31 * k1 + a32 * k2);
            k3 = f(t + c3 * h, ys);
            ys = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            k4 = f(t + c4 * h, ys);
            ys = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            k5 = f(t + c5 * h, ys);
            ys = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 +
                          a65 * k5);
            k6 = f(t + h, ys);
            y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            k7 = f(t + h, y_new);
            err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 +
                       e7 * k7);
            double norm = 0;
            for (int i = 0; i < n; ++i) {
                double sc = opts.atol +
                            opts.rtol * std::max(std::abs(y[i]),
                                                 std::abs(y_new[i]));
                norm += (err[i] / sc) * (err[i] / sc);
            }
            norm = std::sqrt(norm / n);
            double fac = norm > 0 ? 0.9 * std::pow(norm, -0.2) : 5.0;
            fac = std::min(5.0, std::max(0.2, fac));
            if (norm <= 1.0) {
                double h_taken = h;
                h = clipped ? h_taken * fac : h * fac;
                VectorXd dy = y_new - y;
                rcont.col(0) = y;
                rcont.col(1) = dy;
                rcont.col(2) = h_taken * k1 - dy;
                rcont.col(3) = dy - h_taken * k7 - rcont.col(2);
                rcont.col(4) = h_taken * (d1 * k1 + d3 * k3 + d4 * k4 +
                                          d5 * k5 + d6 * k6 + d7 * k7);
                k1 = k7;
                return h_taken;
            }
            h *= fac;
        }
    }
};

VectorXd dense_eval(const MatrixXd& rcont, double theta) {
    return rcont.col(0) +
           theta * (rcont.col(1) +
                    (1 - theta) *
                        (rcont.col(2) +
                         theta * (rcont.col(3) + (1 - theta) * rcont.col(4))));
}

}  // namespace

Trajectory integrate(const PbpkModel& m, const VectorXd& u0, double horizon,
                     const VectorXd& out_times, const RhsOverride& ov,
                     const IntegrateOptions& opts) {
    if (horizon <= 0) throw ValidationError("integrate: horizon must be > 0");
    if (u0.size() != m.n_states)
        throw ValidationError("integrate: initial state size mismatch");
    const int nout = int(out_times.size());
    for (int i = 0; i < nout; ++i) {
        if (i > 0 && out_times[i] < out_times[i - 1])
            throw ValidationError("integrate: output times must be ascending");
        if (out_times[i] < 0 || out_times[i] > horizon * (1 + 1e-12))
            throw ValidationError("integrate: output time outside horizon");
    }

    std::vector<double> edges = {0.0};
    if (m.dose.route == Route::IV && m.dose.dose_mg > 0 &&
        m.dose.infusion_h < horizon)
        edges.push_back(m.dose.infusion_h);
    edges.push_back(horizon);

    Trajectory traj;
    traj.times = out_times;
    traj.states.resize(nout, m.n_states);

    Stepper st{m, ov, opts};
    VectorXd y = u0;
    int oi = 0;
    while (oi < nout && out_times[oi] <= 0) traj.states.row(oi++) = y;

    MatrixXd rcont(m.n_states, 5);
    VectorXd y_new(m.n_states);
    for (size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        double t = edges[seg], t_end = edges[seg + 1];
        VectorXd k1 = st.f(t, y);
        double h = std::min(1e-3 * (t_end - t), 1e-2);
        while (t < t_end) {
            double h_taken = st.step(t, y, k1, h, t_end, y_new, rcont);
            double t_new = t + h_taken;
            if (t_new >= t_end - 1e-14 * std::max(1.0, std::abs(t_end)))
                t_new = t_end;
            while (oi < nout && out_times[oi] <= t_new) {
                double theta = (out_times[oi] - t) / h_taken;
                theta = std::min(1.0, std::max(0.0, theta));
                traj.states.row(oi++) = dense_eval(rcont, theta);
            }
            y = y_new;
            t = t_new;
        }
    }
    while (oi < nout) traj.states.row(oi++) = y;
    return traj;
}

VectorXd rk4_endpoint(const PbpkModel& m, const VectorXd& u0, double t0,
                      double t1, int n_steps, const RhsOverride& ov) {
    if (n_steps <= 0) throw ValidationError("rk4_endpoint: need steps > 0");
    VectorXd y = u0;
    double h = (t1 - t0) / n_steps;
    for (int i = 0; i < n_steps; ++i) {
        double t = t0 + i * h;
        VectorXd k1 = rhs(m, t, y, ov);
        VectorXd k2 = rhs(m, t + h / 2, VectorXd(y + h / 2 * k1), ov);
        VectorXd k3 = rhs(m, t + h / 2, VectorXd(y + h / 2 * k2), ov);
        VectorXd k4 = rhs(m, t + h, VectorXd(y + h * k3), ov);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return y;
}

double mass_balance_error(const PbpkModel& m, const Trajectory& traj) {
    if (m.dose.dose_mg <= 0)
        throw ValidationError("mass_balance_error: model carries no dose");
    double worst = 0;
    for (int i = 0; i < traj.times.size(); ++i) {
        double t = traj.times[i];
        double expected = m.dose.dose_mg;
        if (m.dose.route == Route::IV)
            expected *= std::min(1.0, t / m.dose.infusion_h);
        if (expected <= 0) continue;
        double got = total_mass(m, traj.states.row(i).transpose());
        worst = std::max(worst, std::abs(got - expected) / m.dose.dose_mg);
    }
    return worst;
}

ObservationSet sample_observations(const Trajectory& traj, int state,
                                   const VectorXd& times, double sigma,
                                   uint64_t seed) {
    if (state < 0 || state >= traj.states.cols())
        throw ValidationError("sample_observations: state index out of range");
    if (sigma < 0)
        throw ValidationError("sample_observations: sigma must be >= 0");
    ObservationSet obs;
    obs.times = times;
    obs.values.resize(times.size());
    obs.sigma = sigma;
    obs.seed = seed;
    SplitMix64 rng(seed);
    const VectorXd& tt = traj.times;
    for (int i = 0; i < times.size(); ++i) {
        double t = times[i];
        if (t < tt[0] - 1e-12 || t > tt[tt.size() - 1] + 1e-12)
            throw ValidationError(
                "sample_observations: time outside trajectory span");
        int j = 0;
        while (j + 1 < tt.size() && tt[j + 1] < t) ++j;
        double clean;
        if (std::abs(tt[j] - t) <= 1e-12) {
            clean = traj.states(j, state);
        } else if (j + 1 < tt.size()) {
            double w = (t - tt[j]) / (tt[j + 1] - tt[j]);
            clean = (1 - w) * traj.states(j, state) +
                    w * traj.states(j + 1, state);
        } else {
            clean = traj.states(j, state);
        }
        double z = rng.normal();
        obs.values[i] = sigma > 0 ? clean * (1 + sigma * z) : clean;
    }
    return obs;
}

void write_trajectory_csv(const PbpkModel& m, const Trajectory& traj,
                          const std::string& path) {
    std::vector<std::string> header = {"time"};
    for (const auto& n : m.state_names) header.push_back(n);
    MatrixXd values(traj.times.size(), 1 + m.n_states);
    values.col(0) = traj.times;
    values.rightCols(m.n_states) = traj.states;
    write_csv(path, header, values);
}

Trajectory read_trajectory_csv(const PbpkModel& m, const std::string& path) {
    CsvTable t = read_csv(path);
    if (int(t.header.size()) != m.n_states + 1 || t.header[0] != "time")
        throw ValidationError("trajectory header mismatch in " + path);
    for (int i = 0; i < m.n_states; ++i)
        if (t.header[i + 1] != m.state_names[i])
            throw ValidationError("trajectory state order mismatch in " +
                                  path);
    Trajectory traj;
    traj.times = t.values.col(0);
    traj.states = t.values.rightCols(m.n_states);
    return traj;
}

void write_observations_csv(const ObservationSet& obs,
                            const std::string& path) {
    MatrixXd values(obs.times.size(), 2);
    values.col(0) = obs.times;
    values.col(1) = obs.values;
    write_csv(path, {"time", "value"}, values);
}

ObservationSet read_observations_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.col("time") != 0 || t.col("value") != 1)
        throw ValidationError("observations header mismatch in " + path);
    ObservationSet obs;
    obs.times = t.values.col(0);
    obs.values = t.values.col(1);
    return obs;
}

}  // namespace metapinn
