#include "metapinn/discovery.hpp"

#include "metapinn/csvio.hpp"

#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace metapinn {

VectorXd extract_term_trajectory(const AuxNet& aux, const VectorXd& times) {
    return aux.eval(times);
}

PiSet compute_pi_groups(const PbpkModel& m, const VectorXd& times,
                        const VectorXd& cliv, const VectorXd& Y,
                        double y_floor_rel) {
    if (times.size() != cliv.size() || times.size() != Y.size())
        throw ValidationError("compute_pi_groups: length mismatch");
    if (m.mask.enzyme < 0)
        throw ValidationError("compute_pi_groups: no masked enzyme");
    const auto& e = m.drug.enzymes[m.mask.enzyme];
    const auto& d = m.drug;
    double x1 = d.mw;
    double x3 = e.km * d.fu_mic;
    double x4 = m.sys.mppgl * m.sys.wliver;
    double x5 = d.fu_b * d.rb / m.kp_liver;
    double x6 = 1.0 / m.v_liver;
    double floor = y_floor_rel * Y.maxCoeff();

    PiSet out;
    for (int i = 0; i < times.size(); ++i) {
        if (cliv[i] <= 0 || Y[i] <= 0 || Y[i] < floor) {
            ++out.n_dropped;
            continue;
        }
        PiSample s;
        s.t = times[i];
        s.Y = Y[i];
        s.X[0] = e.vmax * cliv[i];
        s.X[1] = x1;
        s.X[2] = d.fu_b * cliv[i];
        s.X[3] = x3;
        s.X[4] = x4;
        s.X[5] = x5;
        s.X[6] = x6;
        s.PIy = s.Y / (s.X[0] * s.X[5]) * s.X[3] / (s.X[4] * s.X[6]);
        s.PI1 = s.X[1] * s.X[3] / (s.X[4] * s.X[6]);
        s.PI2 = s.X[2] / (s.X[4] * s.X[6]);
        out.samples.push_back(s);
    }
    return out;
}

PowerLawFit power_law_regress(const std::vector<PiSample>& samples) {
    std::vector<Eigen::Vector3d> rows;  // log PIy, log PI1, log PI2
    for (const auto& s : samples) {
        if (s.PIy <= 0 || s.PI1 <= 0 || s.PI2 <= 0) continue;
        rows.push_back({std::log(s.PIy), std::log(s.PI1), std::log(s.PI2)});
    }
    const int n = int(rows.size());
    if (n < 3) throw ValidationError("power_law_regress: need >= 3 samples");

    VectorXd y(n);
    MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i) {
        y[i] = rows[i][0];
        X(i, 0) = 1.0;
        X(i, 1) = rows[i][1];
        X(i, 2) = rows[i][2];
    }

    // Constant groups carry no slope information; they fold into the
    // intercept with a zero exponent.
    bool use1 = (X.col(1).array() - X.col(1).mean()).square().sum() / n >
                1e-20;
    bool use2 = (X.col(2).array() - X.col(2).mean()).square().sum() / n >
                1e-20;
    std::vector<int> cols{0};
    if (use1) cols.push_back(1);
    if (use2) cols.push_back(2);
    MatrixXd Xu(n, int(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) Xu.col(int(j)) = X.col(cols[j]);

    VectorXd beta = Xu.colPivHouseholderQr().solve(y);
    PowerLawFit fit;
    fit.n_used = n;
    fit.c = std::exp(beta[0]);
    int j = 1;
    if (use1) fit.a = beta[j++];
    if (use2) fit.b = beta[j++];

    double sst = (y.array() - y.mean()).square().sum();
    if (sst < 1e-20) {
        fit.degenerate = true;
        fit.r2 = 0;
    } else {
        double ssr = (y - Xu * beta).squaredNorm();
        fit.r2 = 1.0 - ssr / sst;
    }
    return fit;
}

std::string recovered_form(const PowerLawFit& fit) {
    std::ostringstream os;
    os.precision(6);
    os << "PIy = " << fit.c;
    if (fit.a != 0) os << " * PI1^" << fit.a;
    if (fit.b != 0) os << " * PI2^" << fit.b;
    os << "\n";
    os << "Y = " << fit.c << " * (X0/X3) * X4 * X5 * X6";
    if (fit.a != 0) os << " * (X1*X3/(X4*X6))^" << fit.a;
    if (fit.b != 0) os << " * (X2/(X4*X6))^" << fit.b;
    os << "\n";
    if (std::abs(fit.a) <= 0.05 && std::abs(fit.b) <= 0.05 &&
        std::abs(fit.c - 1) <= 0.05)
        os << "simplified: Y = (X0/X3) * X4 * X5 * X6\n";
    if (fit.degenerate)
        os << "note: output variance too small for R^2\n";
    else
        os << "R^2 = " << fit.r2 << "\n";
    return os.str();
}

void write_pi_csv(const PiSet& set, const std::string& path) {
    MatrixXd values(int(set.samples.size()), 12);
    for (size_t i = 0; i < set.samples.size(); ++i) {
        const auto& s = set.samples[i];
        values.row(int(i)) << s.t, s.Y, s.X[0], s.X[1], s.X[2], s.X[3],
            s.X[4], s.X[5], s.X[6], s.PIy, s.PI1, s.PI2;
    }
    write_csv(path,
              {"t", "Y", "X0", "X1", "X2", "X3", "X4", "X5", "X6", "PIy",
               "PI1", "PI2"},
              values);
}

}  // namespace metapinn
