#pragma once

#include "metapinn/common.hpp"
#include "metapinn/model.hpp"
#include "metapinn/representation.hpp"

#include <string>
#include <vector>

namespace metapinn {

// One dimensionless sample of the recovered hepatic term: the seven
// dimensional groups and the three Pi ratios built from them.
struct PiSample {
    double t = 0, Y = 0;
    double X[7] = {0, 0, 0, 0, 0, 0, 0};
    double PIy = 0, PI1 = 0, PI2 = 0;
};

struct PiSet {
    std::vector<PiSample> samples;
    int n_dropped = 0;  // rows with nonpositive liver level or tiny Y
};

// Trained aux-net term values on the interior grid times.
VectorXd extract_term_trajectory(const AuxNet& aux, const VectorXd& times);

// X0 = vmax*C_L, X1 = MW, X2 = fu_b*C_L, X3 = km*fu_mic,
// X4 = MPPGL*W_L, X5 = fu_b*Rb/Kp_L, X6 = 1/V_L with the masked
// enzyme's table values; PIy = Y/(X0*X5) * X3/(X4*X6),
// PI1 = X1*X3/(X4*X6), PI2 = X2/(X4*X6). Rows where the liver level is
// nonpositive or Y falls below y_floor_rel of its maximum are dropped.
PiSet compute_pi_groups(const PbpkModel& m, const VectorXd& times,
                        const VectorXd& cliv, const VectorXd& Y,
                        double y_floor_rel = 0.01);

struct PowerLawFit {
    double c = 1, a = 0, b = 0;
    double r2 = 0;
    bool degenerate = false;  // output variance too small for R^2
    int n_used = 0;
};

// Least squares on log PIy = log c + a log PI1 + b log PI2. Samples
// with a nonpositive Pi value are rejected; regressors with variance
// below 1e-20 in log space keep a zero exponent.
PowerLawFit power_law_regress(const std::vector<PiSample>& samples);

// Closed-form text of the fitted relation, expanded back through the
// group definitions.
std::string recovered_form(const PowerLawFit& fit);

void write_pi_csv(const PiSet& set, const std::string& path);

}  // namespace metapinn
