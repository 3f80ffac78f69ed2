#pragma once

#include "metapinn/common.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace metapinn {

// Whole-body physiological models for paracetamol and theophylline.
// Concentrations are mg/L except the solid pools of the oral model,
// which are mg. Time is hours, volumes L, flows L/h.

enum class Route { IV, Oral };
enum class MaskKind { None, Parameter, Term };

struct MaskSpec {
    MaskKind kind = MaskKind::None;
    int enzyme = -1;  // index into DrugParameters::enzymes
};

struct EnzymeKinetics {
    std::string name;
    double vmax;        // mg/min/(mg protein), scaled by protein content
    double km;          // mg/L in the assay matrix
    bool microsomal;    // scale by liver microsomal protein, else cytosolic
    double abundance;   // pmol/mg protein, 0 when the assay is lumped
    double isef;        // inter-system extrapolation factor
};

struct DrugParameters {
    std::string name;
    double mw;      // g/mol
    double fu_b;    // unbound fraction in blood
    double rb;      // blood to plasma ratio
    double fu_mic;  // unbound fraction in the microsomal assay
    double clr;     // renal clearance, L/h
    std::vector<std::pair<std::string, double>> kp;  // tissue partition
    std::vector<EnzymeKinetics> enzymes;
};

struct SystemParameters {
    std::vector<std::pair<std::string, double>> volumes;  // L
    std::vector<std::pair<std::string, double>> flows;    // L/h
    double mppgl;    // mg microsomal protein / g liver
    double cppgl;    // mg cytosolic protein / g liver
    double wliver;   // g
    double diss;     // dissolution rate parameter, 1/(mg/L)/h
    std::vector<std::pair<std::string, double>> sol;  // solubility, mg/L
    std::vector<std::pair<std::string, double>> ka;   // absorption, 1/h
    std::vector<std::pair<std::string, double>> kt;   // transit, 1/h
};

struct DoseSchedule {
    Route route = Route::IV;
    double dose_mg = 0;
    double infusion_h = 0;  // IV only; constant-rate input into venous blood
};

// One bilinear dissolution interaction: rate = diss * solid * (sol - dissolved).
struct DissolutionTerm {
    int solid;      // state index, mg
    int dissolved;  // state index, mg/L
    double dp;      // diss parameter
    double sol;     // segment solubility
    double vol;     // lumen fluid volume
};

struct PbpkModel {
    DrugParameters drug;
    SystemParameters sys;
    DoseSchedule dose;
    MaskSpec mask;

    std::vector<std::string> state_names;
    std::vector<double> mass_weight;  // state value * weight = mg
    int n_states = 0;
    int liver = -1, liver_met = -1, venous = -1, urine = -1;

    // Constant-coefficient couplings: lin[s] lists (column, coefficient)
    // pairs of du_s/dt, sorted by column, duplicates merged.
    std::vector<std::vector<std::pair<int, double>>> lin;
    std::vector<DissolutionTerm> dissolution;

    // Hepatic elimination bookkeeping.
    double beta = 0;                   // fu_b*Rb/(Kp_liver*V_liver)
    double kp_liver = 0, v_liver = 0;  // for term-level quantities
    std::vector<double> enz_veff;      // vmax*isef*abundance*protein*wliver

    double volume(const std::string& name) const;
    double flow(const std::string& name) const;
    double kp(const std::string& name) const;
    int state(const std::string& name) const;
};

PbpkModel build_model(const std::string& drug, Route route,
                      const DoseSchedule& dose, const MaskSpec& mask = {});

// Intrinsic clearance of one enzyme at liver concentration c (mg/L),
// in L/h. The Michaelis-Menten denominator works in uM: c/MW converts
// mg/L to mmol/L and the factor 1000 rescales to umol/L.
double intrinsic_clearance(const PbpkModel& m, int enzyme, double c);

// Saturable hepatic term g = CL(c)*c*fu_b*Rb/(Kp_L*V_L) for one enzyme
// with explicit (vmax, km); used for term-style references and oracles.
double hepatic_term_rate(const PbpkModel& m, double c, double vmax, double km);

// Overrides applied when evaluating the right-hand side or the lagged
// linear form. A parameter mask takes (vmax, km) from `vk` when present;
// a term mask replaces the hidden enzyme's rate with `g` (mg/L/h on the
// liver concentration equation) when present, else omits it.
struct RhsOverride {
    std::optional<std::array<double, 2>> vk;
    std::optional<double> g;
};

VectorXd rhs(const PbpkModel& m, double t, const VectorXd& u,
             const RhsOverride& ov = {});

// Sum over visible enzymes of CL_i(c)*beta, the lagged metabolic
// coefficient on the liver column; vk overrides the masked enzyme.
double metab_coef(const PbpkModel& m, double c,
                  const std::optional<std::array<double, 2>>& vk);

// d(metab_coef)/d ln vmax and d ln km for the masked enzyme at frozen c.
void metab_coef_dlog(const PbpkModel& m, double c, double vmax, double km,
                     double& d_lnv, double& d_lnk);

// Linearized system at one time: du/dt = L u + s with the nonlinear
// factors frozen at `frozen`. Returned as dense (S x S, S).
std::pair<MatrixXd, VectorXd> lagged_linear_form(const PbpkModel& m, double t,
                                                 const VectorXd& frozen,
                                                 const RhsOverride& ov = {});

// Same linearization tabulated over a time grid, stored sparsely.
// rows[s] holds (column, coefficient-per-time) pairs; src is n x S.
struct LaggedTable {
    struct Entry {
        int col;
        VectorXd coef;  // length n
    };
    std::vector<std::vector<Entry>> rows;
    MatrixXd src;
};

// `g_grid`, when present, carries per-time values of the replacement
// term (term mask); `frozen` is the trajectory matrix n x S.
LaggedTable lagged_table(const PbpkModel& m, const VectorXd& times,
                         const MatrixXd& frozen,
                         const std::optional<std::array<double, 2>>& vk = {},
                         const VectorXd* g_grid = nullptr);

// Total drug mass in mg, including metabolite and eliminated pools.
double total_mass(const PbpkModel& m, const VectorXd& u);

// Sum of inflow minus outflow coefficients of the blood-flow graph per
// compartment; ~0 for a closed circulation.
double flow_imbalance(const PbpkModel& m);

void write_constants_csv(const PbpkModel& m, const std::string& path);

}  // namespace metapinn
