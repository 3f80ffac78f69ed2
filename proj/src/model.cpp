#include "metapinn/model.hpp"

#include "metapinn/csvio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace metapinn {

namespace {

using SP = std::pair<std::string, double>;

DrugParameters paracetamol_drug() {
    DrugParameters d;
    d.name = "paracetamol";
    d.mw = 151.7;
    d.fu_b = 0.820;
    d.rb = 1.580;
    d.fu_mic = 0.922;
    d.clr = 1.379;
    d.kp = {{"Adipose", 0.375},    {"Bone", 0.898},  {"Brain", 1.334},
            {"Gut", 1.238},        {"Heart", 1.110}, {"Kidney", 1.114},
            {"Liver", 1.151},      {"Lung", 1.081},  {"Muscle", 1.022},
            {"Pancreas", 1.199},   {"RestOfBody", 1.022},
            {"Skin", 1.069},       {"Spleen", 1.148}};
    // Lumped recombinant assays: no abundance scaling, ISEF 1.
    d.enzymes = {
        {"UGT1A1", 0.323, 5500.0, true, 1.0, 1.0},
        {"UGT1A9", 0.540, 9200.0, true, 1.0, 1.0},
        {"UGT2B15", 1.801, 23000.0, true, 1.0, 1.0},
        {"SULT1A1", 0.0769, 2400.0, false, 1.0, 1.0},
        {"SULT1A3", 0.0115, 1500.0, false, 1.0, 1.0},
        {"SULT1E1", 0.00830, 1900.0, false, 1.0, 1.0},
        {"SULT2A1", 0.0404, 3700.0, false, 1.0, 1.0},
        {"CYP1A2", 0.00168, 220.0, true, 1.0, 1.0},
        {"CYP2C9", 0.000479, 660.0, true, 1.0, 1.0},
        {"CYP2C19", 0.00145, 2000.0, true, 1.0, 1.0},
        {"CYP2D6", 0.000319, 440.0, true, 1.0, 1.0},
        {"CYP2E1", 0.00437, 4020.0, true, 1.0, 1.0},
        {"CYP3A4", 0.00302, 130.0, true, 1.0, 1.0},
    };
    return d;
}

SystemParameters paracetamol_system() {
    SystemParameters s;
    s.volumes = {{"Arterial", 0.966},
                 {"Venous", 3.100},
                 {"Brain", 1.337},
                 {"Lung", 1.096},
                 {"Heart", 0.782},
                 {"Spleen", 0.136},
                 {"Pancreas", 0.134},
                 {"Adipose", 18.970},
                 {"Skin", 2.877},
                 {"Muscle", 26.739},
                 {"Bone", 7.745},
                 {"RestOfBody", 0.324},
                 {"Kidney", 0.283},
                 {"PortalVein", 1.000},
                 {"Stomach", 0.138},
                 {"DuodenumWall", 0.051},
                 {"JejunumWall", 0.258},
                 {"IleumWall", 0.285},
                 {"LargeIntestineWall", 0.341},
                 {"Liver", 1.598},
                 {"Urine", 1.000},
                 {"StomachFluid", 0.045},
                 {"DuodenumLumen", 0.009},
                 {"JejunumLumen", 0.046},
                 {"IleumLumen", 0.050},
                 {"LargeIntestineLumen", 0.013},
                 {"Feces", 1.000}};
    s.flows = {{"Brain", 46.800},        {"Lung", 390.000},
               {"Heart", 15.600},        {"Stomach", 3.900},
               {"Spleen", 11.700},       {"Pancreas", 3.900},
               {"Liver", 99.450},        {"Adipose", 19.500},
               {"Skin", 19.500},         {"Muscle", 66.300},
               {"Bone", 19.500},         {"RestOfBody", 29.250},
               {"Kidney", 74.100},       {"PortalVein", 74.100},
               {"HepaticArtery", 25.350},{"Duodenum", 3.370},
               {"Jejunum", 16.910},      {"Ileum", 18.720},
               {"LargeIntestine", 15.600}};
    s.mppgl = 40.161;
    s.cppgl = 80.000;
    s.wliver = 1726.027;
    s.diss = 0.076;
    s.sol = {{"Stomach", 13650.000},
             {"Duodenum", 13661.889},
             {"Jejunum", 13668.842},
             {"Ileum", 13709.584},
             {"LargeIntestine", 13664.967}};
    s.ka = {{"Stomach", 4.320},
            {"Duodenum", 3.646},
            {"Jejunum", 4.937},
            {"Ileum", 5.760},
            {"LargeIntestine", 3.570}};
    s.kt = {{"Stomach", 0.857},
            {"Duodenum", 3.125},
            {"Jejunum", 0.676},
            {"Ileum", 0.455},
            {"LargeIntestine", 0.028}};
    return s;
}

DrugParameters theophylline_drug() {
    DrugParameters d;
    d.name = "theophylline";
    d.mw = 180.2;
    d.fu_b = 0.500;
    d.rb = 0.815;
    d.fu_mic = 0.931;
    d.clr = 0.310;
    d.kp = {{"Adipose", 0.117},  {"Bone", 0.303},  {"Brain", 0.458},
            {"Gut", 0.482},      {"Heart", 0.474}, {"Kidney", 0.454},
            {"Liver", 0.431},    {"Lung", 0.497},  {"Muscle", 0.393},
            {"Pancreas", 0.437}, {"RestOfBody", 0.393},
            {"Skin", 0.489},     {"Spleen", 0.453}};
    d.enzymes = {
        {"CYP1A2_1MX", 3.60e-4, 380.0, true, 36.4, 1.0},
        {"CYP1A2_3MX", 1.48e-4, 1090.0, true, 36.4, 1.0},
        {"CYP1A2_DMU", 4.39e-4, 230.0, true, 36.4, 0.5},
        {"CYP2E1_DMU", 4.12e-3, 15300.0, true, 61.0, 0.5},
    };
    return d;
}

SystemParameters theophylline_system() {
    SystemParameters s;
    s.volumes = {{"Arterial", 1.051},          {"Venous", 3.374},
                 {"Brain", 1.323},             {"Lung", 0.651},
                 {"Heart", 0.355},             {"Spleen", 0.149},
                 {"Pancreas", 0.139},          {"Adipose", 15.148},
                 {"Skin", 3.759},              {"Muscle", 32.321},
                 {"Bone", 4.269},              {"RestOfBody", 6.836},
                 {"Kidney", 0.323},            {"PortalVein", 1.000},
                 {"Stomach", 0.152},           {"DuodenumWall", 0.057},
                 {"JejunumWall", 0.284},       {"IleumWall", 0.314},
                 {"LargeIntestineWall", 0.375},{"Liver", 1.591},
                 {"Urine", 1.000}};
    s.flows = {{"Brain", 46.361},        {"Lung", 386.343},
               {"Heart", 15.454},        {"Stomach", 3.863},
               {"Spleen", 11.590},       {"Pancreas", 3.863},
               {"Liver", 98.517},        {"Adipose", 19.317},
               {"Skin", 19.317},         {"Muscle", 65.678},
               {"Bone", 19.317},         {"RestOfBody", 28.976},
               {"Kidney", 73.405},       {"PortalVein", 73.405},
               {"HepaticArtery", 25.112},{"Duodenum", 3.323},
               {"Jejunum", 16.767},      {"Ileum", 18.544},
               {"LargeIntestine", 15.454}};
    s.mppgl = 39.791;
    s.cppgl = 0.0;  // no cytosolic pathway in the panel
    s.wliver = 1718.567;
    s.diss = 0.0;
    return s;
}

const char* IV_STATES[] = {
    "Arterial",     "Venous",           "Brain",
    "Lung",         "Heart",            "Spleen",
    "Pancreas",     "Adipose",          "Skin",
    "Muscle",       "Bone",             "RestOfBody",
    "Kidney",       "PortalVein",       "Stomach",
    "DuodenumWall", "JejunumWall",      "IleumWall",
    "LargeIntestineWall", "Liver",      "LiverMet",
    "Urine"};

const char* ORAL_STATES[] = {
    "Arterial",      "Venous",
    "Brain",         "Lung",
    "Heart",         "DuodenumLumenDissolved",
    "DuodenumLumenSolid", "Spleen",
    "Pancreas",      "Adipose",
    "Skin",          "Muscle",
    "Bone",          "RestOfBody",
    "Kidney",        "PortalVein",
    "JejunumLumenDissolved", "JejunumLumenSolid",
    "IleumLumenDissolved",   "IleumLumenSolid",
    "LargeIntestineLumenDissolved", "LargeIntestineLumenSolid",
    "Stomach",       "StomachFluidDissolved",
    "StomachFluidSolid", "DuodenumWall",
    "JejunumWall",   "IleumWall",
    "LargeIntestineWall", "Feces",
    "Liver",         "LiverMet",
    "Urine"};

double lookup(const std::vector<SP>& table, const std::string& name,
              const char* what) {
    for (const auto& [k, v] : table)
        if (k == name) return v;
    throw ValidationError(std::string("missing ") + what + ": " + name);
}

struct Builder {
    PbpkModel m;
    std::map<std::string, int> index;
    std::map<int, std::map<int, double>> tri;

    int idx(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end())
            throw ValidationError("unknown state: " + name);
        return it->second;
    }
    double V(const std::string& n) const {
        return lookup(m.sys.volumes, n, "volume");
    }
    double Q(const std::string& n) const {
        return lookup(m.sys.flows, n, "flow");
    }
    double Kp(const std::string& n) const {
        return lookup(m.drug.kp, n, "Kp");
    }
    void add(const std::string& row, const std::string& col, double coef) {
        tri[idx(row)][idx(col)] += coef;
    }
};

}  // namespace

double PbpkModel::volume(const std::string& n) const {
    return lookup(sys.volumes, n, "volume");
}
double PbpkModel::flow(const std::string& n) const {
    return lookup(sys.flows, n, "flow");
}
double PbpkModel::kp(const std::string& n) const {
    return lookup(drug.kp, n, "Kp");
}
int PbpkModel::state(const std::string& n) const {
    for (int i = 0; i < n_states; ++i)
        if (state_names[i] == n) return i;
    return -1;
}

PbpkModel build_model(const std::string& drug, Route route,
                      const DoseSchedule& dose, const MaskSpec& mask) {
    Builder b;
    if (drug == "paracetamol") {
        b.m.drug = paracetamol_drug();
        b.m.sys = paracetamol_system();
    } else if (drug == "theophylline") {
        b.m.drug = theophylline_drug();
        b.m.sys = theophylline_system();
    } else {
        throw ValidationError("unknown drug: " + drug);
    }
    if (route == Route::Oral && drug != "paracetamol")
        throw ValidationError("oral route is parameterized for paracetamol only");
    if (dose.route != route)
        throw ValidationError("dose schedule route does not match model route");
    if (dose.dose_mg < 0 || dose.infusion_h < 0)
        throw ValidationError("dose and infusion duration must be nonnegative");
    if (route == Route::IV && dose.dose_mg > 0 && dose.infusion_h <= 0)
        throw ValidationError("IV dosing requires a positive infusion duration");

    for (const auto& [k, v] : b.m.sys.volumes)
        if (v <= 0) throw ValidationError("nonpositive volume: " + k);
    for (const auto& [k, v] : b.m.sys.flows)
        if (v <= 0) throw ValidationError("nonpositive flow: " + k);
    for (const auto& [k, v] : b.m.drug.kp)
        if (v <= 0) throw ValidationError("nonpositive Kp: " + k);

    b.m.dose = dose;
    b.m.mask = mask;
    if (mask.kind != MaskKind::None &&
        (mask.enzyme < 0 || mask.enzyme >= int(b.m.drug.enzymes.size())))
        throw ValidationError("mask enzyme index out of range");

    const char** names = route == Route::IV ? IV_STATES : ORAL_STATES;
    int S = route == Route::IV ? 22 : 33;
    b.m.n_states = S;
    for (int i = 0; i < S; ++i) {
        b.m.state_names.push_back(names[i]);
        b.index[names[i]] = i;
    }
    b.m.liver = b.idx("Liver");
    b.m.liver_met = b.idx("LiverMet");
    b.m.venous = b.idx("Venous");
    b.m.urine = b.idx("Urine");

    const double Rb = b.m.drug.rb;
    const double clr = b.m.drug.clr;
    const double kp_gut = b.Kp("Gut");

    // Systemic circulation, identical structure for both routes.
    const char* arterial_out[] = {"Brain",      "Heart",    "Stomach",
                                  "Spleen",     "Pancreas", "HepaticArtery",
                                  "Adipose",    "Skin",     "Muscle",
                                  "Bone",       "RestOfBody", "Kidney",
                                  "Duodenum",   "Jejunum",  "Ileum",
                                  "LargeIntestine"};
    double outsum = 0;
    for (const char* o : arterial_out) outsum += b.Q(o);
    b.add("Arterial", "Lung", b.Q("Lung") * Rb / b.Kp("Lung") / b.V("Arterial"));
    b.add("Arterial", "Arterial", -outsum / b.V("Arterial"));

    const char* venous_in[] = {"Brain", "Heart",  "Liver", "Adipose",
                               "Skin",  "Muscle", "Bone",  "RestOfBody",
                               "Kidney"};
    for (const char* o : venous_in)
        b.add("Venous", o, b.Q(o) * Rb / b.Kp(o) / b.V("Venous"));
    b.add("Venous", "Venous", -b.Q("Lung") / b.V("Venous"));

    b.add("Lung", "Venous", b.Q("Lung") / b.V("Lung"));
    b.add("Lung", "Lung", -b.Q("Lung") * Rb / b.Kp("Lung") / b.V("Lung"));

    const char* perfused[] = {"Brain", "Heart",      "Adipose",
                              "Skin",  "Muscle",     "Bone",
                              "RestOfBody", "Spleen", "Pancreas"};
    for (const char* o : perfused) {
        b.add(o, "Arterial", b.Q(o) / b.V(o));
        b.add(o, o, -b.Q(o) * Rb / b.Kp(o) / b.V(o));
    }

    b.add("Kidney", "Arterial", b.Q("Kidney") / b.V("Kidney"));
    b.add("Kidney", "Kidney",
          -(b.Q("Kidney") * Rb / b.Kp("Kidney") + clr) / b.V("Kidney"));
    b.add("Urine", "Kidney", clr / b.V("Urine"));

    b.add("Stomach", "Arterial", b.Q("Stomach") / b.V("Stomach"));
    b.add("Stomach", "Stomach",
          -b.Q("Stomach") * Rb / kp_gut / b.V("Stomach"));
    const std::pair<const char*, const char*> walls[] = {
        {"DuodenumWall", "Duodenum"},
        {"JejunumWall", "Jejunum"},
        {"IleumWall", "Ileum"},
        {"LargeIntestineWall", "LargeIntestine"}};
    for (const auto& [wall, seg] : walls) {
        b.add(wall, "Arterial", b.Q(seg) / b.V(wall));
        b.add(wall, wall, -b.Q(seg) * Rb / kp_gut / b.V(wall));
    }

    b.add("PortalVein", "Stomach",
          b.Q("Stomach") * Rb / kp_gut / b.V("PortalVein"));
    b.add("PortalVein", "Spleen",
          b.Q("Spleen") * Rb / b.Kp("Spleen") / b.V("PortalVein"));
    b.add("PortalVein", "Pancreas",
          b.Q("Pancreas") * Rb / b.Kp("Pancreas") / b.V("PortalVein"));
    for (const auto& [wall, seg] : walls)
        b.add("PortalVein", wall, b.Q(seg) * Rb / kp_gut / b.V("PortalVein"));
    b.add("PortalVein", "PortalVein",
          -b.Q("PortalVein") / b.V("PortalVein"));

    b.add("Liver", "PortalVein", b.Q("PortalVein") / b.V("Liver"));
    b.add("Liver", "Arterial", b.Q("HepaticArtery") / b.V("Liver"));
    b.add("Liver", "Liver", -b.Q("Liver") * Rb / b.Kp("Liver") / b.V("Liver"));

    if (route == Route::Oral) {
        // Lumen chain: stomach fluid then four intestinal segments.
        struct Seg {
            const char* par;   // parameter table name
            const char* dis;   // dissolved state
            const char* sol;   // solid state
            const char* vol;   // lumen fluid volume
            const char* wall;  // absorbing wall state
        };
        const Seg segs[] = {
            {"Stomach", "StomachFluidDissolved", "StomachFluidSolid",
             "StomachFluid", "Stomach"},
            {"Duodenum", "DuodenumLumenDissolved", "DuodenumLumenSolid",
             "DuodenumLumen", "DuodenumWall"},
            {"Jejunum", "JejunumLumenDissolved", "JejunumLumenSolid",
             "JejunumLumen", "JejunumWall"},
            {"Ileum", "IleumLumenDissolved", "IleumLumenSolid", "IleumLumen",
             "IleumWall"},
            {"LargeIntestine", "LargeIntestineLumenDissolved",
             "LargeIntestineLumenSolid", "LargeIntestineLumen",
             "LargeIntestineWall"}};
        const int nseg = 5;
        for (int i = 0; i < nseg; ++i) {
            const Seg& s = segs[i];
            double kt = lookup(b.m.sys.kt, s.par, "kt");
            double ka = lookup(b.m.sys.ka, s.par, "ka");
            double vol = b.V(s.vol);
            b.add(s.sol, s.sol, -kt);
            b.add(s.dis, s.dis, -(kt + ka));
            b.add(s.wall, s.dis, ka * vol / b.V(s.wall));
            if (i + 1 < nseg) {
                const Seg& nx = segs[i + 1];
                b.add(nx.sol, s.sol, kt);
                b.add(nx.dis, s.dis, kt * vol / b.V(nx.vol));
            } else {
                b.add("Feces", s.sol, kt / b.V("Feces"));
                b.add("Feces", s.dis, kt * vol / b.V("Feces"));
            }
            DissolutionTerm dt;
            dt.solid = b.idx(s.sol);
            dt.dissolved = b.idx(s.dis);
            dt.dp = b.m.sys.diss;
            dt.sol = lookup(b.m.sys.sol, s.par, "solubility");
            dt.vol = vol;
            b.m.dissolution.push_back(dt);
        }
    }

    b.m.lin.resize(S);
    for (const auto& [row, cols] : b.tri)
        for (const auto& [col, coef] : cols)
            b.m.lin[row].push_back({col, coef});

    b.m.kp_liver = b.Kp("Liver");
    b.m.v_liver = b.V("Liver");
    b.m.beta = b.m.drug.fu_b * Rb / (b.m.kp_liver * b.m.v_liver);
    for (const auto& e : b.m.drug.enzymes) {
        double protein = e.microsomal ? b.m.sys.mppgl : b.m.sys.cppgl;
        if (protein <= 0)
            throw ValidationError("enzyme " + e.name +
                                  " needs a positive protein content");
        b.m.enz_veff.push_back(e.vmax * e.isef * e.abundance * protein *
                               b.m.sys.wliver);
    }

    // Mass bookkeeping: solids are amounts; lumen dissolved states carry
    // the fluid volume; the metabolite pool shares the liver volume.
    b.m.mass_weight.resize(S);
    for (int i = 0; i < S; ++i) {
        std::string n = b.m.state_names[i];
        if (n.ends_with("Solid")) {
            b.m.mass_weight[i] = 1.0;
        } else if (n == "StomachFluidDissolved") {
            b.m.mass_weight[i] = b.V("StomachFluid");
        } else if (n.ends_with("LumenDissolved")) {
            b.m.mass_weight[i] = b.V(n.substr(0, n.size() - 9));
        } else if (n == "LiverMet") {
            b.m.mass_weight[i] = b.V("Liver");
        } else {
            b.m.mass_weight[i] = b.V(n);
        }
    }
    return b.m;
}

static double mm_denominator(const PbpkModel& m, double km, double c) {
    // c/MW converts mg/L to mM; the factor 1000 rescales to uM to match
    // the assay Km. Negative transients are clamped so the denominator
    // stays strictly positive.
    return km * m.drug.fu_mic +
           (std::max(c, 0.0) / m.drug.mw) * 1000.0 * m.drug.fu_b;
}

double intrinsic_clearance(const PbpkModel& m, int enzyme, double c) {
    if (enzyme < 0 || enzyme >= int(m.drug.enzymes.size()))
        throw ValidationError("enzyme index out of range");
    const auto& e = m.drug.enzymes[enzyme];
    return m.enz_veff[enzyme] / mm_denominator(m, e.km, c);
}

double hepatic_term_rate(const PbpkModel& m, double c, double vmax,
                         double km) {
    if (m.mask.enzyme < 0)
        throw ValidationError("hepatic_term_rate needs a masked enzyme");
    const auto& e = m.drug.enzymes[m.mask.enzyme];
    double scale = m.enz_veff[m.mask.enzyme] / e.vmax;
    double cl = vmax * scale / mm_denominator(m, km, c);
    return cl * c * m.beta;
}

double metab_coef(const PbpkModel& m, double c,
                  const std::optional<std::array<double, 2>>& vk) {
    double s = 0;
    for (int i = 0; i < int(m.drug.enzymes.size()); ++i) {
        if (m.mask.kind == MaskKind::Term && i == m.mask.enzyme) continue;
        const auto& e = m.drug.enzymes[i];
        double veff = m.enz_veff[i];
        double km = e.km;
        if (m.mask.kind == MaskKind::Parameter && i == m.mask.enzyme && vk) {
            veff = (*vk)[0] * (m.enz_veff[i] / e.vmax);
            km = (*vk)[1];
        }
        s += veff / mm_denominator(m, km, c);
    }
    return s * m.beta;
}

void metab_coef_dlog(const PbpkModel& m, double c, double vmax, double km,
                     double& d_lnv, double& d_lnk) {
    if (m.mask.kind != MaskKind::Parameter || m.mask.enzyme < 0)
        throw ValidationError("metab_coef_dlog needs a parameter mask");
    const auto& e = m.drug.enzymes[m.mask.enzyme];
    double scale = m.enz_veff[m.mask.enzyme] / e.vmax;
    double den = mm_denominator(m, km, c);
    double cl = vmax * scale / den * m.beta;
    d_lnv = cl;                                // d/d ln vmax
    d_lnk = -cl * (km * m.drug.fu_mic) / den;  // d/d ln km
}

static double term_g(const PbpkModel& m, double c, const RhsOverride& ov) {
    if (ov.g) return *ov.g;
    const auto& e = m.drug.enzymes[m.mask.enzyme];
    return hepatic_term_rate(m, c, e.vmax, e.km);
}

VectorXd rhs(const PbpkModel& m, double t, const VectorXd& u,
             const RhsOverride& ov) {
    if (u.size() != m.n_states)
        throw ValidationError("rhs: state size mismatch");
    if (!u.allFinite()) throw NumericError("rhs: non-finite state");
    VectorXd dx = VectorXd::Zero(m.n_states);
    for (int s = 0; s < m.n_states; ++s)
        for (const auto& [col, coef] : m.lin[s]) dx[s] += coef * u[col];
    for (const auto& d : m.dissolution) {
        double rate = d.dp * u[d.solid] * (d.sol - u[d.dissolved]);
        dx[d.solid] -= rate;
        dx[d.dissolved] += rate / d.vol;
    }
    double cliv = u[m.liver];
    double mc = metab_coef(m, cliv, ov.vk);
    dx[m.liver] -= mc * cliv;
    dx[m.liver_met] += mc * cliv;
    if (m.mask.kind == MaskKind::Term) {
        double g = term_g(m, cliv, ov);
        dx[m.liver] -= g;
        dx[m.liver_met] += g;
    }
    if (m.dose.route == Route::IV && m.dose.dose_mg > 0 &&
        t < m.dose.infusion_h)
        dx[m.venous] +=
            m.dose.dose_mg / m.dose.infusion_h / m.volume("Venous");
    return dx;
}

std::pair<MatrixXd, VectorXd> lagged_linear_form(const PbpkModel& m, double t,
                                                 const VectorXd& frozen,
                                                 const RhsOverride& ov) {
    if (frozen.size() != m.n_states)
        throw ValidationError("lagged_linear_form: state size mismatch");
    if (!frozen.allFinite())
        throw NumericError("lagged_linear_form: non-finite frozen state");
    MatrixXd L = MatrixXd::Zero(m.n_states, m.n_states);
    VectorXd s = VectorXd::Zero(m.n_states);
    for (int r = 0; r < m.n_states; ++r)
        for (const auto& [col, coef] : m.lin[r]) L(r, col) += coef;
    for (const auto& d : m.dissolution) {
        double k = d.dp * (d.sol - frozen[d.dissolved]);
        L(d.solid, d.solid) -= k;
        L(d.dissolved, d.solid) += k / d.vol;
    }
    double mc = metab_coef(m, frozen[m.liver], ov.vk);
    L(m.liver, m.liver) -= mc;
    L(m.liver_met, m.liver) += mc;
    if (m.mask.kind == MaskKind::Term) {
        double g = term_g(m, frozen[m.liver], ov);
        s[m.liver] -= g;
        s[m.liver_met] += g;
    }
    if (m.dose.route == Route::IV && m.dose.dose_mg > 0 &&
        t < m.dose.infusion_h)
        s[m.venous] += m.dose.dose_mg / m.dose.infusion_h / m.volume("Venous");
    return {L, s};
}

LaggedTable lagged_table(const PbpkModel& m, const VectorXd& times,
                         const MatrixXd& frozen,
                         const std::optional<std::array<double, 2>>& vk,
                         const VectorXd* g_grid) {
    const int n = int(times.size());
    if (frozen.rows() != n || frozen.cols() != m.n_states)
        throw ValidationError("lagged_table: frozen trajectory shape mismatch");
    if (g_grid && g_grid->size() != n)
        throw ValidationError("lagged_table: g grid length mismatch");
    std::vector<std::map<int, VectorXd>> rows(m.n_states);
    auto at = [&](int r, int c) -> VectorXd& {
        auto it = rows[r].find(c);
        if (it == rows[r].end())
            it = rows[r].emplace(c, VectorXd::Zero(n)).first;
        return it->second;
    };
    for (int r = 0; r < m.n_states; ++r)
        for (const auto& [col, coef] : m.lin[r])
            at(r, col).array() += coef;
    for (const auto& d : m.dissolution) {
        VectorXd k =
            (d.dp * (d.sol - frozen.col(d.dissolved).array())).matrix();
        at(d.solid, d.solid) -= k;
        at(d.dissolved, d.solid) += k / d.vol;
    }
    VectorXd mc(n);
    for (int i = 0; i < n; ++i) mc[i] = metab_coef(m, frozen(i, m.liver), vk);
    at(m.liver, m.liver) -= mc;
    at(m.liver_met, m.liver) += mc;

    LaggedTable tab;
    tab.rows.resize(m.n_states);
    for (int r = 0; r < m.n_states; ++r)
        for (auto& [col, coef] : rows[r])
            tab.rows[r].push_back({col, std::move(coef)});
    tab.src = MatrixXd::Zero(n, m.n_states);
    if (m.mask.kind == MaskKind::Term) {
        for (int i = 0; i < n; ++i) {
            double g;
            if (g_grid) {
                g = (*g_grid)[i];
            } else {
                const auto& e = m.drug.enzymes[m.mask.enzyme];
                g = hepatic_term_rate(m, frozen(i, m.liver), e.vmax, e.km);
            }
            tab.src(i, m.liver) -= g;
            tab.src(i, m.liver_met) += g;
        }
    }
    if (m.dose.route == Route::IV && m.dose.dose_mg > 0) {
        double rate = m.dose.dose_mg / m.dose.infusion_h / m.volume("Venous");
        for (int i = 0; i < n; ++i)
            if (times[i] < m.dose.infusion_h) tab.src(i, m.venous) += rate;
    }
    return tab;
}

double total_mass(const PbpkModel& m, const VectorXd& u) {
    double s = 0;
    for (int i = 0; i < m.n_states; ++i) s += u[i] * m.mass_weight[i];
    return s;
}

double flow_imbalance(const PbpkModel& m) {
    const char* arterial_out[] = {"Brain",      "Heart",    "Stomach",
                                  "Spleen",     "Pancreas", "HepaticArtery",
                                  "Adipose",    "Skin",     "Muscle",
                                  "Bone",       "RestOfBody", "Kidney",
                                  "Duodenum",   "Jejunum",  "Ileum",
                                  "LargeIntestine"};
    double outsum = 0;
    for (const char* o : arterial_out) outsum += m.flow(o);
    return std::abs(m.flow("Lung") - outsum) / m.flow("Lung");
}

void write_constants_csv(const PbpkModel& m, const std::string& path) {
    std::ostringstream out;
    out << "name,value\n";
    auto put = [&](const std::string& k, double v) {
        out << k << ',' << format_double(v) << '\n';
    };
    put("mw", m.drug.mw);
    put("fu_b", m.drug.fu_b);
    put("rb", m.drug.rb);
    put("fu_mic", m.drug.fu_mic);
    put("clr", m.drug.clr);
    put("mppgl", m.sys.mppgl);
    put("cppgl", m.sys.cppgl);
    put("wliver", m.sys.wliver);
    for (const auto& [k, v] : m.drug.kp) put("kp." + k, v);
    for (const auto& e : m.drug.enzymes) {
        put("enzyme." + e.name + ".vmax", e.vmax);
        put("enzyme." + e.name + ".km", e.km);
        put("enzyme." + e.name + ".microsomal", e.microsomal ? 1 : 0);
        put("enzyme." + e.name + ".abundance", e.abundance);
        put("enzyme." + e.name + ".isef", e.isef);
    }
    for (const auto& [k, v] : m.sys.volumes) put("volume." + k, v);
    for (const auto& [k, v] : m.sys.flows) put("flow." + k, v);
    for (const auto& [k, v] : m.sys.sol) put("solubility." + k, v);
    for (const auto& [k, v] : m.sys.ka) put("ka." + k, v);
    for (const auto& [k, v] : m.sys.kt) put("kt." + k, v);
    if (!m.dissolution.empty()) put("dissolution_parameter", m.sys.diss);
    write_text(path, out.str());
}

}  // namespace metapinn
