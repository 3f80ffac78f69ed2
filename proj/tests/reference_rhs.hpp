#pragma once

// Hand-written right-hand sides, one explicit equation per compartment
// with literal constants. No loops over organ lists and no shared
// tables: the point is an independent wiring so that an index mixup or
// a sign slip in the production model cannot cancel here too.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace refrhs {

using Eigen::VectorXd;

// ---------------------------------------------------------------- theophylline, IV

// States: 0 Arterial, 1 Venous, 2 Brain, 3 Lung, 4 Heart, 5 Spleen,
// 6 Pancreas, 7 Adipose, 8 Skin, 9 Muscle, 10 Bone, 11 RestOfBody,
// 12 Kidney, 13 PortalVein, 14 Stomach, 15 DuodenumWall, 16 JejunumWall,
// 17 IleumWall, 18 LargeIntestineWall, 19 Liver, 20 LiverMet, 21 Urine.

inline double theo_clint(double c) {
    const double cu = std::max(c, 0.0) / 180.2 * 1000.0 * 0.500;
    const double w = 39.791 * 1718.567;
    double s = 0;
    s += 3.60e-4 * 1.0 * 36.4 * w / (380.0 * 0.931 + cu);
    s += 1.48e-4 * 1.0 * 36.4 * w / (1090.0 * 0.931 + cu);
    s += 4.39e-4 * 0.5 * 36.4 * w / (230.0 * 0.931 + cu);
    s += 4.12e-3 * 0.5 * 61.0 * w / (15300.0 * 0.931 + cu);
    return s;
}

inline VectorXd theophylline_iv(double t, const VectorXd& u, double dose_mg,
                                double infusion_h) {
    const double Rb = 0.815, fub = 0.500;
    VectorXd dx = VectorXd::Zero(22);

    const double art_out = 46.361 + 15.454 + 3.863 + 11.590 + 3.863 +
                           25.112 + 19.317 + 19.317 + 65.678 + 19.317 +
                           28.976 + 73.405 + 3.323 + 16.767 + 18.544 +
                           15.454;
    dx[0] = (386.343 * Rb / 0.497 * u[3] - art_out * u[0]) / 1.051;

    dx[1] = (46.361 * Rb / 0.458 * u[2] + 15.454 * Rb / 0.474 * u[4] +
             98.517 * Rb / 0.431 * u[19] + 19.317 * Rb / 0.117 * u[7] +
             19.317 * Rb / 0.489 * u[8] + 65.678 * Rb / 0.393 * u[9] +
             19.317 * Rb / 0.303 * u[10] + 28.976 * Rb / 0.393 * u[11] +
             73.405 * Rb / 0.454 * u[12] - 386.343 * u[1]) /
            3.374;
    if (dose_mg > 0 && t < infusion_h)
        dx[1] += dose_mg / infusion_h / 3.374;

    dx[2] = (46.361 * u[0] - 46.361 * Rb / 0.458 * u[2]) / 1.323;
    dx[3] = (386.343 * u[1] - 386.343 * Rb / 0.497 * u[3]) / 0.651;
    dx[4] = (15.454 * u[0] - 15.454 * Rb / 0.474 * u[4]) / 0.355;
    dx[5] = (11.590 * u[0] - 11.590 * Rb / 0.453 * u[5]) / 0.149;
    dx[6] = (3.863 * u[0] - 3.863 * Rb / 0.437 * u[6]) / 0.139;
    dx[7] = (19.317 * u[0] - 19.317 * Rb / 0.117 * u[7]) / 15.148;
    dx[8] = (19.317 * u[0] - 19.317 * Rb / 0.489 * u[8]) / 3.759;
    dx[9] = (65.678 * u[0] - 65.678 * Rb / 0.393 * u[9]) / 32.321;
    dx[10] = (19.317 * u[0] - 19.317 * Rb / 0.303 * u[10]) / 4.269;
    dx[11] = (28.976 * u[0] - 28.976 * Rb / 0.393 * u[11]) / 6.836;
    dx[12] = (73.405 * u[0] - (73.405 * Rb / 0.454 + 0.310) * u[12]) / 0.323;
    dx[21] = 0.310 * u[12] / 1.000;

    dx[14] = (3.863 * u[0] - 3.863 * Rb / 0.482 * u[14]) / 0.152;
    dx[15] = (3.323 * u[0] - 3.323 * Rb / 0.482 * u[15]) / 0.057;
    dx[16] = (16.767 * u[0] - 16.767 * Rb / 0.482 * u[16]) / 0.284;
    dx[17] = (18.544 * u[0] - 18.544 * Rb / 0.482 * u[17]) / 0.314;
    dx[18] = (15.454 * u[0] - 15.454 * Rb / 0.482 * u[18]) / 0.375;

    dx[13] = (3.863 * Rb / 0.482 * u[14] + 11.590 * Rb / 0.453 * u[5] +
              3.863 * Rb / 0.437 * u[6] + 3.323 * Rb / 0.482 * u[15] +
              16.767 * Rb / 0.482 * u[16] + 18.544 * Rb / 0.482 * u[17] +
              15.454 * Rb / 0.482 * u[18] - 73.405 * u[13]) /
             1.000;

    const double met = theo_clint(u[19]) * fub * Rb / (0.431 * 1.591) * u[19];
    dx[19] = (73.405 * u[13] + 25.112 * u[0] - 98.517 * Rb / 0.431 * u[19]) /
                 1.591 -
             met;
    dx[20] = met;
    return dx;
}

inline double theo_mass(const VectorXd& u) {
    const double v[22] = {1.051,  3.374, 1.323, 0.651, 0.355, 0.149,
                          0.139,  15.148, 3.759, 32.321, 4.269, 6.836,
                          0.323,  1.000, 0.152, 0.057, 0.284, 0.314,
                          0.375,  1.591, 1.591, 1.000};
    double s = 0;
    for (int i = 0; i < 22; ++i) s += u[i] * v[i];
    return s;
}

// ---------------------------------------------------------------- paracetamol

inline double para_clint(double c) {
    const double cu = std::max(c, 0.0) / 151.7 * 1000.0 * 0.820;
    const double wm = 40.161 * 1726.027;  // microsomal protein, mg
    const double wc = 80.000 * 1726.027;  // cytosolic protein, mg
    double s = 0;
    s += 0.323 * wm / (5500.0 * 0.922 + cu);
    s += 0.540 * wm / (9200.0 * 0.922 + cu);
    s += 1.801 * wm / (23000.0 * 0.922 + cu);
    s += 0.0769 * wc / (2400.0 * 0.922 + cu);
    s += 0.0115 * wc / (1500.0 * 0.922 + cu);
    s += 0.00830 * wc / (1900.0 * 0.922 + cu);
    s += 0.0404 * wc / (3700.0 * 0.922 + cu);
    s += 0.00168 * wm / (220.0 * 0.922 + cu);
    s += 0.000479 * wm / (660.0 * 0.922 + cu);
    s += 0.00145 * wm / (2000.0 * 0.922 + cu);
    s += 0.000319 * wm / (440.0 * 0.922 + cu);
    s += 0.00437 * wm / (4020.0 * 0.922 + cu);
    s += 0.00302 * wm / (130.0 * 0.922 + cu);
    return s;
}

// IV route; same state order as theophylline above.
inline VectorXd paracetamol_iv(double t, const VectorXd& u, double dose_mg,
                               double infusion_h) {
    const double Rb = 1.580, fub = 0.820;
    VectorXd dx = VectorXd::Zero(22);

    const double art_out = 46.800 + 15.600 + 3.900 + 11.700 + 3.900 +
                           25.350 + 19.500 + 19.500 + 66.300 + 19.500 +
                           29.250 + 74.100 + 3.370 + 16.910 + 18.720 +
                           15.600;
    dx[0] = (390.000 * Rb / 1.081 * u[3] - art_out * u[0]) / 0.966;

    dx[1] = (46.800 * Rb / 1.334 * u[2] + 15.600 * Rb / 1.110 * u[4] +
             99.450 * Rb / 1.151 * u[19] + 19.500 * Rb / 0.375 * u[7] +
             19.500 * Rb / 1.069 * u[8] + 66.300 * Rb / 1.022 * u[9] +
             19.500 * Rb / 0.898 * u[10] + 29.250 * Rb / 1.022 * u[11] +
             74.100 * Rb / 1.114 * u[12] - 390.000 * u[1]) /
            3.100;
    if (dose_mg > 0 && t < infusion_h)
        dx[1] += dose_mg / infusion_h / 3.100;

    dx[2] = (46.800 * u[0] - 46.800 * Rb / 1.334 * u[2]) / 1.337;
    dx[3] = (390.000 * u[1] - 390.000 * Rb / 1.081 * u[3]) / 1.096;
    dx[4] = (15.600 * u[0] - 15.600 * Rb / 1.110 * u[4]) / 0.782;
    dx[5] = (11.700 * u[0] - 11.700 * Rb / 1.148 * u[5]) / 0.136;
    dx[6] = (3.900 * u[0] - 3.900 * Rb / 1.199 * u[6]) / 0.134;
    dx[7] = (19.500 * u[0] - 19.500 * Rb / 0.375 * u[7]) / 18.970;
    dx[8] = (19.500 * u[0] - 19.500 * Rb / 1.069 * u[8]) / 2.877;
    dx[9] = (66.300 * u[0] - 66.300 * Rb / 1.022 * u[9]) / 26.739;
    dx[10] = (19.500 * u[0] - 19.500 * Rb / 0.898 * u[10]) / 7.745;
    dx[11] = (29.250 * u[0] - 29.250 * Rb / 1.022 * u[11]) / 0.324;
    dx[12] = (74.100 * u[0] - (74.100 * Rb / 1.114 + 1.379) * u[12]) / 0.283;
    dx[21] = 1.379 * u[12] / 1.000;

    dx[14] = (3.900 * u[0] - 3.900 * Rb / 1.238 * u[14]) / 0.138;
    dx[15] = (3.370 * u[0] - 3.370 * Rb / 1.238 * u[15]) / 0.051;
    dx[16] = (16.910 * u[0] - 16.910 * Rb / 1.238 * u[16]) / 0.258;
    dx[17] = (18.720 * u[0] - 18.720 * Rb / 1.238 * u[17]) / 0.285;
    dx[18] = (15.600 * u[0] - 15.600 * Rb / 1.238 * u[18]) / 0.341;

    dx[13] = (3.900 * Rb / 1.238 * u[14] + 11.700 * Rb / 1.148 * u[5] +
              3.900 * Rb / 1.199 * u[6] + 3.370 * Rb / 1.238 * u[15] +
              16.910 * Rb / 1.238 * u[16] + 18.720 * Rb / 1.238 * u[17] +
              15.600 * Rb / 1.238 * u[18] - 74.100 * u[13]) /
             1.000;

    const double met = para_clint(u[19]) * fub * Rb / (1.151 * 1.598) * u[19];
    dx[19] = (74.100 * u[13] + 25.350 * u[0] - 99.450 * Rb / 1.151 * u[19]) /
                 1.598 -
             met;
    dx[20] = met;
    return dx;
}

// Oral route. States: 0 Arterial, 1 Venous, 2 Brain, 3 Lung, 4 Heart,
// 5 DuodenumLumenDissolved, 6 DuodenumLumenSolid, 7 Spleen, 8 Pancreas,
// 9 Adipose, 10 Skin, 11 Muscle, 12 Bone, 13 RestOfBody, 14 Kidney,
// 15 PortalVein, 16 JejunumLumenDissolved, 17 JejunumLumenSolid,
// 18 IleumLumenDissolved, 19 IleumLumenSolid,
// 20 LargeIntestineLumenDissolved, 21 LargeIntestineLumenSolid,
// 22 Stomach, 23 StomachFluidDissolved, 24 StomachFluidSolid,
// 25 DuodenumWall, 26 JejunumWall, 27 IleumWall, 28 LargeIntestineWall,
// 29 Feces, 30 Liver, 31 LiverMet, 32 Urine.
inline VectorXd paracetamol_oral(double, const VectorXd& u) {
    const double Rb = 1.580, fub = 0.820;
    VectorXd dx = VectorXd::Zero(33);

    const double art_out = 46.800 + 15.600 + 3.900 + 11.700 + 3.900 +
                           25.350 + 19.500 + 19.500 + 66.300 + 19.500 +
                           29.250 + 74.100 + 3.370 + 16.910 + 18.720 +
                           15.600;
    dx[0] = (390.000 * Rb / 1.081 * u[3] - art_out * u[0]) / 0.966;

    dx[1] = (46.800 * Rb / 1.334 * u[2] + 15.600 * Rb / 1.110 * u[4] +
             99.450 * Rb / 1.151 * u[30] + 19.500 * Rb / 0.375 * u[9] +
             19.500 * Rb / 1.069 * u[10] + 66.300 * Rb / 1.022 * u[11] +
             19.500 * Rb / 0.898 * u[12] + 29.250 * Rb / 1.022 * u[13] +
             74.100 * Rb / 1.114 * u[14] - 390.000 * u[1]) /
            3.100;

    dx[2] = (46.800 * u[0] - 46.800 * Rb / 1.334 * u[2]) / 1.337;
    dx[3] = (390.000 * u[1] - 390.000 * Rb / 1.081 * u[3]) / 1.096;
    dx[4] = (15.600 * u[0] - 15.600 * Rb / 1.110 * u[4]) / 0.782;
    dx[7] = (11.700 * u[0] - 11.700 * Rb / 1.148 * u[7]) / 0.136;
    dx[8] = (3.900 * u[0] - 3.900 * Rb / 1.199 * u[8]) / 0.134;
    dx[9] = (19.500 * u[0] - 19.500 * Rb / 0.375 * u[9]) / 18.970;
    dx[10] = (19.500 * u[0] - 19.500 * Rb / 1.069 * u[10]) / 2.877;
    dx[11] = (66.300 * u[0] - 66.300 * Rb / 1.022 * u[11]) / 26.739;
    dx[12] = (19.500 * u[0] - 19.500 * Rb / 0.898 * u[12]) / 7.745;
    dx[13] = (29.250 * u[0] - 29.250 * Rb / 1.022 * u[13]) / 0.324;
    dx[14] = (74.100 * u[0] - (74.100 * Rb / 1.114 + 1.379) * u[14]) / 0.283;
    dx[32] = 1.379 * u[14] / 1.000;

    // Gut walls: arterial perfusion, venous drainage into the portal
    // vein, plus absorption from the adjacent lumen.
    dx[22] = (3.900 * u[0] - 3.900 * Rb / 1.238 * u[22]) / 0.138;
    dx[25] = (3.370 * u[0] - 3.370 * Rb / 1.238 * u[25]) / 0.051;
    dx[26] = (16.910 * u[0] - 16.910 * Rb / 1.238 * u[26]) / 0.258;
    dx[27] = (18.720 * u[0] - 18.720 * Rb / 1.238 * u[27]) / 0.285;
    dx[28] = (15.600 * u[0] - 15.600 * Rb / 1.238 * u[28]) / 0.341;

    dx[15] = (3.900 * Rb / 1.238 * u[22] + 11.700 * Rb / 1.148 * u[7] +
              3.900 * Rb / 1.199 * u[8] + 3.370 * Rb / 1.238 * u[25] +
              16.910 * Rb / 1.238 * u[26] + 18.720 * Rb / 1.238 * u[27] +
              15.600 * Rb / 1.238 * u[28] - 74.100 * u[15]) /
             1.000;

    const double met =
        para_clint(u[30]) * fub * Rb / (1.151 * 1.598) * u[30];
    dx[30] = (74.100 * u[15] + 25.350 * u[0] - 99.450 * Rb / 1.151 * u[30]) /
                 1.598 -
             met;
    dx[31] = met;

    // Lumen chain. Per segment: solid transits and dissolves, dissolved
    // transits, is absorbed into the wall, and receives dissolution.
    // diss = 0.076, segment (kt, ka, solubility, fluid volume):
    // stomach (0.857, 4.320, 13650.000, 0.045)
    // duodenum (3.125, 3.646, 13661.889, 0.009)
    // jejunum (0.676, 4.937, 13668.842, 0.046)
    // ileum (0.455, 5.760, 13709.584, 0.050)
    // large intestine (0.028, 3.570, 13664.967, 0.013)
    const double dp = 0.076;

    const double r_st = dp * u[24] * (13650.000 - u[23]);
    dx[24] = -0.857 * u[24] - r_st;
    dx[23] = -(0.857 + 4.320) * u[23] + r_st / 0.045;
    dx[22] += 4.320 * u[23] * 0.045 / 0.138;

    const double r_du = dp * u[6] * (13661.889 - u[5]);
    dx[6] = -3.125 * u[6] + 0.857 * u[24] - r_du;
    dx[5] = -(3.125 + 3.646) * u[5] + 0.857 * u[23] * 0.045 / 0.009 +
            r_du / 0.009;
    dx[25] += 3.646 * u[5] * 0.009 / 0.051;

    const double r_je = dp * u[17] * (13668.842 - u[16]);
    dx[17] = -0.676 * u[17] + 3.125 * u[6] - r_je;
    dx[16] = -(0.676 + 4.937) * u[16] + 3.125 * u[5] * 0.009 / 0.046 +
             r_je / 0.046;
    dx[26] += 4.937 * u[16] * 0.046 / 0.258;

    const double r_il = dp * u[19] * (13709.584 - u[18]);
    dx[19] = -0.455 * u[19] + 0.676 * u[17] - r_il;
    dx[18] = -(0.455 + 5.760) * u[18] + 0.676 * u[16] * 0.046 / 0.050 +
             r_il / 0.050;
    dx[27] += 5.760 * u[18] * 0.050 / 0.285;

    const double r_li = dp * u[21] * (13664.967 - u[20]);
    dx[21] = -0.028 * u[21] + 0.455 * u[19] - r_li;
    dx[20] = -(0.028 + 3.570) * u[20] + 0.455 * u[18] * 0.050 / 0.013 +
             r_li / 0.013;
    dx[28] += 3.570 * u[20] * 0.013 / 0.341;

    dx[29] = (0.028 * u[21] + 0.028 * u[20] * 0.013) / 1.000;
    return dx;
}

inline double para_oral_mass(const VectorXd& u) {
    const double v[33] = {0.966, 3.100, 1.337, 1.096, 0.782, 0.009, 1.0,
                          0.136, 0.134, 18.970, 2.877, 26.739, 7.745,
                          0.324, 0.283, 1.000, 0.046, 1.0,   0.050, 1.0,
                          0.013, 1.0,   0.138, 0.045, 1.0,   0.051, 0.258,
                          0.285, 0.341, 1.000, 1.598, 1.598, 1.000};
    double s = 0;
    for (int i = 0; i < 33; ++i) s += u[i] * v[i];
    return s;
}

}  // namespace refrhs
