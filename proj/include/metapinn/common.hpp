#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace metapinn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Raised when inputs are structurally invalid (bad config, bad shapes,
// infeasible bounds). The CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a numerical procedure fails (divergent fixed point,
// non-finite loss, factorization breakdown). CLI exit code 2.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64: tiny, fully portable generator. All stochastic choices in
// the project go through this so runs are bit-reproducible across
// platforms; std::mt19937 distributions are not pinned by the standard.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1)
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // uniform on [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller; avoids log(0) by shifting into (0,1]
    double normal() {
        double u1 = double((next() >> 11) + 1) * 0x1.0p-53;
        double u2 = double(next() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }
};

// Seed derivation: one master seed per run, fixed offsets per purpose so
// changing the observation draw does not disturb network init.
inline uint64_t seed_net(uint64_t master) { return master; }
inline uint64_t seed_obs(uint64_t master) { return master + 1000; }
inline uint64_t seed_tasks(uint64_t master) { return master + 2000; }
inline uint64_t seed_aux(uint64_t master) { return master + 3000; }

}  // namespace metapinn
