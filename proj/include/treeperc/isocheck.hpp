#pragma once

#include "treeperc/potential.hpp"
#include "treeperc/stats.hpp"

#include <cstdint>
#include <vector>

namespace treeperc {

struct IsoOptions {
    std::size_t energy_n = 1500; // pairs used by the energy test
    int permutations = 199;
    bool power_check = true;
    double power_scale = 1.1;    // local times multiplied in the corrupted sampler
    double tol = 1e-9;
};

struct IsoReport {
    double u = 0.0;
    std::size_t N = 0;
    std::vector<int> vertices;
    std::vector<TestResult> ks;  // l + phi^2/2 against (phi' + sqrt(2u))^2/2
    bool has_pair = false;
    TestResult pair;             // energy distance on the first two vertices
    bool has_power = false;
    TestResult power;            // KS at the first vertex with corrupted local times
    std::size_t sign_checked = 0;  // vertices of I^u inside A_u
    std::size_t sign_violations = 0;
    std::size_t clock_violations = 0; // occupied vertices with l < E/lam
    std::size_t occupied = 0;
    int flagged = 0;
};

IsoReport marginal_identity_test(Potential& pot, double u, const std::vector<int>& vertices, std::size_t N,
                                 std::uint64_t seed, const IsoOptions& opt = {});

// Over R realizations of (phi, I^u, clocks) on the ball of depth D: on every
// x in I^u intersected with A_u, gamma_x = -sqrt(2u) + sqrt(2 l + phi^2) >= sqrt(2u).
IsoReport sign_inclusion_check(Potential& pot, double u, double p, int D, std::size_t R, std::uint64_t seed,
                               double tol = 1e-9);

} // namespace treeperc
