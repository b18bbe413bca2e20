#pragma once

#include "treeperc/bracket.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace treeperc {

// Nodes of relative depth at most D, parents before children.
std::vector<int> ball(TreeArena& t, int D);

// Field values computed on demand from the ancestors only:
// phi_root = sqrt(g(root,root)) Z_root and
// phi_x = P_x(H_{x-} < inf) phi_{x-} + sqrt(1/(lam_{x,x-} + C_down(x))) Z_x.
class LazyField {
public:
    LazyField(Potential& pot, std::uint64_t seed, double tol, bool refuse_unconverged = true);

    double operator()(int x);
    Bracket variance(int x); // conditional variance given the parent value
    Bracket p_up(int x);
    double normal(int x) const; // Z_x
    double max_width() const { return max_width_; }
    std::uint64_t seed() const { return seed_; }
    void reseed(std::uint64_t seed);

private:
    void prepare(int x);

    Potential& pot_;
    std::uint64_t seed_;
    double tol_;
    bool refuse_;
    struct Coef {
        bool ready = false;
        Bracket var, pup;
    };
    std::vector<Coef> coef_;
    std::unordered_map<int, double> val_;
    double max_width_ = 0.0;
};

struct FieldSample {
    std::uint64_t seed = 0;
    int D = 0;
    double tol = 0.0;
    std::vector<int> window;
    std::unordered_map<int, double> phi;
    std::unordered_map<int, Bracket> var;
    double bias_bound = 0.0; // input bracket width times depth
};

FieldSample sample_field(Potential& pot, int D, double tol, std::uint64_t seed);

struct LevelSet {
    double h = 0.0;
    std::vector<int> members;      // window vertices with phi >= h
    std::vector<int> root_cluster; // connected component of the root inside the window
};

LevelSet level_set(const TreeArena& t, const FieldSample& f, double h);

// Green function of the full-tree walk killed on K, restricted to the window
// minus K; the parts of the tree outside the window enter as leaks.
struct KilledGreen {
    std::vector<int> nodes;
    std::unordered_map<int, int> pos;
    Eigen::MatrixXd G;
    double at(int x, int y) const;
};

KilledGreen killed_green(Potential& pot, const std::vector<int>& window, const std::vector<int>& K, double tol);

struct MarkovDecomposition {
    std::unordered_map<int, double> beta; // E_z[phi_{X_{H_K}}; H_K < inf]
    std::unordered_map<int, double> psi;  // phi - beta
};

MarkovDecomposition markov_decompose(Potential& pot, const FieldSample& f, const std::vector<int>& K, double tol);

struct WarmupResult {
    bool holds = false;
    double value = 0.0;
    double margin = 0.0;
};

// E[pi 1{lam_+ <= M}] F(-h sqrt(2M)) > 1, F the standard normal CDF.
WarmupResult warmup_criterion(const OffspringSpec& spec, double h, double M);

double normal_cdf(double x);

} // namespace treeperc
