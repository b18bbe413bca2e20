#pragma once

#include "treeperc/nodeid.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/spec.hpp"
#include "treeperc/tree.hpp"
#include "treeperc/walk.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

namespace treeperc {

struct WatershedOptions {
    std::uint64_t cap = 10'000'000;
    double decide_below = 0.1;
    int max_level = 3;
    // escape decisions refine to depth 48 with a bounded amount of work
    PotentialOptions potential{6, 48, 1e-9, 2'000'000, 2'000'000};
};

// A watershed started at x != root below an outer parent x- with edge kappa.
// The arena is rooted at x; TreeArena::kOuter stands for x-.
struct Watershed {
    NodeId start;
    double kappa = 0.0;
    int L = 0;
    std::unique_ptr<TreeArena> arena;
    std::unique_ptr<Potential> pot;
    WalkResult walk;
    std::vector<int> order;    // distinct vertices in order of first visit
    std::vector<int> W;        // X_0 .. X_{V_L - 1}
    std::vector<int> free;     // free points, lexicographic
    std::vector<std::vector<double>> streams; // streams[k-1] = lambda^(k) consumed so far
    bool from_streams = false;

    Outcome outcome() const { return walk.outcome; }
    std::int64_t V_L() const { return walk.V_L; }
    int X_VL() const { return walk.X_VL; }
    bool reached_L() const { return walk.V_L >= 0 && walk.X_VL != TreeArena::kOuter; }
    bool visited_before_VL(int i) const; // among X_0 .. X_{V_L}
};

// Watershed process: offspring of the k-th distinct visited vertex drawn from
// the k-th i.i.d. stream; stops at V~_L, escape decided exactly.
Watershed run_watershed(const OffspringSpec& spec, const LawBounds& bounds, const NodeId& x, double kappa, int L,
                        std::uint64_t seed, const WatershedOptions& opt = {});

// Oracle: keyed Galton-Watson tree below x- and the stopped walk on it.
Watershed direct_watershed(const OffspringSpec& spec, const LawBounds& bounds, const NodeId& x, double kappa,
                           int L, std::uint64_t seed, const WatershedOptions& opt = {});

// boundary of T_{V_L} minus X_{V_L}, lexicographic
std::vector<int> free_points(const Watershed& ws);

// On V_L < H_{x-}: offspring vectors on W minus x are the streams 2..L-1.
bool stream_identity(const Watershed& ws);

// Categorical summary (outcome, free point count, distinct count at a parent hit).
int watershed_summary(const Watershed& ws);

enum class Tri { no = 0, yes = 1, undecided = 2 };
const char* tri_name(Tri t);
Tri tri_and(std::initializer_list<Tri> v);

struct GoodnessParams {
    int L = 16;
    double B = 1.5;
    double c_lambda = 0.5;
    double C_Lambda = 2.0;
    double C_g = 2.0;
    double c_f = 0.125;
    double c_L = 0.25;
    double u_tilde = 0.5;
    // constants for the very-good predicate: bounds of the conductance law
    double c_lambda_bar = 1.0;
    double C_Lambda_bar = 1.0;
    double tol = 1e-6;

    double c_e() const { return c_lambda / (c_lambda * C_g + 1.0); }
    void validate() const;
};

// Defaults derived from the law: c_lambda = lambda_min/2, C_Lambda = largest
// lambda_+, C_g = twice the median of g at the root of keyed trees,
// c_f = (1 - mu(1))/4, B = 2 E[lambda_y^{3/2}] / sqrt(L) for y a child of a
// typical vertex.
GoodnessParams default_goodness_params(const OffspringSpec& spec, const LawBounds& bounds, int L, double u_tilde,
                                       std::uint64_t seed = 1, int samples = 64);

struct Goodness {
    Tri i = Tri::undecided, ii = Tri::undecided, iii = Tri::undecided, iv = Tri::undecided, v = Tri::undecided,
        ivp = Tri::undecided;
    Tri ii_bar = Tri::undecided; // (ii) with the bounds of the conductance law
    Bracket g_a1;                // g of the subtree at the first child of the anchor
    double v_value = 0.0;
    int iv_count = 0;
    int ivp_count = 0;

    Tri good() const { return tri_and({i, ii, iii, iv, v}); }
    Tri very_good() const { return tri_and({i, ii_bar, iii, v, ivp}); }
};

struct FreePoint {
    NodeId a;
    NodeId anchor;
    int parent = -1;
    double lamF = 0.0;
    std::uint64_t gamma = 0;
    std::unique_ptr<Watershed> ws;
    std::vector<int> children; // a.i for i >= 2
    NodeId reserved;           // first free point of the watershed (if any)
    bool has_reserved = false;
    Goodness good;
    bool evaluated = false;
};

// Tree of free points with the assembled tree T^W.
class FreePointTree {
public:
    FreePointTree(OffspringSpec spec, LawBounds bounds, GoodnessParams params, std::uint64_t seed,
                  WatershedOptions opt = {});

    const OffspringSpec& spec() const { return spec_; }
    const GoodnessParams& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<double>& root_weights() const { return root_w_; }
    std::size_t size() const { return pts_.size(); }
    FreePoint& at(int i) { return pts_[static_cast<std::size_t>(i)]; }
    const FreePoint& at(int i) const { return pts_[static_cast<std::size_t>(i)]; }
    std::size_t grown() const { return grown_; }

    // Runs the watershed of free point i and registers its children.
    void grow_point(int i);
    // Breadth-first growth until `budget` watersheds are grown; false when the
    // frontier is still nonempty.
    bool grow(std::size_t budget);
    std::vector<int> frontier() const;

    // Offspring conductances of v in T^W; grows watersheds on demand.
    std::vector<double> offspring(const NodeId& v);
    // Generation sizes Z_1..Z_D of T^W.
    std::vector<std::uint64_t> generation_sizes(int D);

    const Goodness& evaluate(int i);
    // Distance in T^W between the anchors of i and of its parent.
    int anchor_distance(int i) const;
    // Conductances along the path from the anchor of `from` (exclusive) down to the anchor of `to`.
    std::vector<double> path_conductances(int from, int to) const;

private:
    int deepest_anchor(const NodeId& v) const;

    OffspringSpec spec_;
    LawBounds bounds_;
    GoodnessParams params_;
    std::uint64_t seed_;
    WatershedOptions opt_;
    std::vector<double> root_w_;
    std::unique_ptr<TreeArena> root_ends_;
    std::vector<FreePoint> pts_;
    std::unordered_map<NodeId, int, NodeIdHash> anchors_;
    std::size_t grown_ = 0;
    std::size_t next_ = 0;
};

struct CouplingRecord {
    int point = -1;
    bool gamma_ok = false;
    bool escape_ok = false;
    double e_lower = 0.0;    // lower bound on e_{{a^},T^W_a^}(a^) through the first child
    bool level_ok = false;   // u e_lower >= u_tilde
    std::uint64_t gamma_prime = 0;
    bool included = false;   // W^a inside the trace of the coupled trajectory
};

struct CouplingReport {
    std::vector<CouplingRecord> records;
    int good = 0;
    int undecided = 0;
    int violations = 0;
};

// For every decided-good point: checks the three conditions and builds the
// coupled trajectory count Gamma'_a^ >= 1 whose first trajectory is the
// watershed walk, then checks W^a against its trace.
CouplingReport couple_and_check(FreePointTree& F, double u);

struct NoiseMembership {
    bool in_A = false;
    bool in_B = false;
    double E = 0.0;
};

// A_u: E_x > 4 u lam_x or |phi_x| > 2 sqrt(2u); B_p: mark < p.
NoiseMembership noise_membership(std::uint64_t clock_seed, std::uint64_t mark_seed, std::uint64_t key, double u,
                                 double p, double lam_x, double phi_x);

// C(a^ <-> a^i) / (C(a^- <-> a^) + C(a^ <-> a^i)) by the series law.
double drift_ratio(const std::vector<double>& up_path, const std::vector<double>& down_path);

struct DriftCheck {
    int edges = 0;
    int violations = 0;
    double min_ratio = 1.0;
    double bound = 0.0;
};

// Over edges a -> a.i with a very good and both anchor distances at least c_L L.
DriftCheck drift_check(FreePointTree& F);

} // namespace treeperc
