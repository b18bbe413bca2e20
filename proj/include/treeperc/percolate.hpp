#pragma once

#include "treeperc/bracket.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/spec.hpp"
#include "treeperc/stats.hpp"
#include "treeperc/tree.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace treeperc {

class FreePointTree;

using Predicate = std::function<bool(int)>;

struct ClusterStats {
    std::string predicate;
    std::size_t size = 0;
    int max_depth = -1;            // -1: root closed
    std::vector<int> schedule;
    std::vector<bool> survived;    // cluster touches depth schedule[i]
    std::size_t boundary_hits = 0; // cluster vertices at depth D_max
    bool flagged = false;          // budget exceeded, stats partial
    std::vector<int> nodes;
};

// Breadth-first root cluster of {predicate} inside relative depth D_max.
ClusterStats explore_cluster(TreeArena& t, const Predicate& pred, int D_max, std::vector<int> schedule = {},
                             std::size_t budget = 10'000'000, std::string name = "");

// Largest over endpoints at relative depth D below `start` of the smallest
// value along the path; -inf when depth D is not reached. One entry per
// schedule depth. Vertices are evaluated lazily in decreasing value order;
// those below `floor` are not expanded (their entries read -inf).
std::vector<double> maximin_profile(TreeArena& t, int start, const std::function<double(int)>& value,
                                    const std::vector<int>& schedule,
                                    double floor = -std::numeric_limits<double>::infinity());

// A monotone survival experiment given through the critical parameter of
// each replica: replica n survives to depth D at parameter theta iff
// theta >= crit (increasing) or theta <= crit (decreasing). Critical values
// outside the scan range [lo, hi] may be reported as +-inf; NaN marks a
// replica that refused (an undecided exact draw).
struct CriticalExperiment {
    std::string param = "p";
    bool increasing = true;
    std::function<std::vector<double>(std::size_t n, const std::vector<int>& schedule, Interval range)> critical;
};

// Site percolation with keyed uniform marks, open iff U_x < p.
// Annealed: a fresh tree per replica; quenched: one tree for all replicas.
CriticalExperiment bernoulli_experiment(const OffspringSpec& spec, std::uint64_t seed, bool quenched = false);

// Level sets of the free field, open iff phi_x >= h. Conductances below each
// vertex are bracketed at relative depth `horizon` and their midpoints used.
// With start_depth > 0 the cluster is grown from a vertex reached by a keyed
// uniform descent of that many generations, on one quenched tree.
CriticalExperiment gff_experiment(const OffspringSpec& spec, const LawBounds& bounds, std::uint64_t seed,
                                  bool quenched = false, int horizon = 12, int start_depth = 0);

// I^u intersected with B_p at fixed u, scanned in p. Replicas whose
// trajectory labels stay undecided are reported as refused.
CriticalExperiment interlacement_marks_experiment(const OffspringSpec& spec, const LawBounds& bounds, double u,
                                                  std::uint64_t seed);

struct CriticalSamples {
    std::string param;
    bool increasing = true;
    std::vector<int> schedule;
    std::vector<std::vector<double>> crit; // [depth index][replica]
    std::size_t refused = 0;
    std::size_t N() const { return crit.empty() ? 0 : crit[0].size(); }
    std::size_t used() const { return N() - refused; }
};

CriticalSamples sample_critical(const CriticalExperiment& e, std::size_t N, const std::vector<int>& schedule,
                                int workers = 1, Interval range = {-INFINITY, INFINITY});

struct ScanPoint {
    double param = 0.0;
    int D = 0;
    std::size_t N = 0;
    std::size_t survived = 0;
    double freq = 0.0;
    Interval ci;
};

std::vector<ScanPoint> survival_curve(const CriticalSamples& s, const std::vector<double>& params);

struct ThresholdEstimate {
    std::string param;
    double estimate = 0.0;
    Interval ci;
    std::vector<int> schedule;
    int D = 0;
    std::size_t N = 0;
    std::size_t refused = 0;
    double cut = 0.05;
    double lo = 0.0, hi = 1.0;
    std::vector<ScanPoint> curve;
    bool flagged = false;   // curve not monotone in D or in the parameter
    bool unbounded = false; // the cut is not crossed inside the scanned range
};

// Bisection of the survival-to-D_max frequency against the cut; CI from
// Clopper-Pearson bounds at the cut.
ThresholdEstimate estimate_threshold(const CriticalSamples& s, double lo, double hi, double cut = 0.05,
                                     int grid = 21, double alpha = 0.05);
ThresholdEstimate estimate_threshold(const CriticalExperiment& e, double lo, double hi, std::size_t N,
                                     const std::vector<int>& schedule, double cut = 0.05, int workers = 1);

struct CapacityGrowth {
    std::vector<int> L;
    std::vector<std::vector<double>> caps; // [L index][path]
    std::vector<double> median, q10;
    std::vector<double> width;             // largest bracket width per L
    SlopeFit fit;                          // median cap against L
    Interval slope_boot;                   // bootstrap interval over paths
    int monotone_violations = 0;           // cap(first L') < cap(first L) - width for L < L' on one path
};

// Walks from x conditioned on never hitting x-; capacity of the first-L trace.
CapacityGrowth trace_capacity_growth(Potential& pot, int x, const std::vector<int>& Ls, std::size_t N,
                                     std::uint64_t seed, double tol = 1e-9, int bootstrap = 400);

// Conductance between the root and the cluster vertices at depth D, these grounded.
Bracket effective_conductance_diagnostic(const TreeArena& t, const std::vector<int>& cluster, int D);

struct GoodTreeGrowth {
    std::size_t good_points = 0;
    double mean_good_children = 0.0;
    Interval ci;
    std::size_t undecided = 0;
    std::size_t evaluated = 0;
};

// Mean number of good children among good, fully grown free points.
GoodTreeGrowth good_tree_growth(FreePointTree& F);

} // namespace treeperc
