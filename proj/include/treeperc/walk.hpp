#pragma once

#include "treeperc/bracket.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/rng.hpp"
#include "treeperc/tree.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace treeperc {

// Positions are arena indices; TreeArena::kOuter stands for the outer parent.
struct WalkPath {
    std::vector<int> steps;
    std::unordered_map<int, std::uint64_t> visits;
    bool record_steps = true;

    void push(int x)
    {
        if (record_steps)
            steps.push_back(x);
        ++visits[x];
    }
    std::size_t distinct() const { return visits.size(); }
};

struct StopRule {
    enum Kind { hit, ret, visit_count, watershed, depth } kind = hit;
    std::vector<int> U;
    int L = 1;
    int D = 0;

    static StopRule hitting(std::vector<int> U);
    static StopRule returning(std::vector<int> U);
    static StopRule visits(int L);
    static StopRule watershed_time(int L);
    static StopRule reach_depth(int D);
};

enum class Outcome { stopped, hit_parent, escaped, cap_exhausted, undecided };
std::string outcome_name(Outcome o);

struct WalkOptions {
    std::uint64_t cap = 10'000'000;
    bool record_steps = true;
    // Offspring of a node at its first visit; the second argument is the
    // number of distinct vertices visited so far, the node included.
    std::function<std::vector<double>(int, std::size_t)> first_visit;
    Potential* pot = nullptr;   // enables exact escape decisions
    double decide_below = 0.1;  // decide once the return probability is at most this (or known exactly)
    int max_level = 2;
};

struct WalkResult {
    WalkPath path;
    Outcome outcome = Outcome::cap_exhausted;
    std::uint64_t time = 0;  // simulated steps; a decided return adds none
    bool teleported = false; // some return was decided rather than simulated
    std::int64_t V_L = -1;
    int X_VL = TreeArena::kOuter;
    int last = 0;
    int decisions = 0;
    int refinements = 0;
};

// One step of the walk with probabilities lam_{x,y}/lam_x.
int step(TreeArena& t, int x, Stream& s);

WalkResult run_until(TreeArena& t, int start, const StopRule& rule, Stream& s, const WalkOptions& opt = {});

// P_z(H_t < inf) for t a strict ancestor of z (or kOuter), at the given level.
Bracket return_prob_level(Potential& pot, int z, int t, int level);

// Index k with u in the k-th cell of the normalised weights; weights(level)
// returns bracketed nonnegative weights. Returns -1 when undecided.
int exact_categorical(const std::function<std::vector<Bracket>(int)>& weights, double u, int max_level,
                      int* refinements = nullptr);

// Step of the walk conditioned never to hit `forbidden` (kOuter or a strict
// ancestor of x): neighbour y with weight lam_{x,y} P_y(H_forbidden = inf).
// Returns -2 when the draw could not be decided.
int conditioned_step(Potential& pot, int x, int forbidden, Stream& s, int max_level = 2);

// Path of n positions of the conditioned walk started at x.
std::vector<int> conditioned_path(Potential& pot, int x, int forbidden, std::size_t n, Stream& s,
                                  int max_level = 2);

} // namespace treeperc
