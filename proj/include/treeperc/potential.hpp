#pragma once

#include "treeperc/bracket.hpp"
#include "treeperc/spec.hpp"
#include "treeperc/tree.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace treeperc {

struct PotentialOptions {
    int D0 = 12;                          // first bracketing depth; level k uses D0 * 2^k
    int max_depth = 96;
    double tol = 1e-9;
    std::size_t node_budget = 2'000'000;  // arena size beyond which subtrees are walked virtually
    std::uint64_t work_budget = 40'000'000; // nodes visited per bracket request
};

struct EscapeProbs {
    Bracket no_return;          // P_x(H~_x = inf)
    Bracket no_parent;          // P_x(H_{x-} = inf)
    Bracket no_return_no_parent; // P_x(H~_x = inf, H_{x-} = inf)
};

struct Equilibrium {
    std::vector<int> K;
    std::vector<Bracket> e; // aligned with K
    Bracket cap;
};

// Electrical quantities on a lazily grown tree, bracketed by truncation at a
// relative depth where unexplored subtrees get the law-level bounds.
class Potential {
public:
    explicit Potential(TreeArena& tree, PotentialOptions opt = {});
    Potential(TreeArena& tree, LawBounds bounds, PotentialOptions opt = {});

    TreeArena& tree() { return tree_; }
    const LawBounds& bounds() const { return bounds_; }
    const PotentialOptions& options() const { return opt_; }
    int level_depth(int level) const;
    int max_level() const;

    // Effective conductance from x to infinity inside T_x.
    Bracket c_down_at(int x, int D);
    Bracket c_down_level(int x, int level) { return c_down_at(x, level_depth(level)); }
    Bracket c_down(int x, double tol);
    Bracket c_down(int x) { return c_down(x, opt_.tol); }

    // Effective conductance from x to infinity through the edge to its parent,
    // avoiding T_x. Zero at a root without outer parent; [0, kappa] at a stub root.
    Bracket c_up(int x, double tol);
    Bracket c_up_level(int x, int level);

    // P_x(H_{x-} < inf) = lam_{x,x-}/(lam_{x,x-} + C_down(x)); 0 at a root without outer parent.
    Bracket p_up(int x, double tol);
    Bracket p_up_level(int x, int level);

    EscapeProbs escape_probs(int x, double tol);
    Bracket e_check(int x, double tol);
    Bracket e_check_level(int x, int level);

    // Full-tree Green function.
    Bracket green_diag(int x, double tol);
    Bracket hit_prob(int x, int y, double tol); // P_x(H_y < inf)
    Bracket green(int x, int y, double tol);
    // Green function of the walk killed outside the finite set U (dense solve).
    double green_finite(const std::vector<int>& U, int x, int y);

    // Equilibrium measure and capacity of a finite set in the full tree.
    Equilibrium equilibrium(const std::vector<int>& K, double tol);
    Equilibrium equilibrium_level(const std::vector<int>& K, int level);

    std::uint64_t work() const { return work_; }

private:
    Bracket frontier() const;
    Bracket virtual_c(std::uint64_t key, int D);
    Bracket c_down_rec(int x, int D);
    Equilibrium equilibrium_with(const std::vector<int>& K, const std::function<Bracket(int)>& cdown,
                                 const Bracket& up_top);

    TreeArena& tree_;
    LawBounds bounds_;
    PotentialOptions opt_;
    struct Memo {
        int depth = -1;
        Bracket b;
    };
    std::vector<Memo> memo_;
    std::uint64_t work_ = 0;
    std::uint64_t request_work_ = 0;
    bool budget_hit_ = false;
};

// Conductance from the root of a finite tree (explicit child lists) to its
// leaves, each leaf grounded through its own conductance; solved as a sparse
// linear system (independent of the series/parallel recursion).
double grounded_conductance_solve(const std::vector<int>& parent, const std::vector<double>& lam_parent,
                                  const std::vector<double>& leak);

} // namespace treeperc
