#include "treeperc/walk.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace treeperc {

StopRule StopRule::hitting(std::vector<int> U)
{
    StopRule r;
    r.kind = hit;
    r.U = std::move(U);
    return r;
}

StopRule StopRule::returning(std::vector<int> U)
{
    StopRule r;
    r.kind = ret;
    r.U = std::move(U);
    return r;
}

StopRule StopRule::visits(int L)
{
    if (L < 1)
        throw std::invalid_argument("visit_count: L must be at least 1");
    StopRule r;
    r.kind = visit_count;
    r.L = L;
    return r;
}

StopRule StopRule::watershed_time(int L)
{
    if (L < 1)
        throw std::invalid_argument("watershed: L must be at least 1");
    StopRule r;
    r.kind = watershed;
    r.L = L;
    return r;
}

StopRule StopRule::reach_depth(int D)
{
    if (D < 0)
        throw std::invalid_argument("depth: D must be nonnegative");
    StopRule r;
    r.kind = depth;
    r.D = D;
    return r;
}

std::string outcome_name(Outcome o)
{
    switch (o) {
    case Outcome::stopped:
        return "stopped";
    case Outcome::hit_parent:
        return "hit-parent";
    case Outcome::escaped:
        return "escaped";
    case Outcome::cap_exhausted:
        return "cap-exhausted";
    case Outcome::undecided:
        return "undecided";
    }
    return "?";
}

int step(TreeArena& t, int x, Stream& s)
{
    if (x == TreeArena::kOuter)
        throw ContractViolation("step: the outer parent is not part of the arena");
    t.ensure_children(x);
    const double up = t.lam_parent(x);
    const double tot = up + t.lam_plus(x);
    if (!(tot > 0.0))
        throw ContractViolation("step: isolated vertex");
    double v = s.uniform() * tot;
    if (v < up)
        return t.parent(x);
    v -= up;
    const unsigned n = t.nchild(x);
    for (unsigned k = 0; k + 1 < n; ++k) {
        const int c = t.child(x, k);
        if (v < t.lam_parent(c))
            return c;
        v -= t.lam_parent(c);
    }
    return t.child(x, n - 1);
}

Bracket return_prob_level(Potential& pot, int z, int t, int level)
{
    TreeArena& tr = pot.tree();
    Bracket p = Bracket::exact(1.0);
    for (int w = z; w != t; w = tr.parent(w)) {
        if (w == TreeArena::kOuter)
            throw ContractViolation("return_prob: target is not an ancestor");
        p = p * pot.p_up_level(w, level);
    }
    return p;
}

namespace {

int ancestor_at_depth(const TreeArena& t, int z, int d)
{
    if (d < 0)
        return TreeArena::kOuter;
    while (static_cast<int>(t.depth(z)) > d)
        z = t.parent(z);
    return z;
}

} // namespace

WalkResult run_until(TreeArena& t, int start, const StopRule& rule, Stream& s, const WalkOptions& opt)
{
    if (opt.cap == 0)
        throw std::invalid_argument("run_until: cap must be positive");
    WalkResult r;
    r.path.record_steps = opt.record_steps;
    std::unordered_map<int, std::size_t> order;
    std::unordered_set<int> U(rule.U.begin(), rule.U.end());
    int dU = -1;
    for (int u : rule.U)
        dU = std::max(dU, u == TreeArena::kOuter ? -1 : static_cast<int>(t.depth(u)));

    int x = start;
    bool done = false;
    // Updates the state after arriving at y; returns true when the walk stops.
    auto arrive = [&](int y) {
        r.path.push(y);
        r.last = y;
        if (y != TreeArena::kOuter && r.path.visits[y] == 1)
            order[y] = r.path.distinct();
        switch (rule.kind) {
        case StopRule::hit:
        case StopRule::ret:
            if (U.count(y) && (rule.kind == StopRule::hit || r.time > 0)) {
                r.outcome = Outcome::stopped;
                return true;
            }
            if (y == TreeArena::kOuter) {
                r.outcome = Outcome::hit_parent;
                return true;
            }
            return false;
        case StopRule::visit_count:
        case StopRule::watershed:
            if (r.V_L < 0) {
                if (y == TreeArena::kOuter) {
                    r.V_L = static_cast<std::int64_t>(r.time);
                    r.X_VL = y;
                    r.outcome = Outcome::hit_parent;
                    return true;
                }
                if (r.path.distinct() >= static_cast<std::size_t>(rule.L)) {
                    r.V_L = static_cast<std::int64_t>(r.time);
                    r.X_VL = y;
                    if (rule.kind == StopRule::visit_count) {
                        r.outcome = Outcome::stopped;
                        return true;
                    }
                }
                return false;
            }
            if (y == t.parent(r.X_VL)) {
                r.outcome = Outcome::stopped;
                return true;
            }
            return false;
        case StopRule::depth:
            if (y == TreeArena::kOuter) {
                r.outcome = Outcome::hit_parent;
                return true;
            }
            if (static_cast<int>(t.depth(y)) >= rule.D) {
                r.outcome = Outcome::stopped;
                return true;
            }
            return false;
        }
        return false;
    };
    done = arrive(x);

    while (!done) {
        if (opt.pot) {
            bool has_target = false;
            int target = TreeArena::kOuter;
            if ((rule.kind == StopRule::hit || rule.kind == StopRule::ret) && !rule.U.empty() &&
                static_cast<int>(t.depth(x)) > dU) {
                has_target = true;
                target = ancestor_at_depth(t, x, dU);
            } else if (rule.kind == StopRule::watershed && r.V_L >= 0) {
                has_target = true;
                target = t.parent(r.X_VL);
            }
            if (has_target) {
                const Bracket b0 = return_prob_level(*opt.pot, x, target, 0);
                if (b0.is_exact() || b0.hi <= opt.decide_below) {
                    const double u = s.uniform();
                    const BernoulliDecision d = exact_bernoulli(
                        b0, [&](int level) { return return_prob_level(*opt.pot, x, target, level); }, u,
                        opt.max_level);
                    ++r.decisions;
                    r.refinements += d.refinements;
                    if (!d.decided) {
                        r.outcome = Outcome::undecided;
                        break;
                    }
                    if (!d.value) {
                        r.outcome = Outcome::escaped;
                        break;
                    }
                    r.teleported = true;
                    x = target;
                    done = arrive(x);
                    continue;
                }
            }
        }
        if (r.time >= opt.cap) {
            r.outcome = Outcome::cap_exhausted;
            break;
        }
        if (opt.first_visit && !t.sampled(x))
            t.attach_children(x, opt.first_visit(x, order[x]));
        x = step(t, x, s);
        ++r.time;
        done = arrive(x);
    }
    return r;
}

int exact_categorical(const std::function<std::vector<Bracket>(int)>& weights, double u, int max_level,
                      int* refinements)
{
    std::vector<double> Flo, Fhi;
    for (int level = 0; level <= max_level; ++level) {
        const auto w = weights(level);
        const std::size_t n = w.size();
        double tot_lo = 0.0, tot_hi = 0.0;
        for (const auto& b : w) {
            tot_lo += b.lo;
            tot_hi += b.hi;
        }
        std::vector<double> lo(n), hi(n);
        double cl = 0.0, ch = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            cl += w[k].lo;
            ch += w[k].hi;
            const double rest_hi = tot_hi - ch, rest_lo = tot_lo - cl;
            lo[k] = cl + rest_hi > 0.0 ? cl / (cl + rest_hi) : 0.0;
            hi[k] = ch + rest_lo > 0.0 ? ch / (ch + rest_lo) : 1.0;
        }
        if (n > 0) {
            lo[n - 1] = hi[n - 1] = 1.0;
        }
        if (level == 0) {
            Flo = lo;
            Fhi = hi;
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                Flo[k] = std::max(Flo[k], lo[k]);
                Fhi[k] = std::min(Fhi[k], hi[k]);
            }
            if (refinements)
                ++*refinements;
        }
        double prev_hi = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (u < Flo[k]) {
                if (u >= prev_hi)
                    return static_cast<int>(k);
                break;
            }
            prev_hi = Fhi[k];
        }
    }
    return -1;
}

int conditioned_step(Potential& pot, int x, int forbidden, Stream& s, int max_level)
{
    TreeArena& t = pot.tree();
    if (x == forbidden)
        throw ContractViolation("conditioned_step: walk sits on the forbidden vertex");
    t.ensure_children(x);
    const int p = t.parent(x);
    std::vector<int> nb;
    if (t.lam_parent(x) > 0.0)
        nb.push_back(p);
    for (unsigned k = 0; k < t.nchild(x); ++k)
        nb.push_back(t.child(x, k));
    auto weights = [&](int level) {
        std::vector<Bracket> w;
        for (int y : nb) {
            const double lam = y == p ? t.lam_parent(x) : t.lam_parent(y);
            if (y == forbidden) {
                w.push_back(Bracket::exact(0.0));
                continue;
            }
            const Bracket R = return_prob_level(pot, y, forbidden, level);
            w.push_back(Bracket::of(lam * (1.0 - R.hi), lam * (1.0 - R.lo)));
        }
        return w;
    };
    const double u = s.uniform();
    const int k = exact_categorical(weights, u, max_level);
    if (k < 0)
        return -2;
    const int y = nb[static_cast<std::size_t>(k)];
    if (y == forbidden)
        throw ContractViolation("conditioned_step: forbidden vertex drawn");
    return y;
}

std::vector<int> conditioned_path(Potential& pot, int x, int forbidden, std::size_t n, Stream& s, int max_level)
{
    std::vector<int> path;
    if (n == 0)
        return path;
    path.push_back(x);
    while (path.size() < n) {
        const int y = conditioned_step(pot, path.back(), forbidden, s, max_level);
        if (y == -2)
            throw std::runtime_error("conditioned_path: undecided step");
        path.push_back(y);
    }
    return path;
}

} // namespace treeperc
