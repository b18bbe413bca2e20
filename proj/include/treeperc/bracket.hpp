#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace treeperc {

// A bracket needed for an exact answer did not reach its tolerance.
struct UnconvergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Closed interval [lo, hi] enclosing a quantity.
struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
    int depth = 0;
    bool converged = true;
    bool certified = true;

    static Bracket exact(double v) { return Bracket{v, v, 0, true, true}; }
    static Bracket of(double lo, double hi) { return Bracket{lo, hi, 0, true, true}; }

    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
    bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
    bool is_exact() const { return lo == hi; }
};

inline Bracket merge_meta(Bracket r, const Bracket& a, const Bracket& b)
{
    r.depth = std::max(a.depth, b.depth);
    r.converged = a.converged && b.converged;
    r.certified = a.certified && b.certified;
    return r;
}

inline Bracket operator+(const Bracket& a, const Bracket& b)
{
    return merge_meta(Bracket{a.lo + b.lo, a.hi + b.hi}, a, b);
}

inline Bracket operator*(const Bracket& a, const Bracket& b) // nonnegative operands
{
    return merge_meta(Bracket{a.lo * b.lo, a.hi * b.hi}, a, b);
}

inline double series(double a, double b)
{
    if (a == 0.0 || b == 0.0)
        return 0.0;
    if (std::isinf(a))
        return b;
    if (std::isinf(b))
        return a;
    return a * b / (a + b);
}

// Series composition of an edge of conductance lam with a conductance in c.
inline Bracket series(double lam, const Bracket& c)
{
    Bracket r = c;
    r.lo = series(lam, c.lo);
    r.hi = series(lam, c.hi);
    return r;
}

inline Bracket series(const Bracket& a, const Bracket& b)
{
    return merge_meta(Bracket{series(a.lo, b.lo), series(a.hi, b.hi)}, a, b);
}

// 1/x for positive x
inline Bracket reciprocal(const Bracket& a)
{
    Bracket r = a;
    r.lo = a.hi > 0.0 ? 1.0 / a.hi : INFINITY;
    r.hi = a.lo > 0.0 ? 1.0 / a.lo : INFINITY;
    return r;
}

// k/(k+c), decreasing in c
inline Bracket ratio_up(double k, const Bracket& c)
{
    Bracket r = c;
    r.lo = k / (k + c.hi);
    r.hi = k / (k + c.lo);
    return r;
}

// c/(k+c), increasing in c
inline Bracket ratio_down(double k, const Bracket& c)
{
    Bracket r = c;
    r.lo = c.lo / (k + c.lo);
    r.hi = std::isinf(c.hi) ? 1.0 : c.hi / (k + c.hi);
    return r;
}

struct BernoulliDecision {
    bool value = false;
    bool decided = false;
    int refinements = 0;
};

// Decides [u < p] for p known through brackets refine(0), refine(1), ...
// Level 0 is `first`; successive brackets are intersected.
BernoulliDecision exact_bernoulli(const Bracket& first, const std::function<Bracket(int)>& refine, double u,
                                  int max_level);

} // namespace treeperc
