#include "treeperc/percolate.hpp"

#include "treeperc/gff.hpp"
#include "treeperc/interlace.hpp"
#include "treeperc/walk.hpp"
#include "treeperc/watershed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace treeperc {

ClusterStats explore_cluster(TreeArena& t, const Predicate& pred, int D_max, std::vector<int> schedule,
                             std::size_t budget, std::string name)
{
    ClusterStats c;
    c.predicate = std::move(name);
    if (schedule.empty())
        schedule.push_back(D_max);
    std::sort(schedule.begin(), schedule.end());
    c.schedule = schedule;
    c.survived.assign(schedule.size(), false);
    if (!pred(t.root()))
        return c;
    c.nodes.push_back(t.root());
    c.max_depth = 0;
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        const int x = c.nodes[i];
        const int d = static_cast<int>(t.depth(x));
        if (d >= D_max) {
            ++c.boundary_hits;
            continue;
        }
        t.ensure_children(x);
        for (unsigned k = 0; k < t.nchild(x); ++k) {
            const int y = t.child(x, k);
            if (!pred(y))
                continue;
            c.nodes.push_back(y);
            c.max_depth = std::max(c.max_depth, d + 1);
        }
        if (c.nodes.size() > budget) {
            c.flagged = true;
            break;
        }
    }
    c.size = c.nodes.size();
    for (std::size_t j = 0; j < schedule.size(); ++j)
        c.survived[j] = c.max_depth >= schedule[j];
    return c;
}

std::vector<double> maximin_profile(TreeArena& t, int start, const std::function<double(int)>& value,
                                    const std::vector<int>& schedule, double floor)
{
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> out(schedule.size(), ninf);
    if (schedule.empty())
        return out;
    const int Dmax = *std::max_element(schedule.begin(), schedule.end());
    const int d0 = static_cast<int>(t.depth(start));
    std::size_t left = schedule.size();
    using Item = std::pair<double, int>;
    auto cmp = [](const Item& a, const Item& b) { return a.first < b.first || (a.first == b.first && a.second > b.second); };
    std::priority_queue<Item, std::vector<Item>, decltype(cmp)> q(cmp);
    const double v0 = value(start);
    if (v0 > ninf && v0 >= floor)
        q.emplace(v0, start);
    while (!q.empty() && left > 0) {
        const auto [v, x] = q.top();
        q.pop();
        const int d = static_cast<int>(t.depth(x)) - d0;
        for (std::size_t j = 0; j < schedule.size(); ++j)
            if (schedule[j] == d && out[j] == ninf) {
                out[j] = v;
                --left;
            }
        if (d >= Dmax)
            continue;
        t.ensure_children(x);
        for (unsigned k = 0; k < t.nchild(x); ++k) {
            const int y = t.child(x, k);
            const double w = std::min(v, value(y));
            if (w > ninf && w >= floor)
                q.emplace(w, y);
        }
    }
    return out;
}

namespace {

std::uint64_t tree_seed(std::uint64_t seed, bool quenched, std::size_t n)
{
    return derive_key(seed, Purpose::tree, quenched ? 0 : static_cast<std::uint64_t>(n));
}

std::vector<double> negate(std::vector<double> v)
{
    for (double& x : v)
        x = -x;
    return v;
}

} // namespace

CriticalExperiment bernoulli_experiment(const OffspringSpec& spec, std::uint64_t seed, bool quenched)
{
    CriticalExperiment e;
    e.param = "p";
    e.increasing = true;
    e.critical = [spec, seed, quenched](std::size_t n, const std::vector<int>& schedule, Interval range) {
        TreeArena t(spec, tree_seed(seed, quenched, n));
        const std::uint64_t marks = derive_key(seed, Purpose::mark, n);
        return negate(maximin_profile(
            t, t.root(), [&](int x) { return -keyed_uniform(marks, t.at(x).key); }, schedule, -range.hi));
    };
    return e;
}

CriticalExperiment gff_experiment(const OffspringSpec& spec, const LawBounds& bounds, std::uint64_t seed,
                                  bool quenched, int horizon, int start_depth)
{
    CriticalExperiment e;
    e.param = "h";
    e.increasing = false;
    e.critical = [spec, bounds, seed, quenched, horizon, start_depth](std::size_t n,
                                                                       const std::vector<int>& schedule,
                                                                       Interval range) {
        TreeArena t(spec, tree_seed(seed, quenched || start_depth > 0, n));
        PotentialOptions o;
        o.D0 = horizon;
        o.max_depth = horizon;
        Potential pot(t, bounds, o);
        LazyField phi(pot, derive_key(seed, Purpose::field, n), 0.0, false);
        int x = t.root();
        Stream s(derive_key(seed, Purpose::misc, n));
        for (int k = 0; k < start_depth; ++k) {
            t.ensure_children(x);
            if (t.nchild(x) == 0)
                return std::vector<double>(schedule.size(), -std::numeric_limits<double>::infinity());
            x = t.child(x, static_cast<unsigned>(s.below(t.nchild(x))));
        }
        return maximin_profile(t, x, [&](int y) { return phi(y); }, schedule, range.lo);
    };
    return e;
}

CriticalExperiment interlacement_marks_experiment(const OffspringSpec& spec, const LawBounds& bounds, double u,
                                                  std::uint64_t seed)
{
    CriticalExperiment e;
    e.param = "p";
    e.increasing = true;
    e.critical = [spec, bounds, u, seed](std::size_t n, const std::vector<int>& schedule, Interval range) {
        TreeArena t(spec, tree_seed(seed, false, n));
        Potential pot(t, bounds);
        const int D = schedule.empty() ? 0 : *std::max_element(schedule.begin(), schedule.end());
        LazyInterlacement I(pot, u, D, derive_key(seed, Purpose::replica, n));
        const std::uint64_t marks = derive_key(seed, Purpose::mark, n);
        try {
            return negate(maximin_profile(
                t, t.root(),
                [&](int x) {
                    return I.occupied(x) ? -keyed_uniform(marks, t.at(x).key)
                                         : -std::numeric_limits<double>::infinity();
                },
                schedule, -range.hi));
        } catch (const UnconvergedError&) {
            return std::vector<double>(schedule.size(), std::numeric_limits<double>::quiet_NaN());
        }
    };
    return e;
}

CriticalSamples sample_critical(const CriticalExperiment& e, std::size_t N, const std::vector<int>& schedule,
                                int workers, Interval range)
{
    if (schedule.empty())
        throw std::invalid_argument("sample_critical: empty depth schedule");
    CriticalSamples s;
    s.param = e.param;
    s.increasing = e.increasing;
    s.schedule = schedule;
    s.crit.assign(schedule.size(), std::vector<double>(N));
    parallel_for(N, workers, [&](std::size_t n) {
        const std::vector<double> v = e.critical(n, schedule, range);
        for (std::size_t j = 0; j < schedule.size(); ++j)
            s.crit[j][n] = v[j];
    });
    for (std::size_t n = 0; n < N; ++n)
        s.refused += std::isnan(s.crit[0][n]);
    return s;
}

std::vector<ScanPoint> survival_curve(const CriticalSamples& s, const std::vector<double>& params)
{
    std::vector<ScanPoint> out;
    for (double th : params)
        for (std::size_t j = 0; j < s.schedule.size(); ++j) {
            ScanPoint p;
            p.param = th;
            p.D = s.schedule[j];
            p.N = s.used();
            for (double c : s.crit[j])
                if (!std::isnan(c) && (s.increasing ? c <= th : c >= th))
                    ++p.survived;
            p.freq = p.N ? static_cast<double>(p.survived) / static_cast<double>(p.N) : 0.0;
            p.ci = wilson(p.survived, p.N);
            out.push_back(p);
        }
    return out;
}

ThresholdEstimate estimate_threshold(const CriticalSamples& s, double lo, double hi, double cut, int grid,
                                     double alpha)
{
    if (!(lo < hi))
        throw std::invalid_argument("estimate_threshold: empty scan range");
    if (s.used() == 0)
        throw std::invalid_argument("estimate_threshold: no replicas");
    ThresholdEstimate r;
    r.param = s.param;
    r.schedule = s.schedule;
    r.D = s.schedule.back();
    r.N = s.used();
    r.refused = s.refused;
    r.cut = cut;
    r.lo = lo;
    r.hi = hi;
    // work with an increasing parameter
    const double sg = s.increasing ? 1.0 : -1.0;
    std::vector<double> c;
    for (double x : s.crit.back())
        if (!std::isnan(x))
            c.push_back(sg * x);
    std::sort(c.begin(), c.end());
    double a = s.increasing ? lo : -hi, b = s.increasing ? hi : -lo;
    const double N = static_cast<double>(c.size());
    auto S = [&](double th) { return static_cast<double>(std::upper_bound(c.begin(), c.end(), th) - c.begin()) / N; };
    double est;
    if (S(b) < cut) {
        r.unbounded = true;
        est = b;
    } else if (S(a) >= cut) {
        r.flagged = true;
        est = a;
    } else {
        double x = a, y = b;
        for (int it = 0; it < 200 && y - x > 0.0; ++it) {
            const double m = 0.5 * (x + y);
            if (m <= x || m >= y)
                break;
            (S(m) >= cut ? y : x) = m;
        }
        est = y;
    }
    // counts k with cut inside the Clopper-Pearson interval
    const std::size_t n = c.size();
    std::size_t kl = 0, kh = n;
    {
        std::size_t x = 0, y = n;
        while (x < y) {
            const std::size_t m = (x + y) / 2;
            if (clopper_pearson(m, n, alpha).hi >= cut)
                y = m;
            else
                x = m + 1;
        }
        kl = x;
        x = 0;
        y = n;
        while (x < y) {
            const std::size_t m = (x + y + 1) / 2;
            if (clopper_pearson(m, n, alpha).lo <= cut)
                x = m;
            else
                y = m - 1;
        }
        kh = x;
    }
    double ci_lo = kl == 0 ? a : c[kl - 1];
    double ci_hi = kh >= n ? b : c[kh];
    ci_lo = std::clamp(ci_lo, a, b);
    ci_hi = std::clamp(ci_hi, a, b);
    if (s.increasing) {
        r.estimate = est;
        r.ci = {ci_lo, ci_hi};
    } else {
        r.estimate = -est;
        r.ci = {-ci_hi, -ci_lo};
    }
    std::vector<double> params;
    for (int i = 0; i < grid; ++i)
        params.push_back(grid > 1 ? lo + (hi - lo) * i / (grid - 1) : lo);
    r.curve = survival_curve(s, params);
    const std::size_t m = s.schedule.size();
    for (std::size_t i = 0; i < r.curve.size(); ++i) {
        if (i % m && r.curve[i].freq > r.curve[i - 1].freq)
            r.flagged = true;
        if (i >= m) {
            const bool up = r.curve[i].freq >= r.curve[i - m].freq;
            if (s.increasing != up && r.curve[i].freq != r.curve[i - m].freq)
                r.flagged = true;
        }
    }
    return r;
}

ThresholdEstimate estimate_threshold(const CriticalExperiment& e, double lo, double hi, std::size_t N,
                                     const std::vector<int>& schedule, double cut, int workers)
{
    return estimate_threshold(sample_critical(e, N, schedule, workers, {lo, hi}), lo, hi, cut);
}

CapacityGrowth trace_capacity_growth(Potential& pot, int x, const std::vector<int>& Ls, std::size_t N,
                                     std::uint64_t seed, double tol, int bootstrap)
{
    if (Ls.empty() || N == 0)
        throw std::invalid_argument("trace_capacity_growth: empty schedule");
    CapacityGrowth g;
    g.L = Ls;
    std::sort(g.L.begin(), g.L.end());
    const int Lmax = g.L.back();
    g.caps.assign(g.L.size(), std::vector<double>(N));
    g.width.assign(g.L.size(), 0.0);
    TreeArena& t = pot.tree();
    const int forbidden = t.parent(x);
    for (std::size_t n = 0; n < N; ++n) {
        Stream s(derive_key(seed, Purpose::walk, n));
        const std::vector<int> path = conditioned_path(pot, x, forbidden, static_cast<std::size_t>(Lmax), s);
        std::vector<double> w(g.L.size());
        for (std::size_t j = 0; j < g.L.size(); ++j) {
            std::unordered_set<int> seen;
            std::vector<int> K;
            for (int i = 0; i < g.L[j]; ++i)
                if (seen.insert(path[static_cast<std::size_t>(i)]).second)
                    K.push_back(path[static_cast<std::size_t>(i)]);
            const Bracket cap = pot.equilibrium(K, tol).cap;
            g.caps[j][n] = cap.mid();
            w[j] = cap.width();
            g.width[j] = std::max(g.width[j], w[j]);
            if (j > 0 && g.caps[j][n] < g.caps[j - 1][n] - w[j] - w[j - 1])
                ++g.monotone_violations;
        }
    }
    std::vector<double> xs;
    for (std::size_t j = 0; j < g.L.size(); ++j) {
        g.median.push_back(median(g.caps[j]));
        g.q10.push_back(quantile(g.caps[j], 0.1));
        xs.push_back(static_cast<double>(g.L[j]));
    }
    if (g.L.size() >= 3)
        g.fit = fit_slope(xs, g.median);
    if (bootstrap > 0 && g.L.size() >= 2) {
        Stream s(derive_key(seed, Purpose::misc, 0xb007));
        std::vector<double> slopes;
        std::vector<double> row(N);
        for (int b = 0; b < bootstrap; ++b) {
            std::vector<std::size_t> idx(N);
            for (auto& i : idx)
                i = s.below(N);
            std::vector<double> ys;
            for (std::size_t j = 0; j < g.L.size(); ++j) {
                for (std::size_t k = 0; k < N; ++k)
                    row[k] = g.caps[j][idx[k]];
                ys.push_back(median(row));
            }
            double mx = 0.0, my = 0.0;
            for (std::size_t j = 0; j < xs.size(); ++j) {
                mx += xs[j];
                my += ys[j];
            }
            mx /= static_cast<double>(xs.size());
            my /= static_cast<double>(xs.size());
            double sxx = 0.0, sxy = 0.0;
            for (std::size_t j = 0; j < xs.size(); ++j) {
                sxx += (xs[j] - mx) * (xs[j] - mx);
                sxy += (xs[j] - mx) * (ys[j] - my);
            }
            slopes.push_back(sxy / sxx);
        }
        g.slope_boot = {quantile(slopes, 0.025), quantile(slopes, 0.975)};
    }
    return g;
}

Bracket effective_conductance_diagnostic(const TreeArena& t, const std::vector<int>& cluster, int D)
{
    std::unordered_set<int> in(cluster.begin(), cluster.end());
    if (!in.count(t.root()))
        return Bracket::exact(0.0);
    if (D <= 0)
        return Bracket::exact(INFINITY);
    // children before parents: reverse of a breadth-first order
    std::vector<int> order{t.root()};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int x = order[i];
        if (static_cast<int>(t.depth(x)) >= D || !t.sampled(x))
            continue;
        for (unsigned k = 0; k < t.nchild(x); ++k)
            if (in.count(t.child(x, k)))
                order.push_back(t.child(x, k));
    }
    std::unordered_map<int, double> C;
    for (std::size_t i = order.size(); i-- > 0;) {
        const int x = order[i];
        if (static_cast<int>(t.depth(x)) >= D) {
            C[x] = INFINITY;
            continue;
        }
        double c = 0.0;
        if (t.sampled(x))
            for (unsigned k = 0; k < t.nchild(x); ++k) {
                auto it = C.find(t.child(x, k));
                if (it != C.end())
                    c += series(t.lam_parent(t.child(x, k)), it->second);
            }
        C[x] = c;
    }
    return Bracket::exact(C[t.root()]);
}

GoodTreeGrowth good_tree_growth(FreePointTree& F)
{
    GoodTreeGrowth g;
    std::vector<double> counts;
    for (std::size_t i = 0; i < F.size(); ++i) {
        const int a = static_cast<int>(i);
        if (!F.at(a).ws)
            continue;
        ++g.evaluated;
        const Tri good = F.evaluate(a).good();
        if (good == Tri::undecided)
            ++g.undecided;
        if (good != Tri::yes)
            continue;
        bool complete = true;
        int k = 0;
        for (int c : F.at(a).children) {
            if (!F.at(c).ws) {
                complete = false;
                break;
            }
            const Tri gc = F.evaluate(c).good();
            if (gc == Tri::undecided) {
                complete = false;
                break;
            }
            k += gc == Tri::yes;
        }
        if (complete)
            counts.push_back(k);
    }
    g.good_points = counts.size();
    if (!counts.empty()) {
        double m = 0.0, v = 0.0;
        for (double c : counts)
            m += c;
        m /= static_cast<double>(counts.size());
        for (double c : counts)
            v += (c - m) * (c - m);
        v = counts.size() > 1 ? v / static_cast<double>(counts.size() - 1) : 0.0;
        const double h = 1.959963984540054 * std::sqrt(v / static_cast<double>(counts.size()));
        g.mean_good_children = m;
        g.ci = {m - h, m + h};
    }
    return g;
}

} // namespace treeperc
