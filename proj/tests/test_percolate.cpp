#include "treeperc/percolate.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/rng.hpp"
#include "treeperc/tree.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

using namespace treeperc;

namespace {

const OffspringSpec kBinary = OffspringSpec::unit_law({0, 0, 1});

// P(open cluster of an open vertex reaches D more generations), k children each
double open_survival(double p, unsigned k, int D)
{
    double r = 1.0;
    for (int d = 0; d < D; ++d)
        r = 1.0 - std::pow(1.0 - p * r, k);
    return r;
}

// conductance from the root of a complete k-ary unit tree to its depth-D level
double kary_conductance(unsigned k, int D)
{
    double c = INFINITY;
    for (int d = 0; d < D; ++d)
        c = k / (1.0 + 1.0 / c);
    return c;
}

double brute_maximin(TreeArena& t, int x, int left, const std::function<double(int)>& value, double acc)
{
    acc = std::min(acc, value(x));
    if (left == 0)
        return acc;
    t.ensure_children(x);
    double best = -std::numeric_limits<double>::infinity();
    for (unsigned k = 0; k < t.nchild(x); ++k)
        best = std::max(best, brute_maximin(t, t.child(x, k), left - 1, value, acc));
    return best;
}

} // namespace

TEST(PercolateTest, TruePredicateGivesTheBall)
{
    TreeArena t(kBinary, 1);
    const auto c = explore_cluster(t, [](int) { return true; }, 6, {2, 4, 6}, 10'000'000, "all");
    EXPECT_EQ(c.size, 127u);
    EXPECT_EQ(c.max_depth, 6);
    EXPECT_EQ(c.boundary_hits, 64u);
    for (bool s : c.survived)
        EXPECT_TRUE(s);
    EXPECT_FALSE(c.flagged);
    const auto none = explore_cluster(t, [](int) { return false; }, 6);
    EXPECT_EQ(none.size, 0u);
    EXPECT_EQ(none.max_depth, -1);
    const auto cut = explore_cluster(t, [](int) { return true; }, 6, {}, 10);
    EXPECT_TRUE(cut.flagged);
}

TEST(PercolateTest, BernoulliSurvivalMatchesThinnedLaw)
{
    const auto d2 = OffspringSpec::unit_law({0, 0, 1});
    const double p = 0.6;
    const int D = 16;
    const std::size_t N = 10000;
    std::size_t open = 0, survived = 0;
    for (std::size_t n = 0; n < N; ++n) {
        TreeArena t(d2, derive_key(2, Purpose::tree, n));
        const std::uint64_t marks = derive_key(2, Purpose::mark, n);
        const auto c = explore_cluster(
            t, [&](int x) { return keyed_uniform(marks, t.at(x).key) < p; }, D, {4, 8, 12, 16});
        for (std::size_t j = 1; j < c.survived.size(); ++j)
            EXPECT_LE(c.survived[j], c.survived[j - 1]);
        open += c.max_depth >= 0;
        survived += c.survived.back();
    }
    // the open root's offspring in the cluster follow Binomial(2, p)
    const auto thinned = OffspringSpec::unit_law({(1 - p) * (1 - p), 2 * p * (1 - p), p * p});
    const double q = extinction_prob(thinned);
    const double cond = static_cast<double>(survived) / static_cast<double>(open);
    EXPECT_NEAR(cond, 1.0 - q, 0.02);
    EXPECT_NEAR(cond, open_survival(p, 2, D), 3.0 * std::sqrt(0.25 / static_cast<double>(open)));
    EXPECT_NEAR(static_cast<double>(survived) / N, p * open_survival(p, 2, D), 3.0 * std::sqrt(0.25 / N));
}

TEST(PercolateTest, MaximinMatchesBruteForce)
{
    const auto spec = OffspringSpec::iid_law({0.1, 0.3, 0.4, 0.2}, 0.5, 2.0);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        TreeArena t(spec, seed);
        auto v = [&](int x) { return keyed_normal(seed, t.at(x).key); };
        const std::vector<int> schedule{1, 3, 5};
        const auto prof = maximin_profile(t, t.root(), v, schedule);
        for (std::size_t j = 0; j < schedule.size(); ++j)
            EXPECT_EQ(prof[j], brute_maximin(t, t.root(), schedule[j], v, INFINITY)) << seed << " " << j;
        const auto floored = maximin_profile(t, t.root(), v, schedule, -0.3);
        for (std::size_t j = 0; j < schedule.size(); ++j)
            EXPECT_EQ(floored[j], prof[j] >= -0.3 ? prof[j] : -INFINITY) << seed << " " << j;
    }
}

TEST(PercolateTest, ThresholdsOfRegularTrees)
{
    const std::vector<int> schedule{8, 12, 16};
    const auto r2 = estimate_threshold(bernoulli_experiment(kBinary, 3), 0.2, 0.8, 4000, schedule);
    EXPECT_GE(r2.estimate, 0.45);
    EXPECT_LE(r2.estimate, 0.55);
    EXPECT_LE(r2.ci.lo, r2.estimate);
    EXPECT_GE(r2.ci.hi, r2.estimate);
    EXPECT_FALSE(r2.flagged);
    EXPECT_EQ(r2.D, 16);
    const auto d3 = OffspringSpec::unit_law({0, 0, 0, 1});
    const auto r3 = estimate_threshold(bernoulli_experiment(d3, 4), 0.1, 0.6, 4000, schedule);
    EXPECT_NEAR(r3.estimate, 1.0 / 3.0, 0.05);
    // the cut is never reached below p = 0.3 on the binary tree
    const auto low = estimate_threshold(bernoulli_experiment(kBinary, 3), 0.0, 0.3, 2000, schedule);
    EXPECT_TRUE(low.unbounded);
}

TEST(PercolateTest, SurvivalCurveIsMonotone)
{
    const auto s = sample_critical(bernoulli_experiment(kBinary, 5), 2000, {4, 8}, 2);
    const auto again = sample_critical(bernoulli_experiment(kBinary, 5), 2000, {4, 8}, 1);
    EXPECT_EQ(s.crit, again.crit);
    const auto curve = survival_curve(s, {0.3, 0.5, 0.7, 0.9, 1.0});
    ASSERT_EQ(curve.size(), 10u);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (i % 2)
            EXPECT_LE(curve[i].freq, curve[i - 1].freq);
        if (i >= 2)
            EXPECT_GE(curve[i].freq, curve[i - 2].freq);
        EXPECT_LE(curve[i].ci.lo, curve[i].freq);
        EXPECT_GE(curve[i].ci.hi, curve[i].freq);
    }
    EXPECT_EQ(curve.back().freq, 1.0);
}

TEST(PercolateTest, EffectiveConductance)
{
    const auto line = OffspringSpec::unit_law({0, 1});
    TreeArena h(line, 1);
    for (int D : {1, 5, 20}) {
        const auto c = explore_cluster(h, [](int) { return true; }, D);
        EXPECT_NEAR(effective_conductance_diagnostic(h, c.nodes, D).mid(), 1.0 / D, 1e-12);
    }
    TreeArena t(kBinary, 1);
    double prev = INFINITY;
    for (int D = 1; D <= 12; ++D) {
        const auto c = explore_cluster(t, [](int) { return true; }, D);
        const double g = effective_conductance_diagnostic(t, c.nodes, D).mid();
        EXPECT_NEAR(g, kary_conductance(2, D), 1e-12);
        EXPECT_LT(g, prev);
        EXPECT_GT(g, 1.0);
        prev = g;
    }
    EXPECT_NEAR(prev, 1.0, 1e-3);
    EXPECT_EQ(effective_conductance_diagnostic(t, {}, 4).mid(), 0.0);
    // a lone root never reaches depth 4
    EXPECT_EQ(effective_conductance_diagnostic(t, {t.root()}, 4).mid(), 0.0);
}

TEST(PercolateTest, TraceCapacityGrows)
{
    TreeArena t(kBinary, 6);
    Potential pot(t);
    const auto g = trace_capacity_growth(pot, t.root(), {1, 4, 8, 16}, 100, 6, 1e-9, 200);
    // the root alone escapes through its two children: C_down = 1
    for (double c : g.caps[0])
        EXPECT_NEAR(c, 1.0, 1e-8);
    EXPECT_EQ(g.monotone_violations, 0);
    EXPECT_GT(g.fit.slope, 0.0);
    EXPECT_GT(g.slope_boot.lo, 0.0);
    for (std::size_t j = 1; j < g.median.size(); ++j)
        EXPECT_GE(g.median[j], g.median[j - 1]);
}
