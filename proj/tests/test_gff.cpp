#include "treeperc/gff.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/stats.hpp"
#include "treeperc/tree.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace treeperc;

namespace {

const OffspringSpec kBinary = OffspringSpec::unit_law({0, 0, 1});

struct Moments {
    double mean_x = 0, mean_y = 0, cov = 0, var_x = 0;
};

template <class F>
Moments moments(std::size_t N, F draw)
{
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (std::size_t n = 0; n < N; ++n) {
        const auto [x, y] = draw(n);
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    Moments m;
    const double fn = static_cast<double>(N);
    m.mean_x = sx / fn;
    m.mean_y = sy / fn;
    m.cov = sxy / fn - m.mean_x * m.mean_y;
    m.var_x = sxx / fn - m.mean_x * m.mean_x;
    return m;
}

} // namespace

TEST(GffTest, RootVarianceOnBinaryTree)
{
    TreeArena t(kBinary, 1);
    Potential pot(t);
    LazyField phi(pot, 0, 1e-9);
    t.ensure_children(0);
    const int c = t.child(0, 0);
    const std::size_t N = 100000;
    const auto m = moments(N, [&](std::size_t n) {
        phi.reseed(derive_key(1, Purpose::field, n));
        return std::pair{phi(0), phi(c)};
    });
    EXPECT_GE(m.var_x, 0.98);
    EXPECT_LE(m.var_x, 1.02);
    // g(root, child) = P_child(H_root < inf) g(root, root) = 1/2
    EXPECT_NEAR(m.cov, 0.5, 3.0 * std::sqrt(1.25 / N));
}

TEST(GffTest, VertexMarginalsAreNormal)
{
    const auto spec = OffspringSpec::iid_law({0, 0.4, 0.6}, 0.5, 2.0);
    TreeArena t(spec, 2);
    Potential pot(t, law_bounds(spec), PotentialOptions{12, 12, 1e-9, 2'000'000, 2'000'000});
    const std::vector<int> window = ball(t, 3);
    std::vector<int> probe(window.begin(), window.begin() + std::min<std::size_t>(10, window.size()));
    LazyField phi(pot, 0, 1e-9, false);
    const std::size_t N = 20000;
    std::vector<std::vector<double>> z(probe.size());
    for (std::size_t n = 0; n < N; ++n) {
        phi.reseed(derive_key(2, Purpose::field, n));
        for (std::size_t j = 0; j < probe.size(); ++j)
            z[j].push_back(phi(probe[j]));
    }
    for (std::size_t j = 0; j < probe.size(); ++j) {
        const double sd = std::sqrt(pot.green_diag(probe[j], 1e-3).mid());
        const auto r = ks_one_sample(z[j], [&](double v) { return normal_cdf(v / sd); });
        EXPECT_GT(r.p, 0.001) << probe[j];
    }
}

TEST(GffTest, LevelSets)
{
    TreeArena t(kBinary, 3);
    Potential pot(t);
    const FieldSample f = sample_field(pot, 4, 1e-9, 9);
    EXPECT_EQ(f.window.size(), 31u);
    const LevelSet all = level_set(t, f, -INFINITY);
    EXPECT_EQ(all.members.size(), f.window.size());
    EXPECT_EQ(all.root_cluster.size(), f.window.size());
    const LevelSet a = level_set(t, f, -0.3), b = level_set(t, f, 0.4);
    for (int x : b.members)
        EXPECT_NE(std::find(a.members.begin(), a.members.end(), x), a.members.end());
    for (int x : a.members)
        EXPECT_GE(f.phi.at(x), -0.3);
    EXPECT_THROW(sample_field(pot, 4, 0.0, 9), std::invalid_argument);
}

TEST(GffTest, RefusesUnconvergedVariance)
{
    const auto spec = OffspringSpec::unit_law({0, 0.5, 0.5});
    TreeArena t(spec, 4);
    Potential pot(t, law_bounds(spec), PotentialOptions{4, 4, 1e-9, 2'000'000, 2'000'000});
    LazyField phi(pot, 1, 1e-9, true);
    EXPECT_THROW(phi(0), UnconvergedError);
}

TEST(GffTest, MarkovDecomposition)
{
    TreeArena t(kBinary, 5);
    Potential pot(t);
    t.ensure_children(0);
    const int c = t.child(0, 0);
    const std::vector<int> K{0};
    const std::size_t N = 40000;
    double sp = 0, spk = 0, spp = 0, sk = 0;
    for (std::size_t n = 0; n < N; ++n) {
        const FieldSample f = sample_field(pot, 2, 1e-9, derive_key(5, Purpose::field, n));
        const auto d = markov_decompose(pot, f, K, 1e-9);
        ASSERT_EQ(d.psi.at(0), 0.0);
        ASSERT_EQ(d.beta.at(0), f.phi.at(0));
        const double p = d.psi.at(c), k = f.phi.at(0);
        sp += p;
        sk += k;
        spk += p * k;
        spp += p * p;
    }
    const double fn = static_cast<double>(N);
    const double var = spp / fn - (sp / fn) * (sp / fn);
    const double cov = spk / fn - (sp / fn) * (sk / fn);
    EXPECT_NEAR(cov, 0.0, 3.0 * std::sqrt(0.5 / fn));
    // killed on the root, the child escapes through its own subtree: g = 1/(1 + 1)
    EXPECT_NEAR(var, 0.5, 3.0 * 0.5 * std::sqrt(2.0 / fn));
    const FieldSample f = sample_field(pot, 2, 1e-9, 1);
    const auto none = markov_decompose(pot, f, {}, 1e-9);
    EXPECT_EQ(none.psi.at(c), f.phi.at(c));
    EXPECT_EQ(none.beta.at(c), 0.0);
    const KilledGreen g = killed_green(pot, f.window, K, 1e-9);
    EXPECT_NEAR(g.at(c, c), 0.5, 1e-8);
}

TEST(GffTest, IndicatorsArePositivelyCorrelated)
{
    TreeArena t(kBinary, 6);
    Potential pot(t);
    const std::vector<int> w = ball(t, 2);
    const std::size_t N = 20000;
    std::vector<std::vector<int>> ind(w.size());
    for (std::size_t n = 0; n < N; ++n) {
        const FieldSample f = sample_field(pot, 2, 1e-9, derive_key(6, Purpose::field, n));
        for (std::size_t j = 0; j < w.size(); ++j)
            ind[j].push_back(f.phi.at(w[j]) >= 0.2);
    }
    const double fn = static_cast<double>(N);
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = i + 1; j < w.size(); ++j) {
            double a = 0, b = 0, ab = 0;
            for (std::size_t n = 0; n < N; ++n) {
                a += ind[i][n];
                b += ind[j][n];
                ab += ind[i][n] * ind[j][n];
            }
            const double cov = ab / fn - (a / fn) * (b / fn);
            EXPECT_GE(cov, -3.0 * 0.25 / std::sqrt(fn));
        }
}

TEST(GffTest, WarmupCriterion)
{
    const auto d3 = OffspringSpec::unit_law({0, 0, 0, 1});
    const auto r = warmup_criterion(d3, 0.0, 3.0);
    EXPECT_NEAR(r.value, 3.0 * 0.5, 1e-12);
    EXPECT_TRUE(r.holds);
    EXPECT_NEAR(r.margin, 0.5, 1e-12);
    EXPECT_FALSE(warmup_criterion(d3, 50.0, 3.0).holds);
    EXPECT_LT(warmup_criterion(d3, 50.0, 3.0).value, 1e-300);
    // below M = 3 the edge sum is never admitted
    EXPECT_EQ(warmup_criterion(d3, 0.0, 2.5).value, 0.0);
    // N children of conductance 1/N: the edge sum is 1, so M = 1 admits every N
    std::vector<MixtureAtom> atoms;
    double mean = 0.0;
    for (unsigned N : {1u, 10u, 100u, 1000u}) {
        atoms.push_back(MixtureAtom{0.25, N, ConductanceLaw{ConductanceLaw::constant, 1.0 / N, 1.0 / N}});
        mean += 0.25 * N;
    }
    const auto heavy = OffspringSpec::mixture_law(atoms);
    for (double h : {0.0, 1.0, 2.0})
        EXPECT_NEAR(warmup_criterion(heavy, h, 1.0).value, mean * normal_cdf(-h * std::sqrt(2.0)), 1e-9 * mean);
    EXPECT_TRUE(warmup_criterion(heavy, 1.0, 1.0).holds);
    EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-15);
}
