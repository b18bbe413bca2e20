#include "treeperc/gff.hpp"
#include "treeperc/interlace.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/stats.hpp"
#include "treeperc/tree.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace treeperc;

namespace {

const OffspringSpec kBinary = OffspringSpec::unit_law({0, 0, 1});

// smallest k with u < P(Poi(m) <= k), summed in long double
std::int64_t poisson_quantile(double m, double u)
{
    long double p = std::exp(-static_cast<long double>(m)), F = p;
    std::int64_t k = 0;
    while (u >= F) {
        ++k;
        p *= m / static_cast<long double>(k);
        F += p;
    }
    return k;
}

// Random conductances on the first generations above an exact binary unit
// tree, so that every bracket closes at a finite depth.
void hybrid_source(TreeArena& t, int top)
{
    t.set_source([top](TreeArena& a, int i) {
        Stream s(a.at(i).key);
        const unsigned k = static_cast<int>(a.depth(i)) < top ? 1 + static_cast<unsigned>(s.below(3)) : 2;
        std::vector<double> lam(k, 1.0);
        if (static_cast<int>(a.depth(i)) < top)
            for (double& l : lam)
                l = 0.5 + 1.5 * s.uniform();
        return lam;
    });
}

} // namespace

TEST(InterlaceTest, ZeroLevelIsEmpty)
{
    TreeArena t(kBinary, 1);
    Potential pot(t);
    const auto r = sample_interlacements(pot, 0.0, 4, 3);
    for (int x : r.window) {
        EXPECT_EQ(r.gamma.at(x), 0u);
        EXPECT_FALSE(r.occupied(x));
    }
    EXPECT_TRUE(r.pieces.empty());
}

TEST(InterlaceTest, RootTrajectoryCount)
{
    TreeArena t(kBinary, 1);
    Potential pot(t);
    const std::uint64_t N = 20000;
    std::uint64_t hit = 0;
    for (std::uint64_t n = 0; n < N; ++n) {
        LazyInterlacement I(pot, 1.0, 0, derive_key(1, Purpose::replica, n));
        hit += I.gamma(0) >= 1;
    }
    const double p = 1.0 - std::exp(-1.0);
    EXPECT_NEAR(static_cast<double>(hit) / N, p, 3.0 * std::sqrt(p * (1 - p) / N));
}

TEST(InterlaceTest, MonotoneInLevel)
{
    TreeArena t(kBinary, 2);
    hybrid_source(t, 6);
    Potential pot(t, LawBounds{1.0, 1.0, true});
    std::size_t occupied = 0;
    for (std::uint64_t n = 0; n < 100; ++n) {
        const std::uint64_t seed = derive_key(2, Purpose::replica, n);
        const auto lo = sample_interlacements(pot, 0.3, 4, seed);
        const auto hi = sample_interlacements(pot, 0.8, 4, seed);
        for (int x : lo.window) {
            EXPECT_LE(lo.gamma.at(x), hi.gamma.at(x));
            if (lo.occupied(x))
                EXPECT_TRUE(hi.occupied(x)) << n << " " << x;
            occupied += lo.occupied(x);
        }
    }
    EXPECT_GT(occupied, 100u);
}

TEST(InterlaceTest, StructuralInvariants)
{
    TreeArena t(kBinary, 3);
    hybrid_source(t, 6);
    Potential pot(t, LawBounds{1.0, 1.0, true});
    InterlaceOptions opt;
    opt.keep_pieces = true;
    std::uint64_t all = 0;
    for (std::uint64_t n = 0; n < 60; ++n) {
        const auto r = sample_interlacements(pot, 1.0, 3, derive_key(3, Purpose::replica, n), opt);
        std::uint64_t total = 0;
        for (const auto& p : r.pieces) {
            total += p.trace.size();
            if (!p.backward && !p.trace.empty())
                EXPECT_EQ(p.trace.front(), p.start);
            const int xm = t.parent(p.start);
            for (int y : p.trace)
                EXPECT_NE(y, xm) << "part from " << p.start << " visits its parent";
            for (std::size_t i = 1; i < p.trace.size(); ++i) {
                const int a = p.trace[i - 1], b = p.trace[i];
                // window visits of one part are consecutive or separated by an excursion below the window
                EXPECT_TRUE(t.parent(a) == b || t.parent(b) == a || a == b || t.depth(a) == 3u) << a << " " << b;
            }
        }
        std::uint64_t visits = 0;
        for (const auto& [x, c] : r.visits) {
            visits += c;
            EXPECT_GT(r.local.at(x), 0.0);
            t.ensure_children(x);
            EXPECT_LE(pot.e_check_level(x, 0).lo, t.lambda(x));
        }
        EXPECT_EQ(visits, total);
        EXPECT_EQ(r.flagged, 0);
        all += visits;
    }
    EXPECT_GT(all, 60u);
}

TEST(InterlaceTest, MeanLocalTime)
{
    // with g(root, root) = 1 the mean local time at the root is u
    TreeArena t(kBinary, 4);
    Potential pot(t);
    const double u = 0.5;
    const std::size_t N = 20000;
    std::vector<double> l;
    for (std::size_t n = 0; n < N; ++n) {
        LazyInterlacement I(pot, u, 0, derive_key(4, Purpose::replica, n));
        l.push_back(I.local_time(0));
    }
    double m = 0, s2 = 0;
    for (double v : l)
        m += v;
    m /= N;
    for (double v : l)
        s2 += (v - m) * (v - m);
    EXPECT_NEAR(m, u, 3.0 * std::sqrt(s2 / N / N));
}

TEST(InterlaceTest, VacantClusterLaws)
{
    TreeArena t(kBinary, 5);
    Potential pot(t);
    const double u = 0.7;
    const std::size_t N = 10000, cap = 10;
    std::vector<std::uint64_t> a(cap + 2, 0), b(cap + 2, 0);
    std::uint64_t root_open = 0;
    for (std::size_t n = 0; n < N; ++n) {
        const auto c = vacant_cluster_bernoulli(pot, u, derive_key(5, Purpose::mark, n), cap);
        ++a[std::min(c.size(), cap + 1)];
        root_open += c.size() > 0;
        LazyInterlacement I(pot, u, static_cast<int>(cap), derive_key(6, Purpose::replica, n));
        const auto d = vacant_cluster_direct(I, cap);
        ++b[std::min(d.size(), cap + 1)];
    }
    EXPECT_GT(chi2_homogeneity(a, b).p, 0.01);
    const double p = std::exp(-u);
    EXPECT_NEAR(static_cast<double>(root_open) / N, p, 3.0 * std::sqrt(p * (1 - p) / N));
    // large u closes the root
    std::size_t empty = 0;
    for (std::size_t n = 0; n < 200; ++n)
        empty += vacant_cluster_bernoulli(pot, 40.0, derive_key(7, Purpose::mark, n), cap).size() == 0;
    EXPECT_EQ(empty, 200u);
}

TEST(InterlaceTest, PoissonInversion)
{
    for (double m : {0.1, 1.0, 3.7}) {
        for (double u : {0.01, 0.3, 0.5, 0.77, 0.999}) {
            auto exact = [&](int) { return Bracket::exact(m); };
            EXPECT_EQ(poisson_inversion(exact, u, 0), poisson_quantile(m, u)) << m << " " << u;
            auto shrinking = [&](int level) {
                const double w = std::ldexp(0.5, -4 * level);
                return Bracket::of(std::max(0.0, m - w), m + w);
            };
            EXPECT_EQ(poisson_inversion(shrinking, u, 12), poisson_quantile(m, u)) << m << " " << u;
        }
    }
    auto stuck = [](int) { return Bracket::of(0.5, 2.0); };
    EXPECT_EQ(poisson_inversion(stuck, 0.5, 3), -1);
}

TEST(InterlaceTest, Clocks)
{
    EXPECT_EQ(clock_draw(1, 2, 3), clock_draw(1, 2, 3));
    EXPECT_NE(clock_draw(1, 2, 3), clock_draw(1, 2, 4));
    double s = 0.0;
    const int N = 100000;
    for (int k = 1; k <= N; ++k)
        s += clock_draw(9, 77, static_cast<std::uint64_t>(k));
    EXPECT_NEAR(s / N, 1.0, 3.0 / std::sqrt(N));
}

TEST(InterlaceTest, ZeroLevelStreamsAgree)
{
    TreeArena t(kBinary, 8);
    Potential pot(t);
    const auto s = second_ray_knight_samples(pot, 0.0, {0}, 20000, 8);
    EXPECT_GT(ks_two_sample(s.A[0], s.B[0]).p, 0.01);
    for (double l : s.ell[0])
        EXPECT_EQ(l, 0.0);
}
