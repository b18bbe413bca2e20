#include "treeperc/interlace.hpp"
#include "treeperc/stats.hpp"
#include "treeperc/watershed.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace treeperc;

namespace {

std::vector<std::uint64_t> histogram(const std::vector<int>& v)
{
    std::map<int, std::uint64_t> m;
    for (int x : v)
        ++m[x];
    std::vector<std::uint64_t> h;
    for (const auto& [k, c] : m)
        h.push_back(c);
    return h;
}

// aligned histograms of two categorical samples
std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>> aligned(const std::vector<int>& a,
                                                                        const std::vector<int>& b)
{
    std::map<int, std::pair<std::uint64_t, std::uint64_t>> m;
    for (int x : a)
        ++m[x].first;
    for (int x : b)
        ++m[x].second;
    std::vector<std::uint64_t> ha, hb;
    for (const auto& [k, c] : m) {
        ha.push_back(c.first);
        hb.push_back(c.second);
    }
    return {ha, hb};
}

// generation sizes of a keyed Galton-Watson tree
std::vector<std::uint64_t> gw_generations(const OffspringSpec& spec, std::uint64_t seed, int D)
{
    TreeArena t(spec, seed);
    std::vector<int> level{0};
    std::vector<std::uint64_t> Z;
    for (int d = 0; d < D; ++d) {
        std::vector<int> next;
        for (int x : level) {
            t.ensure_children(x);
            for (unsigned k = 0; k < t.nchild(x); ++k)
                next.push_back(t.child(x, k));
        }
        Z.push_back(next.size());
        level = std::move(next);
    }
    return Z;
}

} // namespace

TEST(WatershedTest, GamblersRuinOnHalfLine)
{
    const auto line = OffspringSpec::unit_law({0, 1});
    const LawBounds b = law_bounds(line);
    for (int L : {2, 4, 7}) {
        const std::uint64_t N = 20000;
        std::uint64_t reached = 0;
        for (std::uint64_t n = 0; n < N; ++n) {
            const Watershed ws = run_watershed(line, b, NodeId{1}, 1.0, L, derive_key(1, Purpose::misc, n));
            reached += ws.reached_L();
        }
        const double p = 1.0 / L;
        EXPECT_NEAR(static_cast<double>(reached) / N, p, 3.0 * std::sqrt(p * (1 - p) / N)) << L;
    }
}

TEST(WatershedTest, RootStartRejected)
{
    const auto spec = OffspringSpec::unit_law({0, 0, 1});
    EXPECT_THROW(run_watershed(spec, law_bounds(spec), NodeId{}, 1.0, 3, 1), ContractViolation);
}

TEST(WatershedTest, StreamIdentityAndFreePoints)
{
    const auto spec = OffspringSpec::iid_law({0, 0.5, 0.5}, 0.5, 2.0);
    const LawBounds b = law_bounds(spec);
    int reached = 0;
    for (std::uint64_t n = 0; n < 400; ++n) {
        const Watershed ws = run_watershed(spec, b, NodeId{1, 2}, 0.8, 6, derive_key(2, Purpose::misc, n));
        if (!ws.reached_L())
            continue;
        ++reached;
        EXPECT_TRUE(stream_identity(ws)) << n;
        EXPECT_EQ(std::count(ws.free.begin(), ws.free.end(), ws.X_VL()), 0);
        for (std::size_t i = 1; i < ws.free.size(); ++i)
            EXPECT_LT(ws.arena->relative_id(ws.free[i - 1]), ws.arena->relative_id(ws.free[i]));
        for (int f : ws.free) {
            EXPECT_FALSE(ws.arena->sampled(f) && ws.visited_before_VL(f));
            EXPECT_EQ(std::count(ws.W.begin(), ws.W.end(), f), 0);
        }
        EXPECT_GE(ws.order.size(), 6u);
    }
    EXPECT_GT(reached, 20);
}

TEST(WatershedTest, FreePointsOfShortWalksByEnumeration)
{
    // binary unit tree, L = 2: the walk either steps up first, and both
    // children of x are free, or goes to a child c; then T_{V_2} is x with
    // both children and c unexplored, so the other child is the free point
    const auto bin = OffspringSpec::unit_law({0, 0, 1});
    int up = 0, down = 0;
    for (std::uint64_t n = 0; n < 200; ++n) {
        const Watershed ws = run_watershed(bin, law_bounds(bin), NodeId{1}, 1.0, 2, derive_key(3, Purpose::misc, n));
        EXPECT_EQ(ws.V_L(), 1);
        if (!ws.reached_L()) {
            ++up;
            EXPECT_EQ(ws.outcome(), Outcome::hit_parent);
            EXPECT_EQ(ws.free, (std::vector<int>{1, 2}));
            continue;
        }
        ++down;
        ASSERT_EQ(ws.free.size(), 1u);
        EXPECT_EQ(ws.arena->parent(ws.free[0]), 0);
        EXPECT_NE(ws.free[0], ws.X_VL());
        EXPECT_EQ(ws.W, std::vector<int>{0});
    }
    EXPECT_GT(up, 0);
    EXPECT_GT(down, 0);
}

TEST(WatershedTest, LawMatchesDirectConstruction)
{
    const auto spec = OffspringSpec::unit_law({0, 0.5, 0.5});
    const LawBounds b = law_bounds(spec);
    std::vector<int> a, d;
    const std::uint64_t N = 4000;
    for (std::uint64_t n = 0; n < N; ++n) {
        a.push_back(watershed_summary(run_watershed(spec, b, NodeId{1}, 1.0, 5, derive_key(4, Purpose::misc, n))));
        d.push_back(watershed_summary(direct_watershed(spec, b, NodeId{1}, 1.0, 5, derive_key(5, Purpose::misc, n))));
    }
    const auto [ha, hd] = aligned(a, d);
    EXPECT_GT(chi2_homogeneity(ha, hd).p, 0.01);
    EXPECT_GT(histogram(a).size(), 3u);
}

TEST(WatershedTest, ConstantsAndTriLogic)
{
    GoodnessParams p;
    p.c_lambda = 1.0;
    p.C_g = 1.0;
    EXPECT_DOUBLE_EQ(p.c_e(), 0.5);
    EXPECT_EQ(tri_and({Tri::yes, Tri::yes}), Tri::yes);
    EXPECT_EQ(tri_and({Tri::yes, Tri::undecided}), Tri::undecided);
    EXPECT_EQ(tri_and({Tri::no, Tri::undecided}), Tri::no);
    p.L = 1;
    EXPECT_THROW(p.validate(), ConfigError);
    GoodnessParams q;
    q.c_f = 1.5;
    EXPECT_THROW(q.validate(), ConfigError);
    // (v) for unit conductances with lambda_y <= 3 holds once L > (3^{3/2}/B)^2
    const double B = 1.5, bound = std::pow(std::pow(3.0, 1.5) / B, 2.0);
    for (int L : {13, 20, 64}) {
        ASSERT_GT(L, bound);
        EXPECT_LT(std::pow(static_cast<double>(L), -1.5) * L * std::pow(3.0, 1.5), B);
    }
}

TEST(WatershedTest, NoiseSets)
{
    const double u = 0.01, lam = 3.0;
    const double Et = 4.0 * u * lam, Pt = 2.0 * std::sqrt(2.0 * u);
    EXPECT_NEAR(Et, 0.12, 1e-15);
    EXPECT_NEAR(Pt, 2.0 * std::sqrt(0.02), 1e-15);
    for (std::uint64_t key = 0; key < 2000; ++key) {
        const double E = clock_draw(7, key, 1);
        for (double phi : {0.0, 0.5 * Pt, 1.01 * Pt, -1.01 * Pt}) {
            const auto m = noise_membership(7, 8, key, u, 1.0, lam, phi);
            EXPECT_EQ(m.E, E);
            EXPECT_EQ(m.in_A, E > Et || std::abs(phi) > Pt);
            EXPECT_TRUE(m.in_B);
        }
    }
    // P(x not in A_u) <= (16/sqrt(pi)) (u lam)^{3/2} with phi a standard normal
    const double uu = 0.05;
    const std::uint64_t N = 1000000;
    std::uint64_t out = 0, marked = 0;
    for (std::uint64_t key = 0; key < N; ++key) {
        const auto m = noise_membership(9, 10, key, uu, 0.3, 1.0, keyed_normal(derive_key(11, Purpose::field, key)));
        out += !m.in_A;
        marked += m.in_B;
    }
    EXPECT_LE(static_cast<double>(out) / N, 16.0 / std::sqrt(M_PI) * std::pow(uu, 1.5));
    const double pa = (1.0 - std::exp(-4.0 * uu)) * std::erf(2.0 * std::sqrt(2.0 * uu) / std::sqrt(2.0));
    EXPECT_NEAR(static_cast<double>(out) / N, pa, 4.0 * std::sqrt(pa / N));
    EXPECT_NEAR(static_cast<double>(marked) / N, 0.3, 4.0 * std::sqrt(0.21 / N));
}

TEST(WatershedTest, AssembledTreeHasTheGaltonWatsonLaw)
{
    const auto spec = OffspringSpec::iid_law({0, 0.5, 0.5}, 0.5, 2.0);
    const LawBounds b = law_bounds(spec);
    GoodnessParams P = default_goodness_params(spec, b, 5, 0.5);
    const std::uint64_t N = 2000;
    const int D = 3;
    std::vector<std::vector<int>> zw(D), zg(D);
    std::vector<double> first;
    for (std::uint64_t n = 0; n < N; ++n) {
        FreePointTree F(spec, b, P, derive_key(12, Purpose::misc, n));
        const auto Z = F.generation_sizes(D);
        const auto G = gw_generations(spec, derive_key(13, Purpose::tree, n), D);
        for (int d = 0; d < D; ++d) {
            zw[static_cast<std::size_t>(d)].push_back(static_cast<int>(std::min<std::uint64_t>(Z[d], 6)));
            zg[static_cast<std::size_t>(d)].push_back(static_cast<int>(std::min<std::uint64_t>(G[d], 6)));
        }
        for (double l : F.offspring(NodeId{}))
            first.push_back(l);
        // root convention and shared-edge equality
        EXPECT_EQ(F.at(0).lamF, F.root_weights()[0]);
        for (std::size_t i = 1; i < F.size(); ++i) {
            const FreePoint& p = F.at(static_cast<int>(i));
            const auto lam = F.offspring(p.anchor.parent());
            ASSERT_GE(lam.size(), p.anchor.last());
            EXPECT_EQ(lam[p.anchor.last() - 1], p.lamF);
        }
    }
    for (int d = 0; d < D; ++d) {
        const auto [a, g] = aligned(zw[static_cast<std::size_t>(d)], zg[static_cast<std::size_t>(d)]);
        EXPECT_GT(chi2_homogeneity(a, g).p, 0.01) << "generation " << d + 1;
    }
    EXPECT_GT(ks_one_sample(first, [](double x) { return std::clamp((x - 0.5) / 1.5, 0.0, 1.0); }).p, 0.01);
}

TEST(WatershedTest, GreenBoundOnBinaryUnitTree)
{
    const auto bin = OffspringSpec::unit_law({0, 0, 1});
    GoodnessParams P;
    P.L = 4;
    P.C_g = 2.0;
    P.C_Lambda = 2.0;
    P.c_lambda = 0.5;
    P.u_tilde = 0.3;
    FreePointTree F(bin, law_bounds(bin), P, 3);
    F.grow(20);
    int evaluated = 0;
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (!F.at(static_cast<int>(i)).ws)
            continue;
        const Goodness& g = F.evaluate(static_cast<int>(i));
        ++evaluated;
        EXPECT_TRUE(g.g_a1.contains(1.0, 1e-9));
        if (F.at(static_cast<int>(i)).ws->free.size() >= 1)
            EXPECT_NE(g.ii, Tri::no);
    }
    EXPECT_GT(evaluated, 0);
}

TEST(WatershedTest, GoodPointsAreCoveredByInterlacements)
{
    const auto spec = OffspringSpec::iid_law({0, 0, 0.5, 0.5}, 0.5, 2.0);
    const LawBounds b = law_bounds(spec);
    const double u = 1.0;
    GoodnessParams P = default_goodness_params(spec, b, 16, 0.5);
    P.u_tilde = u * P.c_e();
    int good = 0;
    for (std::uint64_t n = 0; n < 30; ++n) {
        FreePointTree F(spec, b, P, derive_key(14, Purpose::misc, n));
        F.grow(20);
        const auto rep = couple_and_check(F, u);
        EXPECT_EQ(rep.violations, 0);
        good += rep.good;
        for (const auto& r : rep.records) {
            EXPECT_TRUE(r.gamma_ok && r.escape_ok && r.level_ok);
            EXPECT_GE(r.gamma_prime, 1u);
            EXPECT_TRUE(r.included);
            // (iii) keeps the first child and the parent of the anchor out of W
            const Watershed& ws = *F.at(r.point).ws;
            EXPECT_EQ(std::count(ws.W.begin(), ws.W.end(), TreeArena::kOuter), 0);
            if (ws.arena->sampled(0) && ws.arena->nchild(0) > 0)
                EXPECT_EQ(std::count(ws.W.begin(), ws.W.end(), ws.arena->child(0, 0)), 0);
        }
    }
    EXPECT_GT(good, 0);
    // at u = 0 nothing is good
    GoodnessParams Z = P;
    Z.u_tilde = 0.0;
    FreePointTree F0(spec, b, Z, 1);
    F0.grow(10);
    const auto rep0 = couple_and_check(F0, 0.0);
    EXPECT_EQ(rep0.good, 0);
    EXPECT_EQ(rep0.violations, 0);
}

TEST(WatershedTest, DriftBoundOnVeryGoodEdges)
{
    const auto spec = OffspringSpec::iid_law({0, 0, 1}, 0.5, 2.0);
    const LawBounds b = law_bounds(spec);
    const GoodnessParams P = default_goodness_params(spec, b, 16, 0.5);
    int edges = 0;
    for (std::uint64_t n = 0; n < 20; ++n) {
        FreePointTree F(spec, b, P, n);
        F.grow(40);
        const auto d = drift_check(F);
        EXPECT_EQ(d.violations, 0);
        EXPECT_NEAR(d.bound, P.c_lambda_bar * P.c_L / (2.0 * P.C_Lambda_bar), 1e-15);
        edges += d.edges;
    }
    EXPECT_GT(edges, 0);
    // series law by hand: up path 1, down path (1, 1) gives (1/2)/(1 + 1/2)
    EXPECT_NEAR(drift_ratio({1.0}, {1.0, 1.0}), 1.0 / 3.0, 1e-15);
}
