#include "treeperc/isocheck.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/tree.hpp"

#include <gtest/gtest.h>

using namespace treeperc;

namespace {

const OffspringSpec kBinary = OffspringSpec::unit_law({0, 0, 1});

} // namespace

TEST(IsocheckTest, ZeroLevelIsIdentical)
{
    TreeArena t(kBinary, 1);
    Potential pot(t);
    IsoOptions o;
    o.power_check = false;
    int low = 0;
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
        const auto r = marginal_identity_test(pot, 0.0, {0}, 4000, derive_key(1, Purpose::replica, rep), o);
        low += r.ks[0].p < 0.01;
    }
    EXPECT_LE(low, 1);
}

TEST(IsocheckTest, MarginalIdentityOnBinaryTree)
{
    TreeArena t(kBinary, 2);
    Potential pot(t);
    t.ensure_children(0);
    IsoOptions o;
    o.energy_n = 600;
    o.permutations = 99;
    const auto r = marginal_identity_test(pot, 0.5, {0, t.child(0, 0)}, 20000, 2, o);
    ASSERT_EQ(r.ks.size(), 2u);
    for (const auto& k : r.ks) {
        EXPECT_LT(k.stat, 0.02);
        EXPECT_GT(k.p, 0.001);
    }
    ASSERT_TRUE(r.has_pair);
    EXPECT_GT(r.pair.p, 0.001);
    ASSERT_TRUE(r.has_power);
    EXPECT_LT(r.power.p, 1e-3);
    EXPECT_EQ(r.flagged, 0);
}

TEST(IsocheckTest, SignInclusionHasNoViolations)
{
    TreeArena t(kBinary, 3);
    Potential pot(t);
    const auto r = sign_inclusion_check(pot, 0.2, 0.9, 2, 2000, 3);
    EXPECT_GT(r.occupied, 0u);
    EXPECT_GT(r.sign_checked, 0u);
    EXPECT_EQ(r.sign_violations, 0u);
    EXPECT_EQ(r.clock_violations, 0u);
    EXPECT_THROW(sign_inclusion_check(pot, 0.0, 0.9, 2, 10, 3), std::invalid_argument);
}
