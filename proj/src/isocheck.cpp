#include "treeperc/isocheck.hpp"

#include "treeperc/gff.hpp"
#include "treeperc/interlace.hpp"
#include "treeperc/watershed.hpp"

#include <cmath>
#include <stdexcept>

namespace treeperc {

IsoReport marginal_identity_test(Potential& pot, double u, const std::vector<int>& vertices, std::size_t N,
                                 std::uint64_t seed, const IsoOptions& opt)
{
    if (vertices.empty() || N == 0)
        throw std::invalid_argument("marginal_identity_test: needs vertices and samples");
    IsoReport r;
    r.u = u;
    r.N = N;
    r.vertices = vertices;
    const RayKnightSamples s = second_ray_knight_samples(pot, u, vertices, N, seed, opt.tol);
    r.flagged = s.flagged;
    for (std::size_t j = 0; j < vertices.size(); ++j)
        r.ks.push_back(ks_two_sample(s.A[j], s.B[j]));
    if (vertices.size() >= 2) {
        const std::size_t m = std::min(opt.energy_n, N);
        std::vector<std::array<double, 2>> a(m), b(m);
        // disjoint halves so that the two samples are independent
        for (std::size_t n = 0; n < m; ++n) {
            a[n] = {s.A[0][n], s.A[1][n]};
            const std::size_t k = N - 1 - n;
            b[n] = {s.B[0][k], s.B[1][k]};
        }
        r.has_pair = true;
        r.pair = energy_test(a, b, opt.permutations, seed);
    }
    if (opt.power_check) {
        const RayKnightSamples c =
            second_ray_knight_samples(pot, u, {vertices[0]}, N, seed, opt.tol, opt.power_scale);
        r.has_power = true;
        r.power = ks_two_sample(c.A[0], c.B[0]);
    }
    return r;
}

IsoReport sign_inclusion_check(Potential& pot, double u, double p, int D, std::size_t R, std::uint64_t seed,
                               double tol)
{
    if (!(u > 0.0))
        throw std::invalid_argument("sign_inclusion_check: u must be positive");
    IsoReport r;
    r.u = u;
    r.N = R;
    TreeArena& t = pot.tree();
    const std::vector<int> window = ball(t, D);
    r.vertices = window;
    const double s2u = std::sqrt(2.0 * u);
    LazyField phi(pot, 0, tol);
    for (std::size_t n = 0; n < R; ++n) {
        const std::uint64_t rs = derive_key(seed, Purpose::replica, n);
        LazyInterlacement I(pot, u, D, rs);
        phi.reseed(derive_key(rs, Purpose::field, 1));
        for (int x : window) {
            if (!I.occupied(x))
                continue;
            ++r.occupied;
            t.ensure_children(x);
            const std::uint64_t key = t.at(x).key;
            const double l = I.local_time(x);
            const double f = phi(x);
            const NoiseMembership m = noise_membership(I.seed(), rs, key, u, p, t.lambda(x), f);
            if (l < m.E / t.lambda(x))
                ++r.clock_violations;
            if (!m.in_A)
                continue;
            ++r.sign_checked;
            const double gamma = -s2u + std::sqrt(2.0 * l + f * f);
            if (!(gamma >= s2u))
                ++r.sign_violations;
        }
        r.flagged += I.flagged();
    }
    return r;
}

} // namespace treeperc
