#include "treeperc/interlace.hpp"

#include "treeperc/gff.hpp"
#include "treeperc/walk.hpp"

#include <cmath>
#include <stdexcept>

namespace treeperc {

double clock_draw(std::uint64_t seed, std::uint64_t key, std::uint64_t k)
{
    return keyed_exponential(derive_key(seed, Purpose::clock, key), k);
}

std::int64_t poisson_inversion(const std::function<Bracket(int)>& mean, double u, int max_level)
{
    double lo = 0.0, hi = INFINITY;
    for (int level = 0; level <= max_level; ++level) {
        const Bracket b = mean(level);
        lo = std::max(lo, b.lo);
        hi = std::min(hi, b.hi);
        if (!(hi < INFINITY))
            continue;
        // CDF_k(m) is decreasing in m: index k is certain once
        // CDF_{k-1}(lo) <= u < CDF_k(hi).
        double plo = std::exp(-lo), phi = std::exp(-hi);
        double Flo = plo, Fhi = phi, prev_lo = 0.0;
        for (std::int64_t k = 0; k < 100000; ++k) {
            if (u < Fhi)
                return u >= prev_lo ? k : -1;
            if (u < Flo)
                break; // u falls between the two CDFs: refine
            prev_lo = Flo;
            plo *= lo / static_cast<double>(k + 1);
            phi *= hi / static_cast<double>(k + 1);
            Flo += plo;
            Fhi += phi;
        }
    }
    return -1;
}

LazyInterlacement::LazyInterlacement(Potential& pot, double u, int D, std::uint64_t seed, InterlaceOptions opt)
    : pot_(pot), u_(u), D_(D), seed_(seed), opt_(opt)
{
    if (!(u >= 0.0))
        throw std::invalid_argument("interlacements: u must be nonnegative");
    if (D < 0)
        throw std::invalid_argument("interlacements: window depth must be nonnegative");
    if (pot.tree().has_outer())
        throw ContractViolation("interlacements: the arena root must be the tree root");
}

void LazyInterlacement::ensure(int y)
{
    TreeArena& t = pot_.tree();
    if (static_cast<int>(t.depth(y)) > D_)
        throw ContractViolation("interlacements: vertex outside the window");
    std::vector<int> chain;
    for (int z = y; z != TreeArena::kOuter; z = t.parent(z))
        if (!generated_.count(z))
            chain.push_back(z);
    for (std::size_t i = chain.size(); i-- > 0;)
        generate(chain[i]);
}

bool LazyInterlacement::occupied(int y) { return visits(y) > 0; }

std::uint64_t LazyInterlacement::visits(int y)
{
    ensure(y);
    auto it = visits_.find(y);
    return it == visits_.end() ? 0 : it->second;
}

double LazyInterlacement::local_time(int y)
{
    const std::uint64_t n = visits(y);
    if (n == 0)
        return 0.0;
    pot_.tree().ensure_children(y);
    const std::uint64_t key = pot_.tree().at(y).key;
    double s = 0.0;
    for (std::uint64_t k = 1; k <= n; ++k)
        s += clock_draw(seed_, key, k);
    return s / pot_.tree().lambda(y);
}

std::uint64_t LazyInterlacement::gamma(int x)
{
    ensure(x);
    return gamma_[x];
}

bool LazyInterlacement::simulate_part(int x, bool backward, Stream& s, std::vector<int>& trace, bool& flagged)
{
    TreeArena& t = pot_.tree();
    const int xm = t.parent(x);
    WalkOptions wo;
    wo.pot = &pot_;
    wo.decide_below = opt_.decide_below;
    wo.max_level = opt_.max_level;
    wo.record_steps = false;
    wo.cap = opt_.cap;
    int pos = x;
    if (!backward)
        trace.push_back(x);
    for (std::uint64_t n = 0;; ++n) {
        if (n >= opt_.cap) {
            flagged = true;
            return true;
        }
        int y = step(t, pos, s);
        if (y == xm)
            return false;
        if (static_cast<int>(t.depth(y)) > D_) {
            const WalkResult r = run_until(t, y, StopRule::hitting({pos}), s, wo);
            if (r.outcome == Outcome::escaped)
                return true;
            if (r.outcome != Outcome::stopped) {
                flagged = true;
                return true;
            }
            y = pos;
        }
        if (backward && y == x)
            return false;
        trace.push_back(y);
        pos = y;
    }
}

void LazyInterlacement::generate(int z)
{
    generated_.insert(z);
    TreeArena& t = pot_.tree();
    const std::uint64_t key = t.at(z).key;
    std::uint64_t g = 0;
    if (u_ > 0.0) {
        Stream labels(derive_key(seed_, Purpose::gamma, key));
        double S = 0.0;
        for (;;) {
            S += labels.exponential();
            // label S/e_check(z) <= u
            double lo = 0.0, hi = INFINITY;
            int in = -1;
            for (int level = 0; level <= opt_.max_level && in < 0; ++level) {
                const Bracket b = pot_.e_check_level(z, level);
                lo = std::max(lo, u_ * b.lo);
                hi = std::min(hi, u_ * b.hi);
                if (S <= lo)
                    in = 1;
                else if (S > hi)
                    in = 0;
            }
            if (in < 0)
                throw UnconvergedError("interlacements: trajectory label undecided at " + t.id(z).str());
            if (!in)
                break;
            ++g;
            for (int part = 0; part < 2; ++part) {
                const bool backward = part == 1;
                Piece pc;
                pc.start = z;
                pc.index = g;
                pc.backward = backward;
                for (;;) {
                    if (pc.attempts >= opt_.max_attempts)
                        throw std::runtime_error("interlacements: rejection budget exhausted at " + t.id(z).str());
                    Stream s(derive_key(seed_, Purpose::walk, key, 2 * g + part), pc.attempts++);
                    pc.trace.clear();
                    pc.flagged = false;
                    if (simulate_part(z, backward, s, pc.trace, pc.flagged))
                        break;
                }
                for (int v : pc.trace) {
                    if (v == t.parent(z))
                        throw ContractViolation("interlacements: trajectory part visits the parent of its start");
                    ++visits_[v];
                }
                if (pc.flagged)
                    ++flagged_;
                if (opt_.keep_pieces)
                    pieces_.push_back(std::move(pc));
            }
        }
    }
    gamma_[z] = g;
}

InterlacementRealization sample_interlacements(Potential& pot, double u, int D, std::uint64_t seed,
                                               const InterlaceOptions& opt)
{
    LazyInterlacement I(pot, u, D, seed, opt);
    InterlacementRealization r;
    r.u = u;
    r.D = D;
    r.window = ball(pot.tree(), D);
    for (int x : r.window)
        r.gamma[x] = I.gamma(x);
    for (int x : r.window) {
        const std::uint64_t n = I.visits(x);
        if (n > 0) {
            r.visits[x] = n;
            r.local[x] = I.local_time(x);
        }
    }
    r.pieces = I.pieces();
    r.flagged = I.flagged();
    return r;
}

namespace {

template <class Open>
ClusterSample explore_root_cluster(TreeArena& t, std::size_t max_size, Open open)
{
    ClusterSample c;
    if (!open(t.root()))
        return c;
    c.nodes.push_back(t.root());
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        const int x = c.nodes[i];
        t.ensure_children(x);
        for (unsigned k = 0; k < t.nchild(x); ++k) {
            const int y = t.child(x, k);
            if (!open(y))
                continue;
            c.nodes.push_back(y);
            if (c.nodes.size() > max_size) {
                c.truncated = true;
                return c;
            }
        }
    }
    return c;
}

} // namespace

ClusterSample vacant_cluster_bernoulli(Potential& pot, double u, std::uint64_t seed, std::size_t max_size,
                                       int max_level)
{
    TreeArena& t = pot.tree();
    auto open = [&](int x) {
        const double v = keyed_uniform(derive_key(seed, Purpose::mark, t.at(x).key));
        auto prob = [&](int level) {
            const Bracket e = pot.e_check_level(x, level);
            return Bracket::of(std::exp(-u * e.hi), std::exp(-u * e.lo));
        };
        const BernoulliDecision d = exact_bernoulli(prob(0), prob, v, max_level);
        if (!d.decided)
            throw UnconvergedError("vacant cluster: opening undecided at " + t.id(x).str());
        return d.value;
    };
    return explore_root_cluster(t, max_size, open);
}

ClusterSample vacant_cluster_direct(LazyInterlacement& I, std::size_t max_size)
{
    if (static_cast<std::size_t>(I.depth()) < max_size)
        throw std::invalid_argument("vacant cluster: window shallower than the size cap");
    return explore_root_cluster(I.pot().tree(), max_size, [&](int x) { return !I.occupied(x); });
}

RayKnightSamples second_ray_knight_samples(Potential& pot, double u, const std::vector<int>& vertices,
                                           std::size_t N, std::uint64_t seed, double tol, double ell_scale)
{
    RayKnightSamples out;
    out.vertices = vertices;
    const std::size_t m = vertices.size();
    out.A.assign(m, std::vector<double>(N));
    out.B.assign(m, std::vector<double>(N));
    out.ell.assign(m, std::vector<double>(N));
    int D = 0;
    for (int v : vertices)
        D = std::max(D, static_cast<int>(pot.tree().depth(v)));
    LazyField phi(pot, 0, tol), phi2(pot, 0, tol);
    const double shift = std::sqrt(2.0 * u);
    for (std::size_t n = 0; n < N; ++n) {
        const std::uint64_t rs = derive_key(seed, Purpose::replica, n);
        LazyInterlacement I(pot, u, D, rs);
        phi.reseed(derive_key(rs, Purpose::field, 1));
        phi2.reseed(derive_key(rs, Purpose::field, 2));
        for (std::size_t j = 0; j < m; ++j) {
            const int x = vertices[j];
            const double l = I.local_time(x);
            const double a = phi(x), b = phi2(x) + shift;
            out.ell[j][n] = l;
            out.A[j][n] = ell_scale * l + 0.5 * a * a;
            out.B[j][n] = 0.5 * b * b;
        }
        out.flagged += I.flagged();
    }
    return out;
}

} // namespace treeperc
