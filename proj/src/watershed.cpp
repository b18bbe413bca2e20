#include "treeperc/watershed.hpp"

#include "treeperc/interlace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace treeperc {

bool Watershed::visited_before_VL(int i) const
{
    if (walk.V_L < 0)
        return false;
    const auto n = std::min<std::size_t>(walk.path.steps.size(), static_cast<std::size_t>(walk.V_L) + 1);
    for (std::size_t k = 0; k < n; ++k)
        if (walk.path.steps[k] == i)
            return true;
    return false;
}

namespace {

void finish(Watershed& ws)
{
    std::unordered_set<int> seen;
    for (int y : ws.walk.path.steps)
        if (y != TreeArena::kOuter && seen.insert(y).second)
            ws.order.push_back(y);
    if (ws.walk.V_L >= 0) {
        std::unordered_set<int> inW;
        for (std::int64_t k = 0; k < ws.walk.V_L; ++k) {
            const int y = ws.walk.path.steps[static_cast<std::size_t>(k)];
            if (inW.insert(y).second)
                ws.W.push_back(y);
        }
    }
    ws.free = free_points(ws);
}

WalkOptions walk_options(Watershed& ws, const WatershedOptions& opt)
{
    WalkOptions wo;
    wo.cap = opt.cap;
    wo.record_steps = true;
    wo.pot = ws.pot.get();
    wo.decide_below = opt.decide_below;
    wo.max_level = opt.max_level;
    return wo;
}

void check_start(const NodeId& x, double kappa, int L)
{
    if (x.is_root())
        throw ContractViolation("watershed: the root is excluded as a start");
    if (!(kappa > 0.0))
        throw std::invalid_argument("watershed: kappa must be positive");
    if (L < 1)
        throw std::invalid_argument("watershed: L must be at least 1");
}

} // namespace

Watershed run_watershed(const OffspringSpec& spec, const LawBounds& bounds, const NodeId& x, double kappa, int L,
                        std::uint64_t seed, const WatershedOptions& opt)
{
    check_start(x, kappa, L);
    Watershed ws;
    ws.start = x;
    ws.kappa = kappa;
    ws.L = L;
    ws.from_streams = true;
    ws.arena = std::make_unique<TreeArena>(spec, derive_key(seed, Purpose::ends), x, kappa);
    ws.pot = std::make_unique<Potential>(*ws.arena, bounds, opt.potential);
    WalkOptions wo = walk_options(ws, opt);
    wo.first_visit = [&](int, std::size_t k) {
        if (ws.streams.size() < k)
            ws.streams.resize(k);
        Stream s(derive_key(seed, Purpose::ws_stream, k));
        ws.streams[k - 1] = spec.sample(s);
        return ws.streams[k - 1];
    };
    Stream s(derive_key(seed, Purpose::ws_walk));
    ws.walk = run_until(*ws.arena, 0, StopRule::watershed_time(L), s, wo);
    finish(ws);
    return ws;
}

Watershed direct_watershed(const OffspringSpec& spec, const LawBounds& bounds, const NodeId& x, double kappa,
                           int L, std::uint64_t seed, const WatershedOptions& opt)
{
    check_start(x, kappa, L);
    Watershed ws;
    ws.start = x;
    ws.kappa = kappa;
    ws.L = L;
    ws.arena = std::make_unique<TreeArena>(spec, derive_key(seed, Purpose::tree), x, kappa);
    ws.pot = std::make_unique<Potential>(*ws.arena, bounds, opt.potential);
    const WalkOptions wo = walk_options(ws, opt);
    Stream s(derive_key(seed, Purpose::ws_walk));
    ws.walk = run_until(*ws.arena, 0, StopRule::watershed_time(L), s, wo);
    finish(ws);
    return ws;
}

std::vector<int> free_points(const Watershed& ws)
{
    std::vector<int> out;
    if (ws.walk.V_L < 0)
        return out;
    const TreeArena& t = *ws.arena;
    std::unordered_set<int> inW(ws.W.begin(), ws.W.end());
    std::vector<int> T{t.root()};
    for (int y : ws.W)
        for (unsigned k = 0; k < t.nchild(y); ++k)
            T.push_back(t.child(y, k));
    std::unordered_set<int> done;
    for (int v : T)
        if (!inW.count(v) && v != ws.walk.X_VL && done.insert(v).second)
            out.push_back(v);
    std::sort(out.begin(), out.end(), [&](int a, int b) { return t.relative_id(a) < t.relative_id(b); });
    return out;
}

bool stream_identity(const Watershed& ws)
{
    if (!ws.from_streams || ws.W.empty())
        return true;
    const TreeArena& t = *ws.arena;
    auto kids = [&](int y) {
        std::vector<double> v;
        for (unsigned k = 0; k < t.nchild(y); ++k)
            v.push_back(t.lam_parent(t.child(y, k)));
        return v;
    };
    if (ws.streams.empty() || kids(t.root()) != ws.streams[0])
        return false;
    if (!ws.reached_L())
        return true;
    std::vector<std::vector<double>> got, want;
    for (int y : ws.W)
        if (y != t.root())
            got.push_back(kids(y));
    for (int k = 2; k <= ws.L - 1; ++k) {
        if (static_cast<std::size_t>(k) > ws.streams.size())
            return false;
        want.push_back(ws.streams[static_cast<std::size_t>(k - 1)]);
    }
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    return got == want;
}

int watershed_summary(const Watershed& ws)
{
    int o = 3;
    switch (ws.walk.outcome) {
    case Outcome::hit_parent:
        o = 0;
        break;
    case Outcome::stopped:
        o = 1;
        break;
    case Outcome::escaped:
        o = 2;
        break;
    default:
        break;
    }
    const int f = static_cast<int>(std::min<std::size_t>(ws.free.size(), 7));
    const int d = o == 0 ? static_cast<int>(std::min<std::size_t>(ws.order.size(), 9)) : 0;
    return o * 100 + f * 10 + d;
}

const char* tri_name(Tri t)
{
    switch (t) {
    case Tri::no:
        return "no";
    case Tri::yes:
        return "yes";
    case Tri::undecided:
        return "undecided";
    }
    return "?";
}

Tri tri_and(std::initializer_list<Tri> v)
{
    bool und = false;
    for (Tri t : v) {
        if (t == Tri::no)
            return Tri::no;
        if (t == Tri::undecided)
            und = true;
    }
    return und ? Tri::undecided : Tri::yes;
}

void GoodnessParams::validate() const
{
    if (L < 2)
        throw ConfigError("goodness: L must be at least 2");
    if (!(c_f > 0.0 && c_f <= 1.0))
        throw ConfigError("goodness: c_f must lie in (0,1]");
    if (!(B > 0.0 && c_lambda > 0.0 && C_Lambda > 0.0 && C_g > 0.0 && c_L > 0.0 && u_tilde >= 0.0))
        throw ConfigError("goodness: constants must be positive");
}

GoodnessParams default_goodness_params(const OffspringSpec& spec, const LawBounds& bounds, int L, double u_tilde,
                                       std::uint64_t seed, int samples)
{
    GoodnessParams p;
    p.L = L;
    p.u_tilde = u_tilde;
    p.c_lambda = 0.5 * spec.lambda_min();
    p.C_Lambda = spec.lambda_plus_max();
    p.c_lambda_bar = spec.lambda_min();
    p.C_Lambda_bar = spec.lambda_max();
    p.c_f = (1.0 - spec.mass(1)) / 4.0;
    {
        double m = 0.0;
        int k = 0;
        for (int s = 0; s < 4096; ++s) {
            Stream st(derive_key(seed, Purpose::misc, 0xb, static_cast<std::uint64_t>(s)));
            const std::vector<double> up = spec.sample(st);
            if (up.empty())
                continue;
            const double kappa = up[st.below(up.size())];
            double plus = 0.0;
            for (double l : spec.sample(st))
                plus += l;
            m += std::pow(kappa + plus, 1.5);
            ++k;
        }
        if (k > 0)
            p.B = 2.0 * m / k / std::sqrt(static_cast<double>(L));
    }
    std::vector<double> g;
    for (int s = 0; s < samples; ++s) {
        TreeArena t(spec, derive_key(seed, Purpose::misc, static_cast<std::uint64_t>(s)));
        PotentialOptions o;
        o.D0 = 8;
        o.max_depth = 8;
        o.work_budget = 200'000;
        Potential pot(t, bounds, o);
        g.push_back(reciprocal(pot.c_down_level(t.root(), 0)).mid());
    }
    std::sort(g.begin(), g.end());
    if (!g.empty())
        p.C_g = 2.0 * (g.size() % 2 ? g[g.size() / 2] : 0.5 * (g[g.size() / 2 - 1] + g[g.size() / 2]));
    return p;
}

FreePointTree::FreePointTree(OffspringSpec spec, LawBounds bounds, GoodnessParams params, std::uint64_t seed,
                             WatershedOptions opt)
    : spec_(std::move(spec)), bounds_(bounds), params_(params), seed_(seed), opt_(opt)
{
    params_.validate();
    if (spec_.mass(0) > 0.0)
        throw ConfigError("free point tree: the offspring law must have mu(0) = 0");
    Stream s(derive_key(seed_, Purpose::free_root));
    root_w_ = spec_.sample(s);
    root_ends_ = std::make_unique<TreeArena>(spec_, derive_key(seed_, Purpose::ends), NodeId{}, 0.0);
    root_ends_->attach_children(0, root_w_);
    FreePoint r;
    r.a = NodeId{};
    r.anchor = NodeId{1};
    r.lamF = root_w_.at(0);
    r.gamma = Stream(derive_key(seed_, Purpose::gamma, node_key(seed_, r.a))).poisson(params_.u_tilde);
    anchors_[r.anchor] = 0;
    pts_.push_back(std::move(r));
}

void FreePointTree::grow_point(int i)
{
    if (pts_[static_cast<std::size_t>(i)].ws)
        return;
    const NodeId a = pts_[static_cast<std::size_t>(i)].a;
    const std::uint64_t sa = node_key(derive_key(seed_, Purpose::coupling), a);
    auto ws = std::make_unique<Watershed>(run_watershed(spec_, bounds_, pts_[static_cast<std::size_t>(i)].anchor,
                                                        pts_[static_cast<std::size_t>(i)].lamF, params_.L, sa, opt_));
    std::vector<FreePoint> kids;
    for (std::size_t j = 0; j < ws->free.size(); ++j) {
        const int v = ws->free[j];
        if (j == 0)
            continue;
        FreePoint c;
        c.a = a.child(static_cast<std::uint32_t>(j + 1));
        c.anchor = ws->arena->id(v);
        c.parent = i;
        c.lamF = ws->arena->lam_parent(v);
        c.gamma = Stream(derive_key(seed_, Purpose::gamma, node_key(seed_, c.a))).poisson(params_.u_tilde);
        kids.push_back(std::move(c));
    }
    FreePoint& p = pts_[static_cast<std::size_t>(i)];
    if (!ws->free.empty()) {
        p.reserved = ws->arena->id(ws->free[0]);
        p.has_reserved = true;
    }
    p.ws = std::move(ws);
    ++grown_;
    for (auto& c : kids) {
        const int idx = static_cast<int>(pts_.size());
        anchors_[c.anchor] = idx;
        pts_[static_cast<std::size_t>(i)].children.push_back(idx);
        pts_.push_back(std::move(c));
    }
}

bool FreePointTree::grow(std::size_t budget)
{
    while (grown_ < budget) {
        while (next_ < pts_.size() && pts_[next_].ws)
            ++next_;
        if (next_ >= pts_.size())
            return true;
        grow_point(static_cast<int>(next_));
    }
    return frontier().empty();
}

std::vector<int> FreePointTree::frontier() const
{
    std::vector<int> f;
    for (std::size_t i = 0; i < pts_.size(); ++i)
        if (!pts_[i].ws)
            f.push_back(static_cast<int>(i));
    return f;
}

int FreePointTree::deepest_anchor(const NodeId& v) const
{
    std::vector<std::uint32_t> w = v.word();
    for (;;) {
        auto it = anchors_.find(NodeId(w));
        if (it != anchors_.end())
            return it->second;
        if (w.empty())
            return -1;
        w.pop_back();
    }
}

std::vector<double> FreePointTree::offspring(const NodeId& v)
{
    if (v.is_root())
        return root_w_;
    auto kids = [](TreeArena& t, int idx) {
        t.ensure_children(idx);
        std::vector<double> out;
        for (unsigned k = 0; k < t.nchild(idx); ++k)
            out.push_back(t.lam_parent(t.child(idx, k)));
        return out;
    };
    for (;;) {
        const int a = deepest_anchor(v);
        if (a < 0) {
            const int idx = root_ends_->find(v, true);
            if (idx < 0)
                throw std::out_of_range("T^W: vertex " + v.str() + " is not in the tree");
            return kids(*root_ends_, idx);
        }
        if (!pts_[static_cast<std::size_t>(a)].ws) {
            grow_point(a);
            continue;
        }
        TreeArena& t = *pts_[static_cast<std::size_t>(a)].ws->arena;
        const int idx = t.find(v, true);
        if (idx < 0)
            throw std::out_of_range("T^W: vertex " + v.str() + " is not in the tree");
        return kids(t, idx);
    }
}

std::vector<std::uint64_t> FreePointTree::generation_sizes(int D)
{
    std::vector<std::uint64_t> Z;
    std::vector<NodeId> gen{NodeId{}};
    for (int d = 1; d <= D; ++d) {
        std::vector<NodeId> next;
        for (const auto& v : gen) {
            const std::size_t k = offspring(v).size();
            for (std::size_t j = 1; j <= k; ++j)
                next.push_back(v.child(static_cast<std::uint32_t>(j)));
        }
        Z.push_back(next.size());
        gen = std::move(next);
    }
    return Z;
}

const Goodness& FreePointTree::evaluate(int i)
{
    grow_point(i);
    FreePoint& p = pts_[static_cast<std::size_t>(i)];
    if (p.evaluated)
        return p.good;
    Goodness& g = p.good;
    Watershed& ws = *p.ws;
    TreeArena& t = *ws.arena;
    const GoodnessParams& P = params_;
    const int root = t.root();

    g.i = p.gamma >= 1 ? Tri::yes : Tri::no;

    // (ii): the anchor's offspring are the first stream, already drawn
    auto item_ii = [&](double c_lam, double C_Lam, Tri green) {
        if (t.nchild(root) < 2)
            return Tri::no;
        if (!(t.lam_parent(t.child(root, 0)) > c_lam) || !(t.lam_plus(root) <= C_Lam))
            return Tri::no;
        return green;
    };
    Tri green = Tri::no;
    if (t.nchild(root) >= 1) {
        const int a1 = t.child(root, 0);
        const double need = 1.0 / P.C_g; // g <= C_g iff C_down >= 1/C_g
        Bracket c{0.0, INFINITY};
        green = Tri::undecided;
        for (int level = 0; level <= ws.pot->max_level(); ++level) {
            const Bracket b = ws.pot->c_down_level(a1, level);
            c.lo = std::max(c.lo, b.lo);
            c.hi = std::min(c.hi, b.hi);
            c.certified = b.certified;
            c.converged = b.converged;
            if (c.hi < need) {
                green = Tri::no;
                break;
            }
            if (c.lo >= need && c.certified) {
                green = Tri::yes;
                break;
            }
            if (c.width() <= P.tol)
                break;
        }
        g.g_a1 = reciprocal(c);
    }
    g.ii = item_ii(P.c_lambda, P.C_Lambda, green);
    g.ii_bar = item_ii(P.c_lambda_bar, P.C_Lambda_bar, green);

    // (iii): V_L < H_{a^-}, a^1 not hit, V~_L = infinity
    if (ws.outcome() == Outcome::undecided || ws.outcome() == Outcome::cap_exhausted)
        g.iii = Tri::undecided;
    else if (!ws.reached_L() || ws.outcome() != Outcome::escaped)
        g.iii = Tri::no;
    else if (t.nchild(root) >= 1 && ws.visited_before_VL(t.child(root, 0)))
        g.iii = Tri::no;
    else
        g.iii = Tri::yes;

    g.iv_count = 0;
    g.ivp_count = 0;
    for (int c : p.children) {
        if (pts_[static_cast<std::size_t>(c)].lamF <= P.C_Lambda)
            ++g.iv_count;
        if (anchor_distance(c) >= P.c_L * P.L)
            ++g.ivp_count;
    }
    g.iv = g.iv_count >= P.c_f * P.L ? Tri::yes : Tri::no;
    g.ivp = g.ivp_count >= P.c_f * P.L / 2.0 ? Tri::yes : Tri::no;

    double s = 0.0;
    for (int y : ws.W)
        s += std::pow(t.lambda(y), 1.5);
    g.v_value = s / std::pow(static_cast<double>(P.L), 1.5);
    g.v = ws.W.empty() ? Tri::no : (g.v_value < P.B ? Tri::yes : Tri::no);

    if (g.iii == Tri::yes) {
        for (int y : ws.W)
            if (y == t.child(root, 0))
                throw ContractViolation("goodness: (iii) holds but the first child lies in W");
        if (ws.walk.path.visits.count(TreeArena::kOuter))
            throw ContractViolation("goodness: (iii) holds but the walk hit the parent");
    }
    p.evaluated = true;
    return g;
}

int FreePointTree::anchor_distance(int i) const
{
    const FreePoint& p = pts_[static_cast<std::size_t>(i)];
    if (p.parent < 0)
        return -1;
    return static_cast<int>(p.anchor.depth() - pts_[static_cast<std::size_t>(p.parent)].anchor.depth());
}

std::vector<double> FreePointTree::path_conductances(int from, int to) const
{
    const FreePoint& f = pts_[static_cast<std::size_t>(from)];
    if (!f.ws)
        throw ContractViolation("path_conductances: watershed not grown");
    TreeArena& t = *f.ws->arena;
    const int idx = t.find(pts_[static_cast<std::size_t>(to)].anchor, false);
    if (idx < 0)
        throw ContractViolation("path_conductances: anchor outside the watershed");
    std::vector<double> out;
    for (int z = idx; z != t.root(); z = t.parent(z))
        out.push_back(t.lam_parent(z));
    std::reverse(out.begin(), out.end());
    return out;
}

CouplingReport couple_and_check(FreePointTree& F, double u)
{
    const GoodnessParams& P = F.params();
    if (P.u_tilde > u * P.c_e() * (1.0 + 1e-12))
        throw std::invalid_argument("couple_and_check: needs u_tilde <= u c_e");
    CouplingReport rep;
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (!F.at(static_cast<int>(i)).ws)
            continue;
        const Goodness& g = F.evaluate(static_cast<int>(i));
        const Tri good = g.good();
        if (good == Tri::undecided)
            ++rep.undecided;
        if (good != Tri::yes)
            continue;
        ++rep.good;
        FreePoint& p = F.at(static_cast<int>(i));
        const Watershed& ws = *p.ws;
        const TreeArena& t = *ws.arena;
        CouplingRecord r;
        r.point = static_cast<int>(i);
        r.gamma_ok = p.gamma >= 1;
        r.escape_ok = ws.outcome() == Outcome::escaped && ws.reached_L();
        // e_{{a^},T_a^}(a^) >= series(lam_{a^,a^1}, C_down(a^1))
        const double lam1 = t.lam_parent(t.child(t.root(), 0));
        r.e_lower = series(lam1, 1.0 / g.g_a1.hi);
        r.level_ok = u * r.e_lower >= P.u_tilde;
        // thinning: the watershed walk never hits a^- and is the first of the
        // Gamma_a^ trajectories, so Gamma'_a^ >= 1
        r.gamma_prime = r.gamma_ok && r.escape_ok && r.level_ok ? 1 : 0;
        std::unordered_set<int> trace(ws.walk.path.steps.begin(), ws.walk.path.steps.end());
        r.included = r.gamma_prime >= 1;
        for (int y : ws.W)
            if (!trace.count(y))
                r.included = false;
        if (!(r.gamma_ok && r.escape_ok && r.level_ok && r.included))
            ++rep.violations;
        rep.records.push_back(r);
    }
    return rep;
}

NoiseMembership noise_membership(std::uint64_t clock_seed, std::uint64_t mark_seed, std::uint64_t key, double u,
                                 double p, double lam_x, double phi_x)
{
    NoiseMembership m;
    m.E = clock_draw(clock_seed, key, 1);
    m.in_A = m.E > 4.0 * u * lam_x || std::abs(phi_x) > 2.0 * std::sqrt(2.0 * u);
    m.in_B = keyed_uniform(derive_key(mark_seed, Purpose::mark, key)) < p;
    return m;
}

double drift_ratio(const std::vector<double>& up_path, const std::vector<double>& down_path)
{
    auto cond = [](const std::vector<double>& p) {
        double r = 0.0;
        for (double l : p)
            r += 1.0 / l;
        return 1.0 / r;
    };
    const double c_up = cond(up_path), c_dn = cond(down_path);
    return c_dn / (c_up + c_dn);
}

DriftCheck drift_check(FreePointTree& F)
{
    const GoodnessParams& P = F.params();
    DriftCheck d;
    d.bound = P.c_lambda_bar * P.c_L / (2.0 * P.C_Lambda_bar);
    const double need = P.c_L * P.L;
    for (std::size_t i = 0; i < F.size(); ++i) {
        const int a = static_cast<int>(i);
        if (!F.at(a).ws || F.at(a).parent < 0)
            continue;
        if (F.evaluate(a).very_good() != Tri::yes || F.anchor_distance(a) < need)
            continue;
        const std::vector<double> up = F.path_conductances(F.at(a).parent, a);
        for (int c : F.at(a).children) {
            if (F.anchor_distance(c) < need)
                continue;
            const double r = drift_ratio(up, F.path_conductances(a, c));
            ++d.edges;
            d.min_ratio = std::min(d.min_ratio, r);
            if (r < d.bound)
                ++d.violations;
        }
    }
    return d;
}

} // namespace treeperc
