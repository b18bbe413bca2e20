#include "treeperc/gff.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_set>

namespace treeperc {

std::vector<int> ball(TreeArena& t, int D)
{
    std::vector<int> out{t.root()};
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int x = out[i];
        if (static_cast<int>(t.depth(x)) >= D)
            continue;
        t.ensure_children(x);
        for (unsigned k = 0; k < t.nchild(x); ++k)
            out.push_back(t.child(x, k));
    }
    return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

LazyField::LazyField(Potential& pot, std::uint64_t seed, double tol, bool refuse_unconverged)
    : pot_(pot), seed_(seed), tol_(tol), refuse_(refuse_unconverged)
{
    if (pot.tree().has_outer())
        throw ContractViolation("LazyField: the arena root must be the tree root");
}

void LazyField::reseed(std::uint64_t seed)
{
    seed_ = seed;
    val_.clear();
}

double LazyField::normal(int x) const
{
    return keyed_normal(derive_key(seed_, Purpose::field, pot_.tree().at(x).key));
}

void LazyField::prepare(int x)
{
    if (coef_.size() <= static_cast<std::size_t>(x))
        coef_.resize(pot_.tree().size() + 256);
    auto& c = coef_[static_cast<std::size_t>(x)];
    if (c.ready)
        return;
    TreeArena& t = pot_.tree();
    const Bracket C = pot_.c_down(x, tol_);
    if (refuse_ && !C.converged)
        throw UnconvergedError("field: conductance bracket did not reach tolerance at " + t.id(x).str());
    if (x == t.root()) {
        c.var = reciprocal(C);
        c.pup = Bracket::exact(0.0);
    } else {
        const double k = t.lam_parent(x);
        c.var = reciprocal(C + Bracket::exact(k));
        c.pup = ratio_up(k, C);
    }
    max_width_ = std::max({max_width_, c.var.width(), c.pup.width()});
    c.ready = true;
}

Bracket LazyField::variance(int x)
{
    prepare(x);
    return coef_[static_cast<std::size_t>(x)].var;
}

Bracket LazyField::p_up(int x)
{
    prepare(x);
    return coef_[static_cast<std::size_t>(x)].pup;
}

double LazyField::operator()(int x)
{
    auto it = val_.find(x);
    if (it != val_.end())
        return it->second;
    std::vector<int> chain;
    int z = x;
    while (z != TreeArena::kOuter && !val_.count(z)) {
        chain.push_back(z);
        z = pot_.tree().parent(z);
    }
    double above = z == TreeArena::kOuter ? 0.0 : val_[z];
    for (std::size_t i = chain.size(); i-- > 0;) {
        const int y = chain[i];
        prepare(y);
        const auto& c = coef_[static_cast<std::size_t>(y)];
        const double v = c.pup.mid() * above + std::sqrt(c.var.mid()) * normal(y);
        val_[y] = v;
        above = v;
    }
    return val_[x];
}

FieldSample sample_field(Potential& pot, int D, double tol, std::uint64_t seed)
{
    if (!(tol > 0.0))
        throw std::invalid_argument("sample_field: tol must be positive");
    FieldSample f;
    f.seed = seed;
    f.D = D;
    f.tol = tol;
    f.window = ball(pot.tree(), D);
    LazyField field(pot, seed, tol);
    for (int x : f.window) {
        f.phi[x] = field(x);
        f.var[x] = field.variance(x);
    }
    f.bias_bound = field.max_width() * D;
    return f;
}

LevelSet level_set(const TreeArena& t, const FieldSample& f, double h)
{
    LevelSet s;
    s.h = h;
    std::unordered_set<int> in;
    for (int x : f.window)
        if (f.phi.at(x) >= h) {
            s.members.push_back(x);
            in.insert(x);
        }
    if (!in.count(t.root()))
        return s;
    s.root_cluster.push_back(t.root());
    for (std::size_t i = 0; i < s.root_cluster.size(); ++i) {
        const int x = s.root_cluster[i];
        if (!t.sampled(x))
            continue;
        for (unsigned k = 0; k < t.nchild(x); ++k) {
            const int c = t.child(x, k);
            if (in.count(c))
                s.root_cluster.push_back(c);
        }
    }
    return s;
}

double KilledGreen::at(int x, int y) const
{
    auto ix = pos.find(x), iy = pos.find(y);
    if (ix == pos.end() || iy == pos.end())
        return 0.0;
    return G(ix->second, iy->second);
}

namespace {

// Operator of the walk on the window minus K with everything outside the
// window reduced to leaks; `toK` collects the weights towards K.
struct WindowSystem {
    std::vector<int> nodes;
    std::unordered_map<int, int> pos;
    Eigen::MatrixXd M;
    std::vector<std::vector<std::pair<int, double>>> toK;
};

WindowSystem window_system(Potential& pot, const std::vector<int>& window, const std::vector<int>& K, double tol)
{
    TreeArena& t = pot.tree();
    std::unordered_set<int> inW(window.begin(), window.end());
    std::unordered_set<int> inK(K.begin(), K.end());
    for (int k : K)
        if (!inW.count(k))
            throw ContractViolation("killed_green: K must lie inside the window");
    WindowSystem s;
    for (int x : window)
        if (!inK.count(x)) {
            s.pos[x] = static_cast<int>(s.nodes.size());
            s.nodes.push_back(x);
        }
    const auto n = static_cast<Eigen::Index>(s.nodes.size());
    s.M = Eigen::MatrixXd::Zero(n, n);
    s.toK.resize(s.nodes.size());
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        const int z = s.nodes[i];
        const auto ii = static_cast<Eigen::Index>(i);
        t.ensure_children(z);
        double diag = 0.0;
        auto link = [&](int y, double lam) {
            if (inK.count(y)) {
                diag += lam;
                s.toK[i].emplace_back(y, lam);
            } else if (inW.count(y)) {
                diag += lam;
                s.M(ii, s.pos[y]) -= lam;
            } else {
                diag += series(lam, pot.c_down(y, tol).mid());
            }
        };
        if (t.lam_parent(z) > 0.0) {
            const int p = t.parent(z);
            if (p == TreeArena::kOuter || !inW.count(p)) {
                // the walk leaves upwards: conductance to infinity through the parent
                const Bracket up = pot.c_up(z, tol);
                diag += up.mid();
            } else {
                link(p, t.lam_parent(z));
            }
        }
        for (unsigned k = 0; k < t.nchild(z); ++k) {
            const int c = t.child(z, k);
            link(c, t.lam_parent(c));
        }
        s.M(ii, ii) += diag;
    }
    return s;
}

} // namespace

KilledGreen killed_green(Potential& pot, const std::vector<int>& window, const std::vector<int>& K, double tol)
{
    WindowSystem s = window_system(pot, window, K, tol);
    KilledGreen g;
    g.nodes = s.nodes;
    g.pos = s.pos;
    const auto n = static_cast<Eigen::Index>(s.nodes.size());
    g.G = s.M.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
    return g;
}

MarkovDecomposition markov_decompose(Potential& pot, const FieldSample& f, const std::vector<int>& K, double tol)
{
    MarkovDecomposition d;
    if (K.empty()) {
        for (int x : f.window) {
            d.beta[x] = 0.0;
            d.psi[x] = f.phi.at(x);
        }
        return d;
    }
    WindowSystem s = window_system(pot, f.window, K, tol);
    const auto n = static_cast<Eigen::Index>(s.nodes.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < s.nodes.size(); ++i)
        for (const auto& [k, lam] : s.toK[i])
            rhs(static_cast<Eigen::Index>(i)) += lam * f.phi.at(k);
    const Eigen::VectorXd beta = n > 0 ? Eigen::VectorXd(s.M.ldlt().solve(rhs)) : Eigen::VectorXd();
    for (int k : K) {
        d.beta[k] = f.phi.at(k);
        d.psi[k] = 0.0;
    }
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
        const int z = s.nodes[i];
        d.beta[z] = beta(static_cast<Eigen::Index>(i));
        d.psi[z] = f.phi.at(z) - d.beta[z];
    }
    return d;
}

WarmupResult warmup_criterion(const OffspringSpec& spec, double h, double M)
{
    if (h < 0.0 || !(M > 0.0))
        throw std::invalid_argument("warmup_criterion: needs h >= 0 and M > 0");
    WarmupResult r;
    r.value = spec.truncated_mean(M) * normal_cdf(-h * std::sqrt(2.0 * M));
    r.margin = r.value - 1.0;
    r.holds = r.value > 1.0;
    return r;
}

} // namespace treeperc
