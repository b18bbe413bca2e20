#include "treeperc/potential.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace treeperc {

BernoulliDecision exact_bernoulli(const Bracket& first, const std::function<Bracket(int)>& refine, double u,
                                  int max_level)
{
    BernoulliDecision d;
    Bracket b = first;
    for (int level = 0;; ++level) {
        if (u < b.lo) {
            d.value = true;
            d.decided = true;
            return d;
        }
        if (u >= b.hi) {
            d.value = false;
            d.decided = true;
            return d;
        }
        if (level >= max_level || !refine)
            return d;
        const Bracket r = refine(level + 1);
        b.lo = std::max(b.lo, r.lo);
        b.hi = std::min(b.hi, r.hi);
        ++d.refinements;
    }
}

Potential::Potential(TreeArena& tree, PotentialOptions opt)
    : Potential(tree, law_bounds(tree.spec()), opt)
{
}

Potential::Potential(TreeArena& tree, LawBounds bounds, PotentialOptions opt)
    : tree_(tree), bounds_(bounds), opt_(opt)
{
}

int Potential::level_depth(int level) const
{
    long d = static_cast<long>(opt_.D0) << std::min(level, 20);
    return static_cast<int>(std::min<long>(d, opt_.max_depth));
}

int Potential::max_level() const
{
    int k = 0;
    while (level_depth(k) < opt_.max_depth)
        ++k;
    return k;
}

Bracket Potential::frontier() const
{
    Bracket b{bounds_.floor, bounds_.ceil, 0, true, bounds_.certified || bounds_.exact()};
    return b;
}

Bracket Potential::virtual_c(std::uint64_t key, int D)
{
    if (bounds_.exact()) {
        Bracket b = Bracket::exact(bounds_.floor);
        b.depth = D;
        return b;
    }
    if (D <= 0)
        return frontier();
    if (++request_work_ > opt_.work_budget) {
        budget_hit_ = true;
        return frontier();
    }
    ++work_;
    const auto lam = tree_.keyed_offspring(key);
    Bracket sum = Bracket::exact(0.0);
    for (std::size_t k = 0; k < lam.size(); ++k)
        sum = sum + series(lam[k], virtual_c(child_key(key, static_cast<std::uint32_t>(k + 1)), D - 1));
    sum.depth = D;
    return sum;
}

Bracket Potential::c_down_rec(int x, int D)
{
    if (bounds_.exact() && !tree_.sampled(x)) {
        Bracket b = Bracket::exact(bounds_.floor);
        b.depth = D;
        return b;
    }
    if (D <= 0)
        return frontier();
    if (memo_.size() <= static_cast<std::size_t>(x))
        memo_.resize(tree_.size() + 1024);
    if (memo_[static_cast<std::size_t>(x)].depth >= D)
        return memo_[static_cast<std::size_t>(x)].b;
    if (!tree_.sampled(x)) {
        if (tree_.size() >= opt_.node_budget && !tree_.has_source())
            return virtual_c(tree_.at(x).key, D);
        tree_.sample_children(x);
    }
    if (++request_work_ > opt_.work_budget) {
        budget_hit_ = true;
        return frontier();
    }
    ++work_;
    Bracket sum = Bracket::exact(0.0);
    const unsigned n = tree_.nchild(x);
    for (unsigned k = 0; k < n; ++k) {
        const int c = tree_.child(x, k);
        sum = sum + series(tree_.lam_parent(c), c_down_rec(c, D - 1));
    }
    sum.depth = D;
    if (!budget_hit_) {
        if (memo_.size() <= static_cast<std::size_t>(x))
            memo_.resize(tree_.size() + 1024);
        memo_[static_cast<std::size_t>(x)] = Memo{D, sum};
    }
    return sum;
}

Bracket Potential::c_down_at(int x, int D)
{
    request_work_ = 0;
    budget_hit_ = false;
    if (tree_.size() < opt_.node_budget || tree_.has_source())
        tree_.ensure_children(x);
    Bracket b = c_down_rec(x, D);
    b.converged = !budget_hit_;
    return b;
}

Bracket Potential::c_down(int x, double tol)
{
    Bracket b;
    const int top = max_level();
    for (int level = 0; level <= top; ++level) {
        b = c_down_at(x, level_depth(level));
        if (b.width() <= tol) {
            b.converged = true;
            return b;
        }
        if (budget_hit_ || b.depth >= opt_.max_depth)
            break;
    }
    b.converged = false;
    return b;
}

namespace {

// Ancestors of x from the root (inclusive) down to x (inclusive).
std::vector<int> root_path(const TreeArena& t, int x)
{
    std::vector<int> p;
    for (int z = x; z != TreeArena::kOuter; z = t.parent(z))
        p.push_back(z);
    std::reverse(p.begin(), p.end());
    return p;
}

} // namespace

Bracket Potential::c_up(int x, double tol)
{
    const auto path = root_path(tree_, x);
    Bracket A = tree_.has_outer() ? Bracket::of(0.0, tree_.kappa()) : Bracket::exact(0.0);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const int p = path[i], c = path[i + 1];
        Bracket B = A;
        for (unsigned k = 0; k < tree_.nchild(p); ++k) {
            const int s = tree_.child(p, k);
            if (s != c)
                B = B + series(tree_.lam_parent(s), c_down(s, tol));
        }
        A = series(tree_.lam_parent(c), B);
    }
    return A;
}

Bracket Potential::c_up_level(int x, int level)
{
    const auto path = root_path(tree_, x);
    Bracket A = tree_.has_outer() ? Bracket::of(0.0, tree_.kappa()) : Bracket::exact(0.0);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const int p = path[i], c = path[i + 1];
        Bracket B = A;
        for (unsigned k = 0; k < tree_.nchild(p); ++k) {
            const int s = tree_.child(p, k);
            if (s != c)
                B = B + series(tree_.lam_parent(s), c_down_level(s, level));
        }
        A = series(tree_.lam_parent(c), B);
    }
    return A;
}

Bracket Potential::p_up(int x, double tol)
{
    const double k = tree_.lam_parent(x);
    if (k == 0.0)
        return Bracket::exact(0.0);
    return ratio_up(k, c_down(x, tol));
}

Bracket Potential::p_up_level(int x, int level)
{
    const double k = tree_.lam_parent(x);
    if (k == 0.0)
        return Bracket::exact(0.0);
    return ratio_up(k, c_down_level(x, level));
}

EscapeProbs Potential::escape_probs(int x, double tol)
{
    EscapeProbs e;
    const Bracket C = c_down(x, tol);
    const double lam = tree_.lambda(x);
    const double k = tree_.lam_parent(x);
    e.no_parent = k == 0.0 ? Bracket::exact(1.0) : ratio_down(k, C);
    e.no_return_no_parent = C;
    e.no_return_no_parent.lo = C.lo / lam;
    e.no_return_no_parent.hi = C.hi / lam;
    const Bracket tot = C + c_up(x, tol);
    e.no_return = tot;
    e.no_return.lo = tot.lo / lam;
    e.no_return.hi = tot.hi / lam;
    return e;
}

Bracket Potential::e_check(int x, double tol)
{
    const Bracket C = c_down(x, tol);
    const double k = tree_.lam_parent(x);
    if (k == 0.0)
        return C;
    Bracket r = C;
    r.lo = C.lo * C.lo / (C.lo + k);
    r.hi = C.hi * C.hi / (C.hi + k);
    return r;
}

Bracket Potential::e_check_level(int x, int level)
{
    const Bracket C = c_down_level(x, level);
    const double k = tree_.lam_parent(x);
    if (k == 0.0)
        return C;
    Bracket r = C;
    r.lo = C.lo * C.lo / (C.lo + k);
    r.hi = C.hi * C.hi / (C.hi + k);
    return r;
}

Bracket Potential::green_diag(int x, double tol) { return reciprocal(c_down(x, tol) + c_up(x, tol)); }

Bracket Potential::hit_prob(int x, int y, double tol)
{
    if (x == y)
        return Bracket::exact(1.0);
    const auto px = root_path(tree_, x);
    const auto py = root_path(tree_, y);
    std::size_t l = 0;
    while (l < px.size() && l < py.size() && px[l] == py[l])
        ++l;
    // px[l-1] is the lowest common ancestor
    Bracket prob = Bracket::exact(1.0);
    for (std::size_t i = px.size(); i-- > l;)
        prob = prob * p_up(px[i], tol);
    for (std::size_t i = l - 1; i + 1 < py.size(); ++i) {
        const int z = py[i], zc = py[i + 1];
        Bracket rest = c_up(z, tol);
        for (unsigned k = 0; k < tree_.nchild(z); ++k) {
            const int s = tree_.child(z, k);
            if (s != zc)
                rest = rest + series(tree_.lam_parent(s), c_down(s, tol));
        }
        prob = prob * ratio_up(tree_.lam_parent(zc), rest);
    }
    return prob;
}

Bracket Potential::green(int x, int y, double tol) { return hit_prob(x, y, tol) * green_diag(y, tol); }

double Potential::green_finite(const std::vector<int>& U, int x, int y)
{
    std::unordered_map<int, int> pos;
    for (std::size_t i = 0; i < U.size(); ++i)
        pos[U[i]] = static_cast<int>(i);
    if (!pos.count(x) || !pos.count(y))
        return 0.0;
    const auto n = static_cast<Eigen::Index>(U.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < U.size(); ++i) {
        const int z = U[i];
        tree_.ensure_children(z);
        M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = tree_.lambda(z);
        const int p = tree_.parent(z);
        if (p != TreeArena::kOuter) {
            auto it = pos.find(p);
            if (it != pos.end())
                M(static_cast<Eigen::Index>(i), it->second) -= tree_.lam_parent(z);
        }
        for (unsigned k = 0; k < tree_.nchild(z); ++k) {
            const int c = tree_.child(z, k);
            auto it = pos.find(c);
            if (it != pos.end())
                M(static_cast<Eigen::Index>(i), it->second) -= tree_.lam_parent(c);
        }
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(pos[y]) = 1.0;
    const Eigen::VectorXd g = M.partialPivLu().solve(rhs);
    return g(pos[x]);
}

Equilibrium Potential::equilibrium_with(const std::vector<int>& K, const std::function<Bracket(int)>& cdown,
                                        const Bracket& up_top)
{
    Equilibrium out;
    out.K = K;
    if (K.empty()) {
        out.cap = Bracket::exact(0.0);
        return out;
    }
    // Hull: union of the root paths of K, cut at their lowest common ancestor.
    std::vector<std::vector<int>> paths;
    for (int k : K)
        paths.push_back(root_path(tree_, k));
    std::size_t l = paths[0].size();
    for (const auto& p : paths) {
        std::size_t j = 0;
        while (j < l && j < p.size() && p[j] == paths[0][j])
            ++j;
        l = j;
    }
    const int top = paths[0][l - 1];
    std::vector<int> hull;
    std::unordered_map<int, int> pos;
    for (const auto& p : paths)
        for (std::size_t j = l - 1; j < p.size(); ++j)
            if (pos.emplace(p[j], static_cast<int>(hull.size())).second)
                hull.push_back(p[j]);
    std::unordered_set<int> inK(K.begin(), K.end());

    // Leak conductances to infinity outside the hull, as brackets.
    std::vector<Bracket> leak(hull.size(), Bracket::exact(0.0));
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const int z = hull[i];
        tree_.ensure_children(z);
        for (unsigned k = 0; k < tree_.nchild(z); ++k) {
            const int c = tree_.child(z, k);
            if (!pos.count(c))
                leak[i] = leak[i] + series(tree_.lam_parent(c), cdown(c));
        }
    }
    leak[static_cast<std::size_t>(pos[top])] = leak[static_cast<std::size_t>(pos[top])] + up_top;

    auto solve = [&](bool upper) {
        // unknowns: hull vertices not in K
        std::vector<int> idx(hull.size(), -1);
        int n = 0;
        for (std::size_t i = 0; i < hull.size(); ++i)
            if (!inK.count(hull[i]))
                idx[i] = n++;
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        auto leakv = [&](std::size_t i) { return upper ? leak[i].hi : leak[i].lo; };
        for (std::size_t i = 0; i < hull.size(); ++i) {
            if (idx[i] < 0)
                continue;
            const int z = hull[i];
            double diag = leakv(i);
            auto edge = [&](int y, double lam) {
                auto it = pos.find(y);
                if (it == pos.end())
                    return;
                diag += lam;
                const auto j = static_cast<std::size_t>(it->second);
                if (idx[j] < 0)
                    rhs(idx[i]) += lam;
                else
                    M(idx[i], idx[j]) -= lam;
            };
            if (z != top)
                edge(tree_.parent(z), tree_.lam_parent(z));
            for (unsigned k = 0; k < tree_.nchild(z); ++k)
                edge(tree_.child(z, k), tree_.lam_parent(tree_.child(z, k)));
            M(idx[i], idx[i]) += diag;
        }
        Eigen::VectorXd v = n > 0 ? Eigen::VectorXd(M.ldlt().solve(rhs)) : Eigen::VectorXd();
        std::vector<double> e;
        for (int k : K) {
            const auto i = static_cast<std::size_t>(pos[k]);
            double cur = leakv(i);
            auto edge = [&](int y, double lam) {
                auto it = pos.find(y);
                if (it == pos.end())
                    return;
                const auto j = static_cast<std::size_t>(it->second);
                const double vy = idx[j] < 0 ? 1.0 : v(idx[j]);
                cur += lam * (1.0 - vy);
            };
            if (k != top)
                edge(tree_.parent(k), tree_.lam_parent(k));
            for (unsigned c = 0; c < tree_.nchild(k); ++c)
                edge(tree_.child(k, c), tree_.lam_parent(tree_.child(k, c)));
            e.push_back(cur);
        }
        return e;
    };
    const auto elo = solve(false);
    const auto ehi = solve(true);
    Bracket meta = Bracket::exact(0.0);
    for (const auto& b : leak)
        meta = merge_meta(meta, meta, b);
    out.cap = meta;
    out.cap.lo = out.cap.hi = 0.0;
    for (std::size_t i = 0; i < K.size(); ++i) {
        Bracket b = meta;
        b.lo = std::min(elo[i], ehi[i]);
        b.hi = std::max(elo[i], ehi[i]);
        out.e.push_back(b);
        out.cap.lo += elo[i];
        out.cap.hi += ehi[i];
    }
    return out;
}

Equilibrium Potential::equilibrium(const std::vector<int>& K, double tol)
{
    if (K.empty())
        return equilibrium_with(K, nullptr, Bracket::exact(0.0));
    // the up-side conductance is needed at the hull top only
    std::vector<std::vector<int>> paths;
    for (int k : K)
        paths.push_back(root_path(tree_, k));
    std::size_t l = paths[0].size();
    for (const auto& p : paths) {
        std::size_t j = 0;
        while (j < l && j < p.size() && p[j] == paths[0][j])
            ++j;
        l = j;
    }
    const int top = paths[0][l - 1];
    return equilibrium_with(K, [&](int c) { return c_down(c, tol); }, c_up(top, tol));
}

Equilibrium Potential::equilibrium_level(const std::vector<int>& K, int level)
{
    if (K.empty())
        return equilibrium_with(K, nullptr, Bracket::exact(0.0));
    std::vector<std::vector<int>> paths;
    for (int k : K)
        paths.push_back(root_path(tree_, k));
    std::size_t l = paths[0].size();
    for (const auto& p : paths) {
        std::size_t j = 0;
        while (j < l && j < p.size() && p[j] == paths[0][j])
            ++j;
        l = j;
    }
    const int top = paths[0][l - 1];
    return equilibrium_with(K, [&](int c) { return c_down_level(c, level); }, c_up_level(top, level));
}

double grounded_conductance_solve(const std::vector<int>& parent, const std::vector<double>& lam_parent,
                                  const std::vector<double>& leak)
{
    // node 0 is held at voltage 1, every node i leaks to ground through leak[i]
    const auto n = static_cast<Eigen::Index>(parent.size());
    if (n <= 1)
        return leak.empty() ? 0.0 : leak[0];
    const Eigen::Index m = n - 1; // unknowns: nodes 1..n-1
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index i = 1; i < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const int p = parent[iu];
        const double l = lam_parent[iu];
        diag[iu] += l;
        diag[static_cast<std::size_t>(p)] += l;
        if (p == 0)
            rhs(i - 1) += l;
        else {
            trip.emplace_back(i - 1, p - 1, -l);
            trip.emplace_back(p - 1, i - 1, -l);
        }
    }
    for (Eigen::Index i = 1; i < n; ++i)
        trip.emplace_back(i - 1, i - 1, diag[static_cast<std::size_t>(i)] + leak[static_cast<std::size_t>(i)]);
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("grounded_conductance_solve: factorization failed");
    const Eigen::VectorXd v = solver.solve(rhs);
    double current = leak[0];
    for (Eigen::Index i = 1; i < n; ++i)
        if (parent[static_cast<std::size_t>(i)] == 0)
            current += lam_parent[static_cast<std::size_t>(i)] * (1.0 - v(i - 1));
    return current;
}

} // namespace treeperc
