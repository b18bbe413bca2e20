#include "treeperc/spec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace treeperc {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("spec: bad number for " + key + ": '" + v + "'");
    }
}

ConductanceLaw make_law(const std::string& type, double lo, double hi)
{
    ConductanceLaw law;
    if (type == "const" || type == "constant") {
        law.type = ConductanceLaw::constant;
        law.lo = law.hi = lo;
    } else if (type == "uniform") {
        law.type = ConductanceLaw::uniform;
        law.lo = lo;
        law.hi = hi;
    } else {
        throw ConfigError("spec: unknown conductance law '" + type + "'");
    }
    return law;
}

void mu_from_atoms(OffspringSpec& s)
{
    unsigned kmax = 0;
    for (const auto& a : s.atoms)
        kmax = std::max(kmax, a.count);
    s.mu.assign(kmax + 1, 0.0);
    for (const auto& a : s.atoms)
        s.mu[a.count] += a.weight;
}

double series(double a, double b) { return (a == 0.0 || b == 0.0) ? 0.0 : a * b / (a + b); }

} // namespace

OffspringSpec OffspringSpec::unit_law(std::vector<double> mu)
{
    OffspringSpec s;
    s.kind = SpecKind::unit;
    s.mu = std::move(mu);
    s.law = ConductanceLaw{};
    return s;
}

OffspringSpec OffspringSpec::iid_law(std::vector<double> mu, double lo, double hi)
{
    OffspringSpec s;
    s.kind = SpecKind::iid;
    s.mu = std::move(mu);
    s.law = make_law("uniform", lo, hi);
    return s;
}

OffspringSpec OffspringSpec::mixture_law(std::vector<MixtureAtom> atoms)
{
    OffspringSpec s;
    s.kind = SpecKind::mixture;
    s.atoms = std::move(atoms);
    mu_from_atoms(s);
    return s;
}

void OffspringSpec::validate() const
{
    if (mu.empty())
        throw ConfigError("spec: empty offspring law");
    double sum = 0.0;
    for (double p : mu) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw ConfigError("spec: offspring probabilities must be nonnegative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("spec: offspring probabilities sum to " + std::to_string(sum));
    if (kind == SpecKind::iid) {
        if (!(law.lo > 0.0) || !(law.lo < law.hi) || !std::isfinite(law.hi))
            throw ConfigError("spec: iid conductances need 0 < lo < hi < inf");
    }
    if (kind == SpecKind::mixture) {
        if (atoms.empty())
            throw ConfigError("spec: mixture without atoms");
        for (const auto& a : atoms) {
            if (!(a.weight > 0.0))
                throw ConfigError("spec: atom weight must be positive");
            if (!(a.law.lo > 0.0) || a.law.max() < a.law.lo)
                throw ConfigError("spec: atom conductances must be positive");
        }
    }
}

double OffspringSpec::mean() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        m += static_cast<double>(i) * mu[i];
    return m;
}

unsigned OffspringSpec::max_count() const
{
    for (std::size_t i = mu.size(); i-- > 0;)
        if (mu[i] > 0.0)
            return static_cast<unsigned>(i);
    return 0;
}

unsigned OffspringSpec::min_count() const
{
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu[i] > 0.0)
            return static_cast<unsigned>(i);
    return 0;
}

std::vector<double> OffspringSpec::sample(Stream& s) const
{
    std::vector<double> lam;
    if (kind == SpecKind::mixture) {
        double u = s.uniform();
        std::size_t j = 0;
        for (; j + 1 < atoms.size(); ++j) {
            if (u < atoms[j].weight)
                break;
            u -= atoms[j].weight;
        }
        const auto& a = atoms[j];
        lam.resize(a.count);
        for (auto& l : lam)
            l = a.law.sample(s);
        return lam;
    }
    double u = s.uniform();
    unsigned k = 0;
    for (; k + 1 < mu.size(); ++k) {
        if (u < mu[k])
            break;
        u -= mu[k];
    }
    while (mu[k] == 0.0 && k > 0)
        --k;
    lam.resize(k);
    for (auto& l : lam)
        l = kind == SpecKind::unit ? 1.0 : law.sample(s);
    return lam;
}

double OffspringSpec::lambda_min() const
{
    if (kind == SpecKind::unit)
        return 1.0;
    if (kind == SpecKind::iid)
        return law.lo;
    double m = INFINITY;
    for (const auto& a : atoms)
        if (a.count > 0)
            m = std::min(m, a.law.min());
    return m;
}

double OffspringSpec::lambda_max() const
{
    if (kind == SpecKind::unit)
        return 1.0;
    if (kind == SpecKind::iid)
        return law.hi;
    double m = 0.0;
    for (const auto& a : atoms)
        if (a.count > 0)
            m = std::max(m, a.law.max());
    return m;
}

double OffspringSpec::lambda_plus_max() const
{
    if (kind != SpecKind::mixture)
        return lambda_max() * max_count();
    double m = 0.0;
    for (const auto& a : atoms)
        m = std::max(m, a.count * a.law.max());
    return m;
}

double OffspringSpec::truncated_mean(double M) const
{
    if (kind == SpecKind::unit) {
        double v = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k)
            if (static_cast<double>(k) <= M)
                v += static_cast<double>(k) * mu[k];
        return v;
    }
    if (kind == SpecKind::mixture) {
        double v = 0.0;
        for (const auto& a : atoms) {
            if (a.law.type == ConductanceLaw::constant) {
                if (a.count * a.law.lo <= M * (1.0 + 1e-12))
                    v += a.weight * a.count;
            } else {
                throw ConfigError("truncated_mean: only constant atoms are supported");
            }
        }
        return v;
    }
    // iid uniform: P(sum of k uniforms on [lo,hi] <= M) via Irwin-Hall
    double v = 0.0;
    const double w = law.hi - law.lo;
    for (std::size_t k = 1; k < mu.size(); ++k) {
        if (mu[k] == 0.0)
            continue;
        const double x = (M - static_cast<double>(k) * law.lo) / w;
        double cdf;
        if (x <= 0.0)
            cdf = 0.0;
        else if (x >= static_cast<double>(k))
            cdf = 1.0;
        else {
            double acc = 0.0, fact = 1.0;
            for (std::size_t j = 1; j <= k; ++j)
                fact *= static_cast<double>(j);
            double binom = 1.0;
            for (std::size_t j = 0; j <= static_cast<std::size_t>(std::floor(x)); ++j) {
                acc += ((j % 2) ? -1.0 : 1.0) * binom * std::pow(x - static_cast<double>(j), static_cast<double>(k));
                binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
            }
            cdf = std::clamp(acc / fact, 0.0, 1.0);
        }
        v += static_cast<double>(k) * mu[k] * cdf;
    }
    return v;
}

std::string OffspringSpec::describe() const
{
    std::ostringstream os;
    os << std::setprecision(17);
    os << "kind=" << (kind == SpecKind::unit ? "unit" : kind == SpecKind::iid ? "iid" : "mixture");
    os << " mu=";
    for (std::size_t i = 0; i < mu.size(); ++i)
        os << (i ? " " : "") << mu[i];
    if (kind == SpecKind::iid)
        os << " conductance=uniform[" << law.lo << "," << law.hi << "]";
    if (kind == SpecKind::mixture)
        for (const auto& a : atoms)
            os << " atom=" << a.weight << ":" << a.count << ":" << a.law.lo << ":" << a.law.max();
    return os.str();
}

OffspringSpec parse_spec(std::istream& in)
{
    OffspringSpec s;
    std::string kind = "unit";
    std::string law_type;
    double lo = NAN, hi = NAN;
    bool have_mu = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("spec line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "kind") {
            kind = val;
        } else if (key == "mu") {
            std::istringstream vs(val);
            std::string tok;
            s.mu.clear();
            while (vs >> tok)
                s.mu.push_back(to_double(key, tok));
            have_mu = true;
        } else if (key == "conductance.law") {
            law_type = val;
        } else if (key == "conductance.lo") {
            lo = to_double(key, val);
        } else if (key == "conductance.hi") {
            hi = to_double(key, val);
        } else if (key == "seed") {
            try {
                s.seed = std::stoull(val);
            } catch (const std::exception&) {
                throw ConfigError("spec: bad seed '" + val + "'");
            }
            s.has_seed = true;
        } else if (key == "atom") {
            std::istringstream vs(val);
            std::vector<std::string> f;
            std::string tok;
            while (vs >> tok)
                f.push_back(tok);
            if (f.size() < 4 || f.size() > 5)
                throw ConfigError("spec: atom = weight count law lo [hi]");
            MixtureAtom a;
            a.weight = to_double("atom.weight", f[0]);
            const double c = to_double("atom.count", f[1]);
            if (c < 0 || c != std::floor(c))
                throw ConfigError("spec: atom count must be a nonnegative integer");
            a.count = static_cast<unsigned>(c);
            const double alo = to_double("atom.lo", f[3]);
            const double ahi = f.size() == 5 ? to_double("atom.hi", f[4]) : alo;
            a.law = make_law(f[2], alo, ahi);
            s.atoms.push_back(a);
        } else {
            throw ConfigError("spec line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    if (kind == "unit") {
        s.kind = SpecKind::unit;
        if (!law_type.empty() && law_type != "const")
            throw ConfigError("spec: unit kind takes no conductance law");
    } else if (kind == "iid") {
        s.kind = SpecKind::iid;
        if (law_type.empty())
            law_type = "uniform";
        if (std::isnan(lo) || std::isnan(hi))
            throw ConfigError("spec: iid kind needs conductance.lo and conductance.hi");
        s.law = make_law(law_type, lo, hi);
        if (s.law.type != ConductanceLaw::uniform)
            throw ConfigError("spec: iid kind needs a uniform law with lo < hi");
    } else if (kind == "mixture") {
        s.kind = SpecKind::mixture;
        if (have_mu)
            throw ConfigError("spec: mixture kind derives mu from its atoms");
        mu_from_atoms(s);
    } else {
        throw ConfigError("spec: unknown kind '" + kind + "'");
    }
    if (s.kind != SpecKind::mixture && !have_mu)
        throw ConfigError("spec: missing mu");
    s.validate();
    return s;
}

OffspringSpec parse_spec_string(const std::string& text)
{
    std::istringstream in(text);
    return parse_spec(in);
}

OffspringSpec load_spec(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open spec file " + path);
    return parse_spec(in);
}

double pgf(const std::vector<double>& mu, double s)
{
    double v = 0.0;
    for (std::size_t i = mu.size(); i-- > 0;)
        v = v * s + mu[i];
    return v;
}

double extinction_prob(const OffspringSpec& spec)
{
    if (spec.mass(0) == 0.0)
        return 0.0;
    if (spec.mean() <= 1.0)
        return 1.0;
    // Monotone iteration from 0; near the fixed point switch to Newton, which
    // stays below the root because f is convex.
    double s = 0.0;
    for (int it = 0; it < 100000; ++it) {
        const double n = pgf(spec.mu, s);
        if (n - s < 1e-15)
            return n;
        s = n;
        if (it > 50) {
            double d = 0.0;
            for (std::size_t i = spec.mu.size(); i-- > 1;)
                d = d * s + static_cast<double>(i) * spec.mu[i];
            const double f = pgf(spec.mu, s) - s;
            if (d < 1.0)
                s = std::min(s + f / (1.0 - d), 1.0);
        }
    }
    return s;
}

OffspringSpec pruned_spec(const OffspringSpec& spec)
{
    if (!spec.supercritical())
        throw ConfigError("pruned_spec: offspring law is not supercritical");
    if (!spec.exchangeable())
        throw ConfigError("pruned_spec: general vector laws are handled by rejection");
    const double q = extinction_prob(spec);
    if (q == 0.0)
        return spec;
    const std::size_t n = spec.mu.size();
    std::vector<double> star(n, 0.0);
    // f(q + (1-q)s) = sum_i mu_i sum_j C(i,j) q^{i-j} (1-q)^j s^j
    for (std::size_t i = 0; i < n; ++i) {
        if (spec.mu[i] == 0.0)
            continue;
        double binom = 1.0;
        for (std::size_t j = 0; j <= i; ++j) {
            if (j > 0)
                star[j] += spec.mu[i] * binom * std::pow(q, static_cast<double>(i - j)) *
                           std::pow(1.0 - q, static_cast<double>(j));
            binom = binom * static_cast<double>(i - j) / static_cast<double>(j + 1);
        }
    }
    for (auto& v : star)
        v /= (1.0 - q);
    star[0] = 0.0;
    const double sum = std::accumulate(star.begin(), star.end(), 0.0);
    for (auto& v : star)
        v /= sum;
    OffspringSpec out = spec;
    out.mu = std::move(star);
    return out;
}

double survival_to_depth(const std::vector<double>& mu, int D)
{
    double s = 0.0;
    for (int i = 0; i < D; ++i)
        s = pgf(mu, s);
    return 1.0 - s;
}

std::vector<double> conductance_population(const OffspringSpec& spec, std::size_t pop, int sweeps,
                                           std::uint64_t seed)
{
    const double top = spec.lambda_max() * std::max(1.0, static_cast<double>(spec.max_count()) - 1.0);
    std::vector<double> c(pop, top), next(pop);
    Stream rng(derive_key(seed, Purpose::misc, 0xc0d), 0);
    for (int sw = 0; sw < sweeps; ++sw) {
        for (std::size_t i = 0; i < pop; ++i) {
            const auto lam = spec.sample(rng);
            double v = 0.0;
            for (double l : lam)
                v += series(l, c[rng.below(pop)]);
            next[i] = v;
        }
        c.swap(next);
    }
    return c;
}

LawBounds law_bounds(const OffspringSpec& spec, std::uint64_t seed)
{
    LawBounds b;
    const unsigned kmax = spec.max_count();
    const unsigned kmin = spec.min_count();
    b.ceil = spec.lambda_max() * (kmax > 0 ? kmax - 1.0 : 0.0);
    if (kmin == 0) {
        b.floor = 0.0;
        return b;
    }
    if (kmin >= 2) {
        b.floor = spec.lambda_min() * (kmin - 1.0);
        return b;
    }
    const auto popv = conductance_population(spec, 20000, 60, seed);
    b.floor = 0.5 * *std::min_element(popv.begin(), popv.end());
    b.certified = false;
    return b;
}

} // namespace treeperc
