#pragma once

#include "treeperc/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeperc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SpecKind { unit, iid, mixture };

// Conductance law for one edge: constant lo, or uniform on [lo, hi].
struct ConductanceLaw {
    enum Type { constant, uniform } type = constant;
    double lo = 1.0;
    double hi = 1.0;

    double sample(Stream& s) const { return type == constant ? lo : lo + (hi - lo) * s.uniform(); }
    double min() const { return lo; }
    double max() const { return type == constant ? lo : hi; }
};

// One atom of a mixture: with probability weight, `count` children with
// conductances drawn i.i.d. from `law`.
struct MixtureAtom {
    double weight = 0.0;
    unsigned count = 0;
    ConductanceLaw law;
};

class OffspringSpec {
public:
    SpecKind kind = SpecKind::unit;
    std::vector<double> mu;       // offspring law; mu[i] = P(i children)
    ConductanceLaw law;           // iid kind
    std::vector<MixtureAtom> atoms; // mixture kind
    std::uint64_t seed = 0;
    bool has_seed = false;

    static OffspringSpec unit_law(std::vector<double> mu);
    static OffspringSpec iid_law(std::vector<double> mu, double lo, double hi);
    static OffspringSpec mixture_law(std::vector<MixtureAtom> atoms);

    // throws ConfigError
    void validate() const;

    double mean() const;
    bool supercritical() const { return mean() > 1.0; }
    unsigned max_count() const;
    unsigned min_count() const; // smallest count with positive mass
    double mass(unsigned k) const { return k < mu.size() ? mu[k] : 0.0; }

    // True for unit and iid kinds (the law of the vector is exchangeable).
    bool exchangeable() const { return kind != SpecKind::mixture; }

    // Offspring conductance vector; its length is the number of children.
    std::vector<double> sample(Stream& s) const;

    // Smallest and largest single-edge conductance over the support.
    double lambda_min() const;
    double lambda_max() const;
    // Largest and smallest possible total lambda_+.
    double lambda_plus_max() const;
    // E[pi * 1{lambda_+ <= M}]
    double truncated_mean(double M) const;

    std::string describe() const;
};

OffspringSpec parse_spec(std::istream& in);
OffspringSpec parse_spec_string(const std::string& text);
OffspringSpec load_spec(const std::string& path);

double pgf(const std::vector<double>& mu, double s);

// Smallest fixed point of the generating function on [0,1].
double extinction_prob(const OffspringSpec& spec);

// Law of the reduced tree (subtree of vertices with infinite line of descent).
// Only for exchangeable kinds; throws ConfigError otherwise or when m <= 1.
OffspringSpec pruned_spec(const OffspringSpec& spec);

// P(tree survives to generation D) = 1 - f^{oD}(0).
double survival_to_depth(const std::vector<double>& mu, int D);

// Sure bounds on the conductance to infinity of any subtree whose root is
// not yet generated. When certified is false the floor is a law-level estimate.
struct LawBounds {
    double floor = 0.0;
    double ceil = 0.0;
    bool certified = true;
    bool exact() const { return floor == ceil; }
};

LawBounds law_bounds(const OffspringSpec& spec, std::uint64_t seed = 0x5eed);

// Population-dynamics sample of the law of the conductance to infinity.
std::vector<double> conductance_population(const OffspringSpec& spec, std::size_t pop, int sweeps,
                                           std::uint64_t seed);

} // namespace treeperc
