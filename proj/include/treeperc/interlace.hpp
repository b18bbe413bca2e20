#pragma once

#include "treeperc/bracket.hpp"
#include "treeperc/potential.hpp"
#include "treeperc/tree.hpp"

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace treeperc {

struct InterlaceOptions {
    int max_level = 2;
    double decide_below = 0.1;
    std::uint64_t cap = 10'000'000;
    std::uint64_t max_attempts = 1'000'000; // rejection attempts per trajectory part
    bool keep_pieces = false;
};

// Window visits of one trajectory part, in order.
struct Piece {
    int start = 0;
    std::uint64_t index = 0;
    bool backward = false;
    std::vector<int> trace;
    std::uint64_t attempts = 0;
    bool flagged = false;
};

struct InterlacementRealization {
    double u = 0.0;
    int D = 0;
    std::vector<int> window;
    std::unordered_map<int, std::uint64_t> gamma;
    std::unordered_map<int, std::uint64_t> visits;
    std::unordered_map<int, double> local;
    std::vector<Piece> pieces;
    int flagged = 0;

    bool occupied(int x) const
    {
        auto it = visits.find(x);
        return it != visits.end() && it->second > 0;
    }
};

// Interlacements on the ball of relative depth D around the tree root, drawn
// through the highest visited vertex: Gamma_x ~ Poi(u e_check(x)) trajectories
// start at x, with forward part conditioned on H_{x-} = inf and backward part on
// H~_x = inf, H_{x-} = inf. Trajectories from x are generated on the first
// query of x or of a descendant of x.
//
// Trajectory labels follow a unit-rate process scaled by e_check(x), so the
// realizations at levels u <= u' are nested.
class LazyInterlacement {
public:
    LazyInterlacement(Potential& pot, double u, int D, std::uint64_t seed, InterlaceOptions opt = {});

    Potential& pot() { return pot_; }
    double level() const { return u_; }
    int depth() const { return D_; }
    bool occupied(int y);
    std::uint64_t visits(int y);
    // (1/lam_y) sum_{k <= N_y} E_y^(k); the clocks are keyed per vertex and shared with the noise sets
    double local_time(int y);
    std::uint64_t gamma(int x);
    int flagged() const { return flagged_; }
    const std::vector<Piece>& pieces() const { return pieces_; }
    const std::unordered_map<int, std::uint64_t>& visit_map() const { return visits_; }
    std::uint64_t seed() const { return seed_; }

private:
    void ensure(int y);
    void generate(int z);
    bool simulate_part(int x, bool backward, Stream& s, std::vector<int>& trace, bool& flagged);

    Potential& pot_;
    double u_;
    int D_;
    std::uint64_t seed_;
    InterlaceOptions opt_;
    std::unordered_set<int> generated_;
    std::unordered_map<int, std::uint64_t> gamma_;
    std::unordered_map<int, std::uint64_t> visits_;
    std::vector<Piece> pieces_;
    int flagged_ = 0;
};

// Exponential clock E_y^(k), k >= 1, of vertex key `key`.
double clock_draw(std::uint64_t seed, std::uint64_t key, std::uint64_t k);

InterlacementRealization sample_interlacements(Potential& pot, double u, int D, std::uint64_t seed,
                                               const InterlaceOptions& opt = {});

// Exact draw of Poi(mean) for a mean known through refinable brackets, by
// inversion of the uniform u; returns -1 when undecided.
std::int64_t poisson_inversion(const std::function<Bracket(int)>& mean, double u, int max_level);

struct ClusterSample {
    std::vector<int> nodes;
    bool truncated = false; // exploration stopped at the size cap
    std::size_t size() const { return nodes.size(); }
};

// Root cluster of the vacant set, every vertex opened independently with
// probability exp(-u e_check(x)); exploration stops after max_size+1 vertices.
ClusterSample vacant_cluster_bernoulli(Potential& pot, double u, std::uint64_t seed, std::size_t max_size,
                                       int max_level = 2);

// Root cluster of the vacant set of a lazily sampled interlacement.
ClusterSample vacant_cluster_direct(LazyInterlacement& I, std::size_t max_size);

struct RayKnightSamples {
    std::vector<int> vertices;
    std::vector<std::vector<double>> A; // ell + phi^2/2
    std::vector<std::vector<double>> B; // (phi' + sqrt(2u))^2/2
    std::vector<std::vector<double>> ell;
    int flagged = 0;
};

// Paired streams for the isomorphism: independent fields phi, phi' and
// interlacements per replica; ell_scale multiplies the local times (power checks).
RayKnightSamples second_ray_knight_samples(Potential& pot, double u, const std::vector<int>& vertices,
                                           std::size_t N, std::uint64_t seed, double tol = 1e-9,
                                           double ell_scale = 1.0);

} // namespace treeperc
