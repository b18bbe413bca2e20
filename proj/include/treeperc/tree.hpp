#pragma once

#include "treeperc/nodeid.hpp"
#include "treeperc/spec.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace treeperc {

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct NodeRec {
    std::int32_t parent = -1;
    std::int32_t first_child = -1;
    std::uint32_t nchild = 0;
    std::uint32_t label = 0;
    std::uint32_t depth = 0;  // relative to the arena root
    bool sampled = false;
    std::uint64_t key = 0;
    double lam_parent = 0.0;  // at the arena root: conductance to the outer parent (0 if none)
    double lam_plus = 0.0;
};

// Lazily grown weighted tree. Node i's children are contiguous, labelled 1..k.
// The root may hang below an outer parent vertex (index kOuter) through an
// edge of conductance kappa; that vertex is not stored.
class TreeArena {
public:
    static constexpr int kOuter = -1;
    using Source = std::function<std::vector<double>(TreeArena&, int)>;

    TreeArena(OffspringSpec spec, std::uint64_t seed, NodeId base = {}, double kappa = 0.0);

    int root() const { return 0; }
    std::size_t size() const { return nodes_.size(); }
    const NodeRec& at(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    const OffspringSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    const NodeId& base() const { return base_; }
    double kappa() const { return nodes_[0].lam_parent; }
    bool has_outer() const { return nodes_[0].lam_parent > 0.0; }

    bool sampled(int i) const { return at(i).sampled; }
    unsigned nchild(int i) const { return at(i).nchild; }
    int child(int i, unsigned k) const { return at(i).first_child + static_cast<int>(k); }
    int parent(int i) const { return i == 0 ? kOuter : at(i).parent; }
    double lam_parent(int i) const { return at(i).lam_parent; }
    double lam_plus(int i) const { return at(i).lam_plus; }
    double lambda(int i) const { return at(i).lam_parent + at(i).lam_plus; }
    unsigned depth(int i) const { return at(i).depth; }

    // Draw the offspring of i from its source and append the children.
    void sample_children(int i);
    void ensure_children(int i)
    {
        if (!at(i).sampled)
            sample_children(i);
    }
    // Append children with externally drawn conductances.
    void attach_children(int i, const std::vector<double>& lam);
    // Overwrite the conductance of the edge above i (i > 0).
    void set_edge(int i, double lam);

    NodeId id(int i) const;          // absolute Ulam-Harris word
    NodeId relative_id(int i) const; // word below the arena root
    // Index of an absolute word, growing the arena along the path when asked.
    int find(const NodeId& abs, bool grow = true);

    // Offspring vector of the node with the given key under the default source.
    std::vector<double> keyed_offspring(std::uint64_t key) const;

    void set_source(Source s) { source_ = std::move(s); }
    bool has_source() const { return static_cast<bool>(source_); }

    // Sum over recorded child conductances equals lam_plus; children present
    // only below sampled parents; conductances positive.
    void check_invariants() const;

    // One JSON object per sampled node up to relative depth max_depth.
    void dump_jsonl(std::ostream& os, unsigned max_depth) const;

private:
    OffspringSpec spec_;
    std::uint64_t seed_;
    NodeId base_;
    std::vector<NodeRec> nodes_;
    Source source_;
};

struct SurvivalSampler {
    enum Mode { pruned, rejection } mode = pruned;
    OffspringSpec spec;       // law used to grow trees
    std::uint64_t seed = 0;   // accepted seed
    std::uint64_t rejections = 0;
    int depth_check = 0;
};

// Conditioning on survival: exact reduced law for exchangeable kinds, else
// rejection of trees that die before depth_check.
SurvivalSampler survival_conditioned_sampler(const OffspringSpec& spec, std::uint64_t seed, int depth_check = 30,
                                             std::uint64_t max_rejections = 1000000, bool force_rejection = false);

// True iff the keyed tree from seed reaches generation D (depth-first, early exit).
bool keyed_tree_survives(const OffspringSpec& spec, std::uint64_t seed, int D);

} // namespace treeperc
