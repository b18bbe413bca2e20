#include "treeperc/tree.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <json.hpp>

namespace treeperc {

TreeArena::TreeArena(OffspringSpec spec, std::uint64_t seed, NodeId base, double kappa)
    : spec_(std::move(spec)), seed_(seed), base_(std::move(base))
{
    NodeRec r;
    r.key = node_key(seed_, base_);
    r.lam_parent = kappa;
    r.label = base_.is_root() ? 0 : base_.last();
    nodes_.push_back(r);
}

std::vector<double> TreeArena::keyed_offspring(std::uint64_t key) const
{
    Stream s(key, 0);
    return spec_.sample(s);
}

void TreeArena::sample_children(int i)
{
    if (i < 0 || static_cast<std::size_t>(i) >= nodes_.size())
        throw std::out_of_range("sample_children: node not present");
    if (nodes_[static_cast<std::size_t>(i)].sampled)
        throw ContractViolation("sample_children: node already sampled");
    std::vector<double> lam = source_ ? source_(*this, i) : keyed_offspring(nodes_[static_cast<std::size_t>(i)].key);
    attach_children(i, lam);
}

void TreeArena::attach_children(int i, const std::vector<double>& lam)
{
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.sampled)
        throw ContractViolation("attach_children: node already sampled");
    const auto first = static_cast<std::int32_t>(nodes_.size());
    const std::uint64_t pkey = n.key;
    const std::uint32_t pdepth = n.depth;
    double plus = 0.0;
    for (double l : lam) {
        if (!(l > 0.0))
            throw ContractViolation("attach_children: conductances must be positive");
        plus += l;
    }
    {
        auto& m = nodes_[static_cast<std::size_t>(i)];
        m.first_child = first;
        m.nchild = static_cast<std::uint32_t>(lam.size());
        m.lam_plus = plus;
        m.sampled = true;
    }
    for (std::size_t k = 0; k < lam.size(); ++k) {
        NodeRec c;
        c.parent = i;
        c.label = static_cast<std::uint32_t>(k + 1);
        c.depth = pdepth + 1;
        c.key = child_key(pkey, c.label);
        c.lam_parent = lam[k];
        nodes_.push_back(c);
    }
}

void TreeArena::set_edge(int i, double lam)
{
    if (i <= 0 || !(lam > 0.0))
        throw ContractViolation("set_edge: needs a non-root node and a positive conductance");
    auto& n = nodes_[static_cast<std::size_t>(i)];
    nodes_[static_cast<std::size_t>(n.parent)].lam_plus += lam - n.lam_parent;
    n.lam_parent = lam;
}

NodeId TreeArena::relative_id(int i) const
{
    std::vector<std::uint32_t> w(at(i).depth);
    for (int j = i; j != 0; j = at(j).parent)
        w[at(j).depth - 1] = at(j).label;
    return NodeId(std::move(w));
}

NodeId TreeArena::id(int i) const { return base_.concat(relative_id(i)); }

int TreeArena::find(const NodeId& abs, bool grow)
{
    if (!base_.is_ancestor_of(abs))
        return -2;
    int cur = 0;
    for (std::size_t d = base_.depth(); d < abs.depth(); ++d) {
        if (!at(cur).sampled) {
            if (!grow)
                return -2;
            sample_children(cur);
        }
        const auto lab = abs[d];
        if (lab == 0 || lab > at(cur).nchild)
            return -2;
        cur = child(cur, lab - 1);
    }
    return cur;
}

void TreeArena::check_invariants() const
{
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (i > 0) {
            if (!(n.lam_parent > 0.0))
                throw ContractViolation("nonpositive edge conductance");
            if (!at(n.parent).sampled)
                throw ContractViolation("node below an unsampled parent");
        }
        if (n.sampled) {
            double s = 0.0;
            for (unsigned k = 0; k < n.nchild; ++k)
                s += at(n.first_child + static_cast<int>(k)).lam_parent;
            if (std::abs(s - n.lam_plus) > 1e-12 * std::max(1.0, s))
                throw ContractViolation("lambda_+ disagrees with child conductances");
        }
    }
}

void TreeArena::dump_jsonl(std::ostream& os, unsigned max_depth) const
{
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.depth > max_depth)
            continue;
        nlohmann::ordered_json j;
        j["id"] = id(static_cast<int>(i)).str();
        if (i == 0) {
            if (base_.is_root())
                j["parent"] = nullptr;
            else
                j["parent"] = base_.parent().str();
        } else {
            j["parent"] = id(n.parent).str();
        }
        j["lambda_parent"] = (i == 0 && n.lam_parent == 0.0) ? nlohmann::ordered_json(nullptr)
                                                            : nlohmann::ordered_json(n.lam_parent);
        if (n.sampled) {
            auto arr = nlohmann::ordered_json::array();
            for (unsigned k = 0; k < n.nchild; ++k)
                arr.push_back(at(n.first_child + static_cast<int>(k)).lam_parent);
            j["children_lambdas"] = arr;
        } else {
            j["children_lambdas"] = nullptr;
        }
        os << j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::strict) << '\n';
    }
}

bool keyed_tree_survives(const OffspringSpec& spec, std::uint64_t seed, int D)
{
    struct Frame {
        std::uint64_t key;
        int depth;
    };
    std::vector<Frame> stack{{root_key(seed), 0}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        if (f.depth >= D)
            return true;
        Stream s(f.key, 0);
        const auto lam = spec.sample(s);
        for (std::size_t k = lam.size(); k-- > 0;)
            stack.push_back({child_key(f.key, static_cast<std::uint32_t>(k + 1)), f.depth + 1});
    }
    return false;
}

SurvivalSampler survival_conditioned_sampler(const OffspringSpec& spec, std::uint64_t seed, int depth_check,
                                             std::uint64_t max_rejections, bool force_rejection)
{
    if (!spec.supercritical())
        throw ConfigError("survival conditioning needs a supercritical law");
    SurvivalSampler out;
    out.depth_check = depth_check;
    if (spec.mass(0) == 0.0) {
        out.mode = SurvivalSampler::pruned;
        out.spec = spec;
        out.seed = seed;
        return out;
    }
    if (spec.exchangeable() && !force_rejection) {
        out.mode = SurvivalSampler::pruned;
        out.spec = pruned_spec(spec);
        out.seed = seed;
        return out;
    }
    out.mode = SurvivalSampler::rejection;
    out.spec = spec;
    for (std::uint64_t attempt = 0; attempt <= max_rejections; ++attempt) {
        const std::uint64_t s = attempt == 0 ? seed : derive_key(seed, Purpose::replica, attempt);
        if (keyed_tree_survives(spec, s, depth_check)) {
            out.seed = s;
            return out;
        }
        ++out.rejections;
    }
    throw std::runtime_error("survival rejection budget exceeded after " + std::to_string(out.rejections) +
                             " rejections");
}

} // namespace treeperc
