#include "treeperc/nodeid.hpp"

#include "treeperc/rng.hpp"

#include <stdexcept>

namespace treeperc {

NodeId NodeId::parent() const
{
    if (w_.empty())
        throw std::logic_error("root has no parent");
    return NodeId(std::vector<std::uint32_t>(w_.begin(), w_.end() - 1));
}

NodeId NodeId::child(std::uint32_t i) const
{
    if (i == 0)
        throw std::invalid_argument("Ulam-Harris letters are positive");
    auto w = w_;
    w.push_back(i);
    return NodeId(std::move(w));
}

NodeId NodeId::concat(const NodeId& other) const
{
    auto w = w_;
    w.insert(w.end(), other.w_.begin(), other.w_.end());
    return NodeId(std::move(w));
}

bool NodeId::is_ancestor_of(const NodeId& other) const
{
    if (w_.size() > other.w_.size())
        return false;
    for (std::size_t i = 0; i < w_.size(); ++i)
        if (w_[i] != other.w_[i])
            return false;
    return true;
}

std::string NodeId::str() const
{
    std::string s;
    for (std::size_t i = 0; i < w_.size(); ++i) {
        if (i)
            s += '.';
        s += std::to_string(w_[i]);
    }
    return s;
}

NodeId NodeId::parse(const std::string& s)
{
    std::vector<std::uint32_t> w;
    if (s.empty() || s == "root")
        return NodeId();
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto dot = s.find('.', pos);
        const auto tok = s.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (tok.empty())
            throw std::invalid_argument("bad node id: " + s);
        std::size_t used = 0;
        const unsigned long v = std::stoul(tok, &used);
        if (used != tok.size() || v == 0)
            throw std::invalid_argument("bad node id: " + s);
        w.push_back(static_cast<std::uint32_t>(v));
        if (dot == std::string::npos)
            break;
        pos = dot + 1;
    }
    return NodeId(std::move(w));
}

std::size_t NodeIdHash::operator()(const NodeId& x) const
{
    std::uint64_t h = 0x51ed270b27a1c3d5ULL;
    for (auto v : x.word())
        h = hash_combine(h, v);
    return static_cast<std::size_t>(h);
}

std::uint64_t root_key(std::uint64_t seed) { return derive_key(seed, Purpose::tree); }

std::uint64_t child_key(std::uint64_t parent_key, std::uint32_t label) { return hash_combine(parent_key, label); }

std::uint64_t node_key(std::uint64_t seed, const NodeId& x)
{
    std::uint64_t k = root_key(seed);
    for (auto v : x.word())
        k = child_key(k, v);
    return k;
}

} // namespace treeperc
