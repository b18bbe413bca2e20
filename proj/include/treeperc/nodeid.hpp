#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace treeperc {

// Ulam-Harris word; the empty word is the root.
class NodeId {
public:
    NodeId() = default;
    NodeId(std::initializer_list<std::uint32_t> w) : w_(w) {}
    explicit NodeId(std::vector<std::uint32_t> w) : w_(std::move(w)) {}

    bool is_root() const { return w_.empty(); }
    std::size_t depth() const { return w_.size(); }
    const std::vector<std::uint32_t>& word() const { return w_; }
    std::uint32_t operator[](std::size_t i) const { return w_[i]; }
    std::uint32_t last() const { return w_.back(); }

    NodeId parent() const;
    NodeId child(std::uint32_t i) const;
    NodeId concat(const NodeId& other) const;
    bool is_ancestor_of(const NodeId& other) const; // proper or equal

    // "" for the root, otherwise dot separated letters, e.g. "1.2.1".
    std::string str() const;
    static NodeId parse(const std::string& s);

    auto operator<=>(const NodeId&) const = default;
    bool operator==(const NodeId&) const = default;

private:
    std::vector<std::uint32_t> w_;
};

struct NodeIdHash {
    std::size_t operator()(const NodeId& x) const;
};

// Hash of (seed, word), computed letter by letter so subtrees can extend it.
std::uint64_t node_key(std::uint64_t seed, const NodeId& x);
std::uint64_t root_key(std::uint64_t seed);
std::uint64_t child_key(std::uint64_t parent_key, std::uint32_t label);

} // namespace treeperc
