#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace treeperc {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v)
{
    return splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
}

// Purpose tags separate the keyed streams drawn from one master seed.
enum class Purpose : std::uint64_t {
    tree = 1,
    walk,
    field,
    clock,
    mark,
    gamma,
    ws_stream,
    ws_walk,
    ends,
    free_root,
    coupling,
    replica,
    misc,
};

inline std::uint64_t derive_key(std::uint64_t seed, Purpose p, std::uint64_t a = 0, std::uint64_t b = 0)
{
    return hash_combine(hash_combine(hash_combine(splitmix64(seed), static_cast<std::uint64_t>(p)), a), b);
}

// Philox4x32-10 block function.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key)
{
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

// Sequential view of a counter-based stream: (key, stream id) fixes the sequence.
class Stream {
public:
    Stream() = default;
    explicit Stream(std::uint64_t key, std::uint64_t id = 0) : key_(key), id_(id) {}

    std::uint64_t next_u64()
    {
        if (avail_ == 0) {
            const auto b = philox4x32({static_cast<std::uint32_t>(ctr_), static_cast<std::uint32_t>(ctr_ >> 32),
                                       static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)},
                                      {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
            ++ctr_;
            buf_[0] = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
            buf_[1] = (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
            avail_ = 2;
        }
        return buf_[2 - avail_--];
    }

    // uniform on [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0,1)
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential() { return -std::log(uniform_pos()); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double t = 2.0 * 3.14159265358979323846 * uniform();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t lim = ~0ULL - (~0ULL % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= lim);
        return v % n;
    }

    std::uint64_t poisson(double mean)
    {
        if (mean <= 0.0)
            return 0;
        double u = uniform();
        double p = std::exp(-mean), cdf = p;
        std::uint64_t k = 0;
        while (u >= cdf && p > 0.0) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t key_ = 0, id_ = 0, ctr_ = 0;
    std::uint64_t buf_[2] = {0, 0};
    int avail_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Single keyed draws, free of sequence state.
inline double keyed_uniform(std::uint64_t key, std::uint64_t id = 0) { return Stream(key, id).uniform(); }
inline double keyed_normal(std::uint64_t key, std::uint64_t id = 0) { return Stream(key, id).normal(); }
inline double keyed_exponential(std::uint64_t key, std::uint64_t id = 0) { return Stream(key, id).exponential(); }

} // namespace treeperc
