#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cellgraph {

// Splitmix64 generator. One 64-bit word of state, cheap to fork, and the
// output sequence is identical on every platform, which is what the
// reproducibility contract of the pipeline rests on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // modulo bias is negligible for the small n used here, but the
        // rejection loop keeps selection frequencies exactly uniform
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Uniform in [lo, hi].
    double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    std::int64_t next_int_in(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Standard normal via Box-Muller; deterministic, no cached spare.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Derives an independent substream seed from a root seed and an index,
// e.g. one stream per grid box or per epoch. Streams never share state.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
    return detail::mix64(seed ^ detail::mix64(index + 0x9E3779B97F4A7C15ULL));
}

inline std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return substream(substream(seed, a), b);
}

// Named substream (FNV-1a over the name, then mixed with the seed). The CLI
// derives its dataset/fold/model/selection streams from one --seed this way.
inline std::uint64_t substream(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return substream(seed, h);
}

inline std::uint64_t substream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    return substream(substream(seed, name), index);
}

}  // namespace cellgraph
