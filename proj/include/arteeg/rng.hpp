#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace arteeg {

// Deterministic xoshiro256++ stream. All sampling code is hand-rolled so
// results are byte-identical across standard libraries and platforms.
// Streams are derived from one master seed plus a name, so independent
// pipeline stages (data, init, shuffle, holdout) never share state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);
    RngStream(std::uint64_t master_seed, std::string_view stream_name);

    // Named sub-stream of this stream (hierarchical derivation).
    RngStream sub(std::string_view name) const;
    RngStream sub(std::string_view name, std::uint64_t index) const;

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // standard normal, Box-Muller
    // Unbiased integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t s_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;

    void seed_from(std::uint64_t x);
};

} // namespace arteeg
