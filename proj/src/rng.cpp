#include "arteeg/rng.hpp"

#include <cmath>

#include "arteeg/errors.hpp"

namespace arteeg {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

void RngStream::seed_from(std::uint64_t x) {
    for (auto& s : s_) s = splitmix64(x);
    // xoshiro must not start in the all-zero state.
    if (s_[0] == 0 && s_[1] == 0 && s_[2] == 0 && s_[3] == 0) s_[0] = 1;
}

RngStream::RngStream(std::uint64_t seed) {
    seed_from(seed);
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view stream_name) {
    seed_from(master_seed ^ fnv1a(stream_name));
}

RngStream RngStream::sub(std::string_view name) const {
    RngStream r(0);
    r.seed_from(s_[0] ^ rotl(s_[2], 17) ^ fnv1a(name));
    return r;
}

RngStream RngStream::sub(std::string_view name, std::uint64_t index) const {
    RngStream r(0);
    r.seed_from(s_[0] ^ rotl(s_[2], 17) ^ fnv1a(name) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return r;
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() {
    // 53 high bits -> [0, 1) on the double grid.
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
    if (n == 0) throw UsageError("uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

} // namespace arteeg
