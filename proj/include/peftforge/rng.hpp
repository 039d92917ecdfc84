#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace peftforge {

/// Deterministic, platform-independent random stream (splitmix64 core).
/// Every reproducibility contract in the library is built on this type, so
/// no std:: distribution (whose output is implementation-defined) is used.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    /// Standard normal via Box-Muller.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Fisher-Yates shuffle, deterministic given the stream state.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Derives an independent child stream; mixing is order-sensitive on
    /// purpose so (a, b) and (b, a) give different streams.
    static uint64_t derive(uint64_t base, uint64_t a, uint64_t b = 0) {
        Rng r(base ^ (a * 0xd6e8feb86659fd93ull) ^ (b * 0xa5cb3ec1f95f31b5ull + 0x1b873593ull));
        r.next_u64();
        return r.next_u64();
    }

  private:
    uint64_t state_;
};

}  // namespace peftforge
