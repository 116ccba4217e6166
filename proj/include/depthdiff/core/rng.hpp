// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace depthdiff {

/// Deterministic random source with a fully specified algorithm so that
/// corpora and checkpoints reproduce bit-for-bit across platforms:
///   - core generator: std::mt19937_64 (bit-exact per the C++ standard)
///   - uniform double: (x >> 11) * 2^-53, in [0, 1)
///   - normal double:  Box-Muller on two uniforms, second value cached
///   - bounded ints:   rejection sampling on the top 64-bit range
/// Distribution classes from <random> are never used (their output is
/// implementation-defined).
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<int64_t>(gen_());  // full 64-bit span
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return lo + static_cast<int64_t>(x % range);
    }

    /// Derives an independent stream seed from (seed, stream) via two
    /// rounds of the splitmix64 finalizer.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = z ^ (z >> 31);
        return z;
    }

    /// FNV-1a hash of a byte string, for deriving per-id streams.
    static uint64_t hash_bytes(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        uint64_t h = 0xcbf29ce484222325ull;
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
        return h;
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace depthdiff
