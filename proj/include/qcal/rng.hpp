// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qcal::rng {

// splitmix64 finalizer. Good avalanche, cheap, and stateless: we use it to
// build counter-based streams so that shot k of width w under seed s is the
// same number no matter what order (or thread) evaluates it.
inline std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// A stateless draw stream: key identifies the stream (seed, width, shot, ...)
// and `index` the draw within it.
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    Stream fork(std::uint64_t sub) const { return Stream(combine(key_, sub)); }

    // uniform in [0, 1)
    double uniform(std::uint64_t index) const {
        return static_cast<double>(mix(combine(key_, index)) >> 11) * 0x1.0p-53;
    }

    // standard normal pair via Box-Muller, consuming two indexed draws
    void normal_pair(std::uint64_t index, double& n1, double& n2) const {
        double u1 = uniform(2 * index);
        double u2 = uniform(2 * index + 1);
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        n1 = r * std::cos(a);
        n2 = r * std::sin(a);
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

// Sequential convenience wrapper for sites that just need "a seeded RNG"
// (restart initializers, Clifford sampling). Deterministic given the key.
class Sequence {
public:
    explicit Sequence(std::uint64_t key) : stream_(key) {}

    double uniform() { return stream_.uniform(counter_++); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double a, b;
        stream_.normal_pair(counter_++, a, b);
        spare_ = b;
        have_spare_ = true;
        return a;
    }

private:
    Stream stream_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace qcal::rng
