#pragma once

#include <cstdint>

#include "aronsson/types.hpp"

namespace aronsson {

/// splitmix64 generator. Used for all randomized sampling so that runs are
/// reproducible from an explicit integer seed and identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform point in the box.
    Vec point_in(const Box& box) {
        Vec x(box.dim());
        for (int i = 0; i < box.dim(); ++i) {
            x[i] = uniform(box.lo[i], box.hi[i]);
        }
        return x;
    }
};

}  // namespace aronsson
