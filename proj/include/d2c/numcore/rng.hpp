#pragma once

#include <cstdint>
#include <random>

#include "d2c/numcore/tensor.hpp"

namespace d2c {

// Seeded generator used everywhere randomness is needed; a given seed always
// produces the same stream on a given standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }
    std::uint64_t next() { return engine_(); }

    Tensor normal_tensor(Shape shape, double stddev);
    Tensor uniform_tensor(Shape shape, double lo, double hi);

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace d2c
