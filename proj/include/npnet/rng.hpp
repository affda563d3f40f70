#pragma once

#include <cstdint>
#include <random>

namespace npnet {

// All randomness in a run funnels through one of these, seeded once.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }
    double normal(double mean, double sd) {
        return std::normal_distribution<double>(mean, sd)(gen_);
    }
    // Uniform integer in [0, n).
    long index(long n) {
        return std::uniform_int_distribution<long>(0, n - 1)(gen_);
    }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace npnet
