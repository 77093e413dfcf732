#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "promptcare/errors.hpp"

namespace promptcare {

// Deterministic random source. The engine (std::mt19937_64) is fully
// specified by the standard, and every distribution here is hand-rolled
// (std::*_distribution is implementation-defined), so a given seed produces
// the same stream on every platform and toolchain. All randomness in the
// toolkit flows through this class.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double();

    // Uniform integer in [lo, hi], both inclusive. Rejection-sampled so the
    // result is exactly uniform.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller (the spare value is cached).
    double normal();
    double normal(double mean, double stddev);

    // True with probability p.
    bool bernoulli(double p);

    // Draw an index in [0, weights.size()) proportionally to weights.
    std::size_t weighted_index(const std::vector<double>& weights);

    // In-place Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from [0, n), in draw order (partial Fisher-Yates).
    std::vector<int> sample_without_replacement(int n, int k);

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derive an independent stream seed from a base seed and a stream tag
// (splitmix64 finalizer over the combined value). Used so that e.g. the
// corpus split and the trigger initialization never share a stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace promptcare
