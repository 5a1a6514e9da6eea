#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace pidrl {

/// Deterministic random source. Wraps std::mt19937_64 but does all
/// distribution mapping by hand, so streams are identical across compilers
/// and standard libraries (std distributions are not pinned by the standard).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Lemire multiply-shift reduction.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    /// Index drawn from a probability row by CDF inversion. Rows are
    /// validated at MDP construction, so leftover rounding mass goes to the
    /// last positive entry.
    std::size_t categorical(const double* probs, std::size_t n) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (probs[i] > 0.0) last_positive = i;
            acc += probs[i];
            if (u < acc) return i;
        }
        return last_positive;
    }

    std::size_t categorical(const std::vector<double>& probs) {
        return categorical(probs.data(), probs.size());
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace pidrl
