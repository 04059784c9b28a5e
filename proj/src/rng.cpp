#include "fusionbench/rng.hpp"

#include <cmath>
#include <numbers>

#include "fusionbench/errors.hpp"

namespace fusionbench {

std::uint64_t Rng::next_u64() {
    // SplitMix64 (Steele, Lea, Flood 2014). Golden-ratio increment, two
    // xor-multiply mixing rounds.
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::next_sign() {
    return (next_u64() >> 63) == 0 ? 1 : -1;
}

std::uint64_t Rng::next_index(std::uint64_t bound) {
    if (bound < 1) {
        throw ParameterError("rng: index bound must be >= 1");
    }
    // Reject the low tail so that the modulus is unbiased.
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) {
            return 1 + r % bound;
        }
    }
}

double Rng::next_gaussian(double sigma) {
    if (!(sigma > 0.0)) {
        throw ParameterError("rng: gaussian sigma must be > 0");
    }
    // u1 in (0,1] keeps the log finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int> Rng::uniform_signs(std::size_t n) {
    if (n < 1) {
        throw ParameterError("rng: sign count must be >= 1");
    }
    std::vector<int> out(n);
    for (auto& v : out) {
        v = next_sign();
    }
    return out;
}

std::vector<std::uint32_t> Rng::uniform_indices(std::size_t n, std::uint64_t bound) {
    if (n < 1) {
        throw ParameterError("rng: index count must be >= 1");
    }
    if (bound < 1 || bound > 0xFFFFFFFFULL) {
        throw ParameterError("rng: index bound out of range");
    }
    std::vector<std::uint32_t> out(n);
    for (auto& v : out) {
        v = static_cast<std::uint32_t>(next_index(bound));
    }
    return out;
}

std::vector<double> Rng::gaussian_vector(std::size_t n, double sigma) {
    if (n < 1) {
        throw ParameterError("rng: gaussian count must be >= 1");
    }
    std::vector<double> out(n);
    for (auto& v : out) {
        v = next_gaussian(sigma);
    }
    return out;
}

}  // namespace fusionbench
