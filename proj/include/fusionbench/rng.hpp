#pragma once

#include <cstdint>
#include <vector>

namespace fusionbench {

// Deterministic counter-based generator (SplitMix64).
//
// The internal state advances by a fixed odd increment and every output is a
// bijective mix of the counter, so a given seed yields a bit-identical uint64
// stream on every platform. Integer-derived draws (signs, bounded indices)
// are therefore fully portable; Gaussian draws go through libm (log/cos/sqrt)
// and are deterministic per platform. The exact algorithm is documented in
// docs/formats.md so persisted sketches can be regenerated anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Next raw 64-bit value of the stream.
    std::uint64_t next_u64();

    // Uniform double in [0, 1), 53 random bits.
    double next_unit();

    // Uniform over {-1, +1}.
    int next_sign();

    // Uniform integer in [1, bound]; unbiased via rejection sampling.
    std::uint64_t next_index(std::uint64_t bound);

    // Zero-mean Gaussian, standard deviation sigma (Box-Muller, one value
    // per two uniform draws; the sine branch is discarded).
    double next_gaussian(double sigma);

    std::vector<int> uniform_signs(std::size_t n);
    std::vector<std::uint32_t> uniform_indices(std::size_t n, std::uint64_t bound);
    std::vector<double> gaussian_vector(std::size_t n, double sigma);

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace fusionbench
