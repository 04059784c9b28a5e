#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fusionbench/rng.hpp"
#include "fusionbench/tensor.hpp"

namespace fusionbench {

// Count Sketch projection: a sign vector s in {-1,+1}^n and a bucket vector
// h in [1,d]^n, drawn once and treated as immutable afterwards. Buckets are
// stored 1-indexed and converted to 0-indexed only inside kernels.
struct SketchSpec {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<int> s;
    std::vector<std::uint32_t> h;
    std::uint64_t seed = 0;
};

// Draw s and h uniformly from rng. Both compression (d < n) and expansion
// (d > n) regimes are supported.
SketchSpec make_sketch(std::size_t n, std::size_t d, Rng& rng);

// y[k] = sum over i with h_i = k of s_i * x_i; untouched buckets stay 0.
Tensor apply_sketch(const SketchSpec& spec, const Tensor& x);

// Adjoint of apply_sketch: out[i] = s_i * y[h_i].
Tensor apply_sketch_transpose(const SketchSpec& spec, const Tensor& y);

// Brute-force verification route: materializes the n_q x n_v outer product
// q v^T and sketches it with the product sketch
//   sign(i,j) = s_q[i] * s_v[j],
//   bucket(i,j) = ((h_q[i] - 1 + h_v[j] - 1) mod d) + 1.
// Equals circular_convolve(apply_sketch(q), apply_sketch(v)) up to roundoff.
Tensor outer_sketch_oracle(const SketchSpec& spec_q, const SketchSpec& spec_v,
                           const Tensor& q, const Tensor& v);

// Three-line text record: "n d seed", then s as +-1 integers, then h.
// Exact byte layout in docs/formats.md.
void save_sketch(const SketchSpec& spec, std::ostream& out);
SketchSpec load_sketch(std::istream& in, std::size_t* line_counter = nullptr);

}  // namespace fusionbench
