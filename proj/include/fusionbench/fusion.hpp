#pragma once

#include <cstdint>
#include <vector>

#include "fusionbench/rng.hpp"
#include "fusionbench/sketch.hpp"
#include "fusionbench/tensor.hpp"

namespace fusionbench {

enum class FusionKind { Elementwise, Mcb, Mutan };

const char* fusion_kind_name(FusionKind kind);
FusionKind fusion_kind_from_name(const std::string& name);

// Compact bilinear configuration: one Count Sketch per modality, both
// projecting n -> d. The sketches are the whole configuration; the fusion
// owns no learnable parameters.
struct McbConfig {
    std::size_t n = 0;
    std::size_t d = 0;
    SketchSpec spec_q;
    SketchSpec spec_v;
};

// The two sketches use independent seeds derived from a master seed by fixed
// offsets (master, master + 1).
McbConfig make_mcb_config(std::size_t n, std::size_t d, std::uint64_t master_seed);

// Tucker-decomposed bilinear fusion with a rank-R structured core. The core
// is held implicitly as R pairs of slice factors (m[r], n[r]); the output
// projection lives downstream in the classifier head.
struct MutanParams {
    Tensor w_q;               // [n_q x t_q]
    Tensor b_q;               // [t_q]
    Tensor w_v;               // [n_v x t_v]
    Tensor b_v;               // [t_v]
    std::vector<Tensor> m;    // R tensors [t_q x t_o]
    std::vector<Tensor> n;    // R tensors [t_v x t_o]

    std::size_t rank() const { return m.size(); }
    std::size_t n_q() const { return w_q.dim(0); }
    std::size_t n_v() const { return w_v.dim(0); }
    std::size_t t_q() const { return w_q.dim(1); }
    std::size_t t_v() const { return w_v.dim(1); }
    std::size_t t_o() const { return m.empty() ? 0 : m[0].dim(1); }

    // n_q*t_q + t_q + n_v*t_v + t_v + R*(t_q*t_o + t_v*t_o)
    std::size_t param_count() const;
    // Exhaustive enumeration of stored scalars; must equal param_count().
    std::size_t stored_scalar_count() const;

    void validate() const;
};

// Gaussian init, sigma = 1/sqrt(fan-in) per matrix, biases zero.
MutanParams init_mutan(Rng& rng, std::size_t n_q, std::size_t n_v, std::size_t t_q,
                       std::size_t t_v, std::size_t t_o, std::size_t r);

// Test-only switch: Identity removes the two tanh projections so that the
// fused output is exactly bilinear in (q, v).
enum class MutanActivation { Tanh, Identity };

// f_i = q_i * v_i. Zero parameters, Theta(n) work.
Tensor fuse_elementwise(const Tensor& q, const Tensor& v);

// Optional post-processing from the original compact-bilinear recipe
// (signed square root then l2 normalization). Off by default; the backward
// pass covers only the raw output.
enum class McbOutput { Raw, SignedSqrtL2 };

// circular_convolve(apply_sketch(spec_q, q), apply_sketch(spec_v, v)).
Tensor fuse_mcb(const McbConfig& cfg, const Tensor& q, const Tensor& v, ConvMode mode,
                McbOutput output = McbOutput::Raw);

// Mode picked by output size: direct below d = 64, frequency above.
Tensor fuse_mcb(const McbConfig& cfg, const Tensor& q, const Tensor& v);
ConvMode default_conv_mode(std::size_t d);

// z_c = sum_r (tanh(q^T W_q + b_q)^T M_r)_c * (tanh(v^T W_v + b_v)^T N_r)_c
Tensor fuse_mutan(const MutanParams& p, const Tensor& q, const Tensor& v,
                  MutanActivation act = MutanActivation::Tanh);

// Gradients of <upstream, forward(q, v)> with respect to the inputs (and,
// for MUTAN, every learnable parameter).
struct FusionVjp {
    Tensor grad_q;
    Tensor grad_v;
};

struct MutanVjp {
    Tensor grad_q;
    Tensor grad_v;
    MutanParams grad_params;
};

FusionVjp fusion_vjp(const Tensor& q, const Tensor& v, const Tensor& upstream);
FusionVjp fusion_vjp(const McbConfig& cfg, const Tensor& q, const Tensor& v,
                     const Tensor& upstream, ConvMode mode = ConvMode::Direct);
MutanVjp fusion_vjp(const MutanParams& p, const Tensor& q, const Tensor& v,
                    const Tensor& upstream);

// Fully materialized 3D bilinear operator, used only by tests as the
// brute-force counterpart of the decomposed MUTAN core.
struct FullBilinearOracle {
    Tensor core;  // [t_q x t_v x t_o]

    // Reconstructs T[a,b,c] = sum_r M_r[a,c] * N_r[b,c].
    static FullBilinearOracle from_mutan(const MutanParams& p);

    // z[c] = sum_{a,b} qt[a] * vt[b] * T[a,b,c] by triple loop.
    Tensor contract(const Tensor& qt, const Tensor& vt) const;
};

}  // namespace fusionbench
