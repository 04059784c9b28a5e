#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fusionbench/fusion.hpp"
#include "fusionbench/rng.hpp"
#include "fusionbench/tensor.hpp"

namespace fusionbench {

struct MutanDims {
    std::size_t t_q = 310;
    std::size_t t_v = 310;
    std::size_t t_o = 360;
    std::size_t rank = 13;
};

// Classifier hidden nonlinearity.
enum class HiddenAct { Tanh, Relu };
const char* hidden_act_name(HiddenAct act);
HiddenAct hidden_act_from_name(const std::string& name);

// Full head geometry: feature dims -> (projections) -> fusion -> classifier.
//
// Element-wise and MCB fusions consume the two proj-dimensional reductions;
// MUTAN replaces those reductions with its own W_q / W_v and reads the raw
// feature vectors. projection_free additionally drops the reductions for the
// element-wise head (used by the synthetic representation-gap task) and
// requires n_img == n_txt.
struct ModelSpec {
    std::size_t n_img = 2048;
    std::size_t n_txt = 2400;
    std::size_t proj = 1200;
    bool projection_free = false;
    FusionKind fusion = FusionKind::Elementwise;
    std::size_t mcb_d = 8000;
    MutanDims mutan;
    std::size_t hidden = 256;
    HiddenAct hidden_act = HiddenAct::Tanh;
    std::size_t classes = 9;

    bool has_projections() const;
    std::size_t fusion_input_q() const;  // question-side fusion input dim
    std::size_t fusion_input_v() const;
    std::size_t fusion_output_dim() const;
    void validate() const;  // throws ConfigError naming the offending dims
};

// Every learnable scalar lives in exactly one of the tensors below; the MCB
// sketches are configuration, not parameters.
struct ModelParams {
    ModelSpec spec;
    std::uint64_t seed = 0;

    Tensor proj_txt_w, proj_txt_b;  // [proj x n_txt], [proj]
    Tensor proj_img_w, proj_img_b;  // [proj x n_img], [proj]
    std::optional<McbConfig> mcb;
    std::optional<MutanParams> mutan;
    Tensor cls_hidden_w, cls_hidden_b;  // [hidden x fusion_out], [hidden]
    Tensor cls_out_w, cls_out_b;        // [classes x hidden], [classes]

    // Visits every learnable tensor in a fixed, documented order.
    void for_each_tensor(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each_tensor(
        const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::size_t stored_scalar_count() const;
};

ModelParams build_model(const ModelSpec& spec, Rng& rng);

// logits = W_out act(W_h fuse(q, v) + b_h) + b_out, where (q, v) are the
// projected (or raw) text and image features and act is the configured
// hidden nonlinearity (tanh by default). Rejects non-finite inputs.
Tensor forward(const ModelParams& params, const Tensor& img_feat, const Tensor& txt_feat);

// Forward pass with the intermediates needed for backprop.
struct ForwardTrace {
    Tensor q_in, v_in;     // fusion inputs
    Tensor fused;
    Tensor hidden_act;     // act(W_h fused + b_h)
    Tensor logits;
};
ForwardTrace forward_trace(const ModelParams& params, const Tensor& img_feat,
                           const Tensor& txt_feat);

// Gradients of <grad_logits, logits> wrt every learnable tensor, in a
// ModelParams-shaped container (sketches absent).
ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     const Tensor& grad_logits, const Tensor& img_feat,
                     const Tensor& txt_feat);

// Exact per-block learned-parameter audit. Strict mode excludes the MUTAN
// projection biases (the fusion equations are pure matrix products; the
// affine variant is the default).
enum class CountMode { Full, Strict };
struct ParamBreakdown {
    std::vector<std::pair<std::string, std::size_t>> blocks;
    std::size_t total = 0;
};
ParamBreakdown count_params(const ModelSpec& spec, CountMode mode = CountMode::Full);
void write_breakdown_csv(const ParamBreakdown& b, std::ostream& out);

// Checkpoint: manifest header + sketches (MCB) + tensor container.
// load(save(p)) is bit-exact. Format documented in docs/formats.md.
void save_model(const ModelParams& params, std::ostream& out);
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(std::istream& in);
ModelParams load_model(const std::string& path);

// Bundled head geometries used by the parameter tables and the CLI.
struct TablePreset {
    std::string name;
    ModelSpec spec;
};
// which: "lr" (9 answer classes) or "hr" (55 answer classes); each returns
// the element-wise, MCB (d = 8000) and MUTAN variants.
std::vector<TablePreset> table_presets(const std::string& which);
// MCB fusion-output sweep used by the ablation table.
const std::vector<std::size_t>& ablation_dims();

}  // namespace fusionbench
