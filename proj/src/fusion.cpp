#include "fusionbench/fusion.hpp"

#include <cmath>
#include <string>

#include "fusionbench/errors.hpp"

namespace fusionbench {

const char* fusion_kind_name(FusionKind kind) {
    switch (kind) {
    case FusionKind::Elementwise: return "elementwise";
    case FusionKind::Mcb: return "mcb";
    case FusionKind::Mutan: return "mutan";
    }
    return "?";
}

FusionKind fusion_kind_from_name(const std::string& name) {
    if (name == "elementwise") return FusionKind::Elementwise;
    if (name == "mcb") return FusionKind::Mcb;
    if (name == "mutan") return FusionKind::Mutan;
    throw ParameterError("unknown fusion kind '" + name + "'");
}

McbConfig make_mcb_config(std::size_t n, std::size_t d, std::uint64_t master_seed) {
    McbConfig cfg;
    cfg.n = n;
    cfg.d = d;
    Rng rng_q(master_seed);
    Rng rng_v(master_seed + 1);
    cfg.spec_q = make_sketch(n, d, rng_q);
    cfg.spec_v = make_sketch(n, d, rng_v);
    return cfg;
}

std::size_t MutanParams::param_count() const {
    const std::size_t r = rank();
    return n_q() * t_q() + t_q() + n_v() * t_v() + t_v() +
           r * (t_q() * t_o() + t_v() * t_o());
}

std::size_t MutanParams::stored_scalar_count() const {
    std::size_t total = w_q.numel() + b_q.numel() + w_v.numel() + b_v.numel();
    for (const Tensor& t : m) total += t.numel();
    for (const Tensor& t : n) total += t.numel();
    return total;
}

void MutanParams::validate() const {
    if (m.empty() || n.size() != m.size()) {
        throw ParameterError("mutan: core rank must be >= 1 with matching M/N slices");
    }
    for (const Tensor& t : m) {
        if (t.rank() != 2 || t.dim(0) != t_q() || t.dim(1) != t_o()) {
            throw DimensionError("mutan: M slice shape " + shape_str(t) +
                                 " inconsistent with [t_q x t_o]");
        }
    }
    for (const Tensor& t : n) {
        if (t.rank() != 2 || t.dim(0) != t_v() || t.dim(1) != t_o()) {
            throw DimensionError("mutan: N slice shape " + shape_str(t) +
                                 " inconsistent with [t_v x t_o]");
        }
    }
    if (b_q.rank() != 1 || b_q.dim(0) != t_q() || b_v.rank() != 1 || b_v.dim(0) != t_v()) {
        throw DimensionError("mutan: bias shapes inconsistent with projections");
    }
}

MutanParams init_mutan(Rng& rng, std::size_t n_q, std::size_t n_v, std::size_t t_q,
                       std::size_t t_v, std::size_t t_o, std::size_t r) {
    if (n_q < 1 || n_v < 1 || t_q < 1 || t_v < 1 || t_o < 1) {
        throw ParameterError("init_mutan: all dimensions must be >= 1");
    }
    if (r < 1) {
        throw ParameterError("init_mutan: core rank R must be >= 1");
    }
    MutanParams p;
    p.w_q = gaussian_tensor(rng, {n_q, t_q}, 1.0 / std::sqrt(static_cast<double>(n_q)));
    p.b_q = Tensor::zeros({t_q});
    p.w_v = gaussian_tensor(rng, {n_v, t_v}, 1.0 / std::sqrt(static_cast<double>(n_v)));
    p.b_v = Tensor::zeros({t_v});
    p.m.reserve(r);
    p.n.reserve(r);
    for (std::size_t i = 0; i < r; ++i) {
        p.m.push_back(gaussian_tensor(rng, {t_q, t_o},
                                      1.0 / std::sqrt(static_cast<double>(t_q))));
    }
    for (std::size_t i = 0; i < r; ++i) {
        p.n.push_back(gaussian_tensor(rng, {t_v, t_o},
                                      1.0 / std::sqrt(static_cast<double>(t_v))));
    }
    return p;
}

Tensor fuse_elementwise(const Tensor& q, const Tensor& v) {
    return hadamard(q, v);
}

Tensor fuse_mcb(const McbConfig& cfg, const Tensor& q, const Tensor& v, ConvMode mode,
                McbOutput output) {
    Tensor y = circular_convolve(apply_sketch(cfg.spec_q, q),
                                 apply_sketch(cfg.spec_v, v), mode);
    if (output == McbOutput::SignedSqrtL2) {
        double norm_sq = 0.0;
        for (double& e : y.data()) {
            e = (e < 0.0 ? -1.0 : 1.0) * std::sqrt(std::abs(e));
            norm_sq += e * e;
        }
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (double& e : y.data()) {
                e *= inv;
            }
        }
    }
    return y;
}

ConvMode default_conv_mode(std::size_t d) {
    return d < 64 ? ConvMode::Direct : ConvMode::Frequency;
}

Tensor fuse_mcb(const McbConfig& cfg, const Tensor& q, const Tensor& v) {
    return fuse_mcb(cfg, q, v, default_conv_mode(cfg.d));
}

namespace {

Tensor activate(const Tensor& pre, MutanActivation act) {
    return act == MutanActivation::Tanh ? tanh_map(pre) : pre;
}

}  // namespace

Tensor fuse_mutan(const MutanParams& p, const Tensor& q, const Tensor& v,
                  MutanActivation act) {
    const Tensor qt = activate(vecmat(q, p.w_q, p.b_q), act);
    const Tensor vt = activate(vecmat(v, p.w_v, p.b_v), act);
    Tensor z = Tensor::zeros({p.t_o()});
    for (std::size_t r = 0; r < p.rank(); ++r) {
        const Tensor mq = vecmat(qt, p.m[r]);
        const Tensor mv = vecmat(vt, p.n[r]);
        for (std::size_t c = 0; c < z.numel(); ++c) {
            z[c] += mq[c] * mv[c];
        }
    }
    return z;
}

FusionVjp fusion_vjp(const Tensor& q, const Tensor& v, const Tensor& upstream) {
    if (!upstream.same_shape(q)) {
        throw DimensionError("fusion_vjp: upstream shape " + shape_str(upstream) +
                             " does not match output shape " + shape_str(q));
    }
    return {hadamard(upstream, v), hadamard(upstream, q)};
}

namespace {

// x reversed around the circle: out[k] = x[(d - k) mod d].
Tensor reverse_circular(const Tensor& x) {
    const std::size_t d = x.dim(0);
    Tensor out = Tensor::zeros({d});
    out[0] = x[0];
    for (std::size_t k = 1; k < d; ++k) {
        out[k] = x[d - k];
    }
    return out;
}

}  // namespace

FusionVjp fusion_vjp(const McbConfig& cfg, const Tensor& q, const Tensor& v,
                     const Tensor& upstream, ConvMode mode) {
    if (upstream.rank() != 1 || upstream.dim(0) != cfg.d) {
        throw DimensionError("fusion_vjp: upstream shape " + shape_str(upstream) +
                             " does not match sketch output dimension " +
                             std::to_string(cfg.d));
    }
    const Tensor a = apply_sketch(cfg.spec_q, q);
    const Tensor b = apply_sketch(cfg.spec_v, v);
    // Convolution is bilinear; grad wrt one factor is a circular correlation
    // with the other, i.e. convolution with the circular reversal.
    const Tensor grad_a = circular_convolve(upstream, reverse_circular(b), mode);
    const Tensor grad_b = circular_convolve(upstream, reverse_circular(a), mode);
    return {apply_sketch_transpose(cfg.spec_q, grad_a),
            apply_sketch_transpose(cfg.spec_v, grad_b)};
}

MutanVjp fusion_vjp(const MutanParams& p, const Tensor& q, const Tensor& v,
                    const Tensor& upstream) {
    if (upstream.rank() != 1 || upstream.dim(0) != p.t_o()) {
        throw DimensionError("fusion_vjp: upstream shape " + shape_str(upstream) +
                             " does not match fusion output dimension " +
                             std::to_string(p.t_o()));
    }
    const Tensor pre_q = vecmat(q, p.w_q, p.b_q);
    const Tensor pre_v = vecmat(v, p.w_v, p.b_v);
    const Tensor qt = tanh_map(pre_q);
    const Tensor vt = tanh_map(pre_v);

    MutanVjp out;
    out.grad_params.w_q = Tensor::zeros(p.w_q.shape());
    out.grad_params.b_q = Tensor::zeros(p.b_q.shape());
    out.grad_params.w_v = Tensor::zeros(p.w_v.shape());
    out.grad_params.b_v = Tensor::zeros(p.b_v.shape());

    Tensor grad_qt = Tensor::zeros(qt.shape());
    Tensor grad_vt = Tensor::zeros(vt.shape());
    for (std::size_t r = 0; r < p.rank(); ++r) {
        const Tensor mq = vecmat(qt, p.m[r]);
        const Tensor mv = vecmat(vt, p.n[r]);
        const Tensor g_mq = hadamard(upstream, mv);
        const Tensor g_mv = hadamard(upstream, mq);
        out.grad_params.m.push_back(outer(qt, g_mq));
        out.grad_params.n.push_back(outer(vt, g_mv));
        grad_qt = add(grad_qt, matvec(p.m[r], g_mq));
        grad_vt = add(grad_vt, matvec(p.n[r], g_mv));
    }

    // tanh' = 1 - tanh^2
    Tensor grad_pre_q = grad_qt;
    for (std::size_t i = 0; i < grad_pre_q.numel(); ++i) {
        grad_pre_q[i] *= 1.0 - qt[i] * qt[i];
    }
    Tensor grad_pre_v = grad_vt;
    for (std::size_t i = 0; i < grad_pre_v.numel(); ++i) {
        grad_pre_v[i] *= 1.0 - vt[i] * vt[i];
    }

    out.grad_params.b_q = grad_pre_q;
    out.grad_params.b_v = grad_pre_v;
    out.grad_params.w_q = outer(q, grad_pre_q);
    out.grad_params.w_v = outer(v, grad_pre_v);
    out.grad_q = matvec(p.w_q, grad_pre_q);
    out.grad_v = matvec(p.w_v, grad_pre_v);
    return out;
}

FullBilinearOracle FullBilinearOracle::from_mutan(const MutanParams& p) {
    FullBilinearOracle oracle;
    oracle.core = Tensor::zeros({p.t_q(), p.t_v(), p.t_o()});
    for (std::size_t r = 0; r < p.rank(); ++r) {
        for (std::size_t a = 0; a < p.t_q(); ++a) {
            for (std::size_t b = 0; b < p.t_v(); ++b) {
                for (std::size_t c = 0; c < p.t_o(); ++c) {
                    oracle.core.at(a, b, c) += p.m[r].at(a, c) * p.n[r].at(b, c);
                }
            }
        }
    }
    return oracle;
}

Tensor FullBilinearOracle::contract(const Tensor& qt, const Tensor& vt) const {
    const std::size_t tq = core.dim(0), tv = core.dim(1), to = core.dim(2);
    if (qt.dim(0) != tq || vt.dim(0) != tv) {
        throw DimensionError("bilinear oracle: input shapes " + shape_str(qt) + ", " +
                             shape_str(vt) + " do not match core " + shape_str(core));
    }
    Tensor z = Tensor::zeros({to});
    for (std::size_t a = 0; a < tq; ++a) {
        for (std::size_t b = 0; b < tv; ++b) {
            const double qv = qt[a] * vt[b];
            for (std::size_t c = 0; c < to; ++c) {
                z[c] += qv * core.at(a, b, c);
            }
        }
    }
    return z;
}

}  // namespace fusionbench
