#include "fusionbench/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "fusionbench/errors.hpp"
#include "fusionbench/rng.hpp"

namespace fusionbench {

namespace {

Tensor gaussian_vec(Rng& rng, std::size_t n) {
    return gaussian_tensor(rng, {n}, 1.0);
}

double coord_err(double analytic, double fd) {
    return std::abs(analytic - fd) /
           std::max({1.0, std::abs(analytic), std::abs(fd)});
}

// Central difference of a scalar objective along one stored coordinate.
double central_diff(double* coord, double step, const std::function<double()>& objective) {
    const double saved = *coord;
    *coord = saved + step;
    const double up = objective();
    *coord = saved - step;
    const double down = objective();
    *coord = saved;
    return (up - down) / (2.0 * step);
}

struct InstanceCheck {
    double max_err = 0.0;
    bool finite = true;

    void compare(Tensor& analytic, Tensor& target, double step,
                 const std::function<double()>& objective) {
        for (std::size_t i = 0; i < target.numel(); ++i) {
            const double fd = central_diff(&target[i], step, objective);
            const double a = analytic[i];
            if (!std::isfinite(a) || !std::isfinite(fd)) {
                finite = false;
                return;
            }
            max_err = std::max(max_err, coord_err(a, fd));
        }
    }
};

InstanceCheck check_elementwise(std::uint64_t seed, double step) {
    Rng rng(seed);
    const std::size_t n = rng.next_index(8);
    Tensor q = gaussian_vec(rng, n);
    Tensor v = gaussian_vec(rng, n);
    const Tensor up = gaussian_vec(rng, n);

    FusionVjp vjp = fusion_vjp(q, v, up);
    auto objective = [&] { return dot(up, fuse_elementwise(q, v)); };

    InstanceCheck chk;
    chk.compare(vjp.grad_q, q, step, objective);
    if (chk.finite) chk.compare(vjp.grad_v, v, step, objective);
    return chk;
}

InstanceCheck check_mcb(std::uint64_t seed, double step) {
    Rng rng(seed);
    const std::size_t n = rng.next_index(8);
    const std::size_t d = 1 + rng.next_index(15);
    const McbConfig cfg = make_mcb_config(n, d, rng.next_u64());
    Tensor q = gaussian_vec(rng, n);
    Tensor v = gaussian_vec(rng, n);
    const Tensor up = gaussian_vec(rng, d);

    FusionVjp vjp = fusion_vjp(cfg, q, v, up, ConvMode::Direct);
    auto objective = [&] { return dot(up, fuse_mcb(cfg, q, v, ConvMode::Direct)); };

    InstanceCheck chk;
    chk.compare(vjp.grad_q, q, step, objective);
    if (chk.finite) chk.compare(vjp.grad_v, v, step, objective);
    return chk;
}

InstanceCheck check_mutan(std::uint64_t seed, double step) {
    Rng rng(seed);
    const std::size_t n_q = rng.next_index(4);
    const std::size_t n_v = rng.next_index(4);
    const std::size_t t_q = rng.next_index(4);
    const std::size_t t_v = rng.next_index(4);
    const std::size_t t_o = rng.next_index(4);
    const std::size_t r = rng.next_index(3);
    MutanParams p = init_mutan(rng, n_q, n_v, t_q, t_v, t_o, r);
    Tensor q = gaussian_vec(rng, n_q);
    Tensor v = gaussian_vec(rng, n_v);
    const Tensor up = gaussian_vec(rng, t_o);

    MutanVjp vjp = fusion_vjp(p, q, v, up);
    auto objective = [&] { return dot(up, fuse_mutan(p, q, v)); };

    InstanceCheck chk;
    chk.compare(vjp.grad_q, q, step, objective);
    if (chk.finite) chk.compare(vjp.grad_v, v, step, objective);
    if (chk.finite) chk.compare(vjp.grad_params.w_q, p.w_q, step, objective);
    if (chk.finite) chk.compare(vjp.grad_params.b_q, p.b_q, step, objective);
    if (chk.finite) chk.compare(vjp.grad_params.w_v, p.w_v, step, objective);
    if (chk.finite) chk.compare(vjp.grad_params.b_v, p.b_v, step, objective);
    for (std::size_t i = 0; chk.finite && i < r; ++i) {
        chk.compare(vjp.grad_params.m[i], p.m[i], step, objective);
    }
    for (std::size_t i = 0; chk.finite && i < r; ++i) {
        chk.compare(vjp.grad_params.n[i], p.n[i], step, objective);
    }
    return chk;
}

}  // namespace

GradcheckResult gradcheck_fusion(FusionKind kind, std::size_t trials, std::uint64_t seed,
                                 double step) {
    if (trials < 1) {
        throw ParameterError("gradcheck: trials must be >= 1");
    }
    GradcheckResult result;
    result.worst_seed = seed;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t instance_seed = seed + t;
        InstanceCheck chk;
        switch (kind) {
        case FusionKind::Elementwise: chk = check_elementwise(instance_seed, step); break;
        case FusionKind::Mcb: chk = check_mcb(instance_seed, step); break;
        case FusionKind::Mutan: chk = check_mutan(instance_seed, step); break;
        }
        if (!chk.finite) {
            result.all_finite = false;
            result.worst_seed = instance_seed;
            return result;
        }
        if (chk.max_err > result.max_rel_err) {
            result.max_rel_err = chk.max_err;
            result.worst_seed = instance_seed;
        }
    }
    return result;
}

}  // namespace fusionbench
