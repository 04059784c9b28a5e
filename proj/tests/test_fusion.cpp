#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fusionbench/errors.hpp"
#include "fusionbench/fusion.hpp"
#include "fusionbench/gradcheck.hpp"
#include "test_support.hpp"

using namespace fusionbench;
using testsupport::gaussian_vec;
using testsupport::rel_linf;

TEST_CASE("fuse_elementwise examples and loop oracle") {
    CHECK(fuse_elementwise(Tensor::vector({1, 1, 1}), Tensor::vector({2, 3, 4})) ==
          Tensor::vector({2, 3, 4}));
    CHECK(fuse_elementwise(Tensor::zeros({4}), Tensor::vector({1, 2, 3, 4})) ==
          Tensor::zeros({4}));
    CHECK_THROWS_AS(fuse_elementwise(Tensor::zeros({3}), Tensor::zeros({4})),
                    DimensionError);

    Rng rng(3);
    const Tensor q = gaussian_vec(rng, 1200);
    const Tensor v = gaussian_vec(rng, 1200);
    const Tensor fused = fuse_elementwise(q, v);
    for (std::size_t i = 0; i < 1200; ++i) {
        CHECK(fused[i] == q[i] * v[i]);
    }
}

TEST_CASE("make_mcb_config derives per-modality seeds by fixed offsets") {
    const McbConfig cfg = make_mcb_config(8, 16, 1000);
    CHECK(cfg.spec_q.seed == 1000);
    CHECK(cfg.spec_v.seed == 1001);
    CHECK(cfg.spec_q.n == 8);
    CHECK(cfg.spec_v.d == 16);
    CHECK(cfg.spec_q.h != cfg.spec_v.h);
}

TEST_CASE("fuse_mcb is zero on zero inputs") {
    const McbConfig cfg = make_mcb_config(6, 12, 7);
    Rng rng(8);
    const Tensor v = gaussian_vec(rng, 6);
    CHECK(rel_linf(fuse_mcb(cfg, Tensor::zeros({6}), v), Tensor::zeros({12})) == 0.0);
    CHECK(rel_linf(fuse_mcb(cfg, v, Tensor::zeros({6})), Tensor::zeros({12})) == 0.0);
}

TEST_CASE("fuse_mcb single-term hand evaluation") {
    // Sketches place q at bucket 1 (+) and v at bucket 3 (-); convolution
    // shifts to bucket ((1-1)+(3-1)) mod 4 = 2, value -(2*5) = -10.
    McbConfig cfg;
    cfg.n = 1;
    cfg.d = 4;
    cfg.spec_q = SketchSpec{1, 4, {1}, {1}, 0};
    cfg.spec_v = SketchSpec{1, 4, {-1}, {3}, 0};
    for (ConvMode mode : {ConvMode::Direct, ConvMode::Frequency}) {
        const Tensor out = fuse_mcb(cfg, Tensor::vector({2}), Tensor::vector({5}), mode);
        CHECK(rel_linf(out, Tensor::vector({0, 0, -10, 0})) < 1e-12);
    }
}

TEST_CASE("fuse_mcb equals the outer-product sketch oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const McbConfig cfg = make_mcb_config(4, 8, rng.next_u64());
        const Tensor q = gaussian_vec(rng, 4);
        const Tensor v = gaussian_vec(rng, 4);
        const Tensor oracle = outer_sketch_oracle(cfg.spec_q, cfg.spec_v, q, v);
        CHECK(rel_linf(fuse_mcb(cfg, q, v, ConvMode::Direct), oracle) < 1e-9);
        CHECK(rel_linf(fuse_mcb(cfg, q, v, ConvMode::Frequency), oracle) < 1e-9);
    }
}

TEST_CASE("fuse_mutan trivial cases") {
    Rng rng(5);
    MutanParams p = init_mutan(rng, 3, 4, 3, 3, 2, 2);
    // Biases are zero at init, so tanh(0) = 0 propagates.
    CHECK(fuse_mutan(p, Tensor::zeros({3}), Tensor::zeros({4})) == Tensor::zeros({2}));

    // R = 1, t_o = 1, all-ones slices: z = sum(qt) * sum(vt).
    MutanParams ones;
    ones.w_q = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
    ones.b_q = Tensor::zeros({3});
    ones.w_v = Tensor::matrix(2, 2, {1, 0, 0, 1});
    ones.b_v = Tensor::zeros({2});
    ones.m = {Tensor::matrix(3, 1, {1, 1, 1})};
    ones.n = {Tensor::matrix(2, 1, {1, 1})};
    const Tensor q = Tensor::vector({0.3, -0.2});
    const Tensor v = Tensor::vector({0.1, 0.4});
    const Tensor z = fuse_mutan(ones, q, v);
    const double qt_sum = std::tanh(0.3) + std::tanh(-0.2) + std::tanh(0.0);
    const double vt_sum = std::tanh(0.1) + std::tanh(0.4);
    CHECK(std::abs(z[0] - qt_sum * vt_sum) < 1e-14);
}

TEST_CASE("fuse_mutan equals brute-force contraction with the reconstructed core") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        MutanParams p = init_mutan(rng, 3, 4, 3, 4, 2, 2);
        const Tensor q = gaussian_vec(rng, 3);
        const Tensor v = gaussian_vec(rng, 4);
        const Tensor z = fuse_mutan(p, q, v);

        const FullBilinearOracle oracle = FullBilinearOracle::from_mutan(p);
        const Tensor qt = tanh_map(vecmat(q, p.w_q, p.b_q));
        const Tensor vt = tanh_map(vecmat(v, p.w_v, p.b_v));
        CHECK(rel_linf(z, oracle.contract(qt, vt)) < 1e-10);
    }
}

TEST_CASE("all fusions are bilinear") {
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = rng.next_gaussian(1.0), b = rng.next_gaussian(1.0);

        auto check_bilinear = [&](auto&& fuse, std::size_t nq, std::size_t nv) {
            const Tensor q1 = gaussian_vec(rng, nq), q2 = gaussian_vec(rng, nq);
            const Tensor v1 = gaussian_vec(rng, nv), v2 = gaussian_vec(rng, nv);
            const Tensor lhs_q = fuse(add(scale(q1, a), scale(q2, b)), v1);
            const Tensor rhs_q = add(scale(fuse(q1, v1), a), scale(fuse(q2, v1), b));
            CHECK(rel_linf(lhs_q, rhs_q) < 1e-10);
            const Tensor lhs_v = fuse(q1, add(scale(v1, a), scale(v2, b)));
            const Tensor rhs_v = add(scale(fuse(q1, v1), a), scale(fuse(q1, v2), b));
            CHECK(rel_linf(lhs_v, rhs_v) < 1e-10);
        };

        check_bilinear([](const Tensor& q, const Tensor& v) {
            return fuse_elementwise(q, v);
        }, 6, 6);

        const McbConfig cfg = make_mcb_config(6, 10, rng.next_u64());
        check_bilinear([&](const Tensor& q, const Tensor& v) {
            return fuse_mcb(cfg, q, v, ConvMode::Direct);
        }, 6, 6);

        // MUTAN with the test-only identity activation.
        MutanParams p = init_mutan(rng, 4, 5, 3, 3, 2, 2);
        check_bilinear([&](const Tensor& q, const Tensor& v) {
            return fuse_mutan(p, q, v, MutanActivation::Identity);
        }, 4, 5);
    }
}

TEST_CASE("elementwise vjp is the product rule, exactly") {
    Rng rng(44);
    const Tensor q = gaussian_vec(rng, 8);
    const Tensor v = gaussian_vec(rng, 8);
    const Tensor up = gaussian_vec(rng, 8);
    const FusionVjp vjp = fusion_vjp(q, v, up);
    CHECK(vjp.grad_q == hadamard(up, v));
    CHECK(vjp.grad_v == hadamard(up, q));
}

TEST_CASE("mcb vjp matches central finite differences") {
    const GradcheckResult res = gradcheck_fusion(FusionKind::Mcb, 100, 1234);
    CHECK(res.all_finite);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("mutan vjp matches central finite differences") {
    const GradcheckResult res = gradcheck_fusion(FusionKind::Mutan, 100, 4321);
    CHECK(res.all_finite);
    CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("elementwise vjp matches central finite differences") {
    const GradcheckResult res = gradcheck_fusion(FusionKind::Elementwise, 100, 777);
    CHECK(res.all_finite);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("init_mutan determinism and statistics") {
    Rng a(9), b(9);
    const MutanParams pa = init_mutan(a, 4, 4, 3, 3, 2, 2);
    const MutanParams pb = init_mutan(b, 4, 4, 3, 3, 2, 2);
    CHECK(pa.w_q == pb.w_q);
    CHECK(pa.m[1] == pb.m[1]);

    for (double v : pa.b_q.data()) CHECK(v == 0.0);
    for (double v : pa.b_v.data()) CHECK(v == 0.0);

    // Empirical std within 10% of 1/sqrt(fan-in) once fan-in >= 256.
    Rng big(10);
    const MutanParams pw = init_mutan(big, 400, 300, 64, 64, 8, 1);
    auto sample_std = [](const Tensor& t) {
        double mean = 0.0;
        for (double v : t.data()) mean += v;
        mean /= static_cast<double>(t.numel());
        double var = 0.0;
        for (double v : t.data()) var += (v - mean) * (v - mean);
        return std::sqrt(var / static_cast<double>(t.numel() - 1));
    };
    CHECK(std::abs(sample_std(pw.w_q) - 1.0 / std::sqrt(400.0)) < 0.1 / std::sqrt(400.0));
    CHECK(std::abs(sample_std(pw.w_v) - 1.0 / std::sqrt(300.0)) < 0.1 / std::sqrt(300.0));
}

TEST_CASE("init_mutan rejects degenerate configurations") {
    Rng rng(1);
    CHECK_THROWS_AS(init_mutan(rng, 4, 4, 3, 3, 2, 0), ParameterError);
    CHECK_THROWS_AS(init_mutan(rng, 0, 4, 3, 3, 2, 1), ParameterError);
}

TEST_CASE("mutan parameter-count formula matches stored scalars exactly") {
    Rng rng(70);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t nq = rng.next_index(6), nv = rng.next_index(6);
        const std::size_t tq = rng.next_index(5), tv = rng.next_index(5);
        const std::size_t to = rng.next_index(5), r = rng.next_index(4);
        const MutanParams p = init_mutan(rng, nq, nv, tq, tv, to, r);
        CHECK(p.param_count() == p.stored_scalar_count());
        CHECK(p.param_count() ==
              nq * tq + tq + nv * tv + tv + r * (tq * to + tv * to));
    }
}
