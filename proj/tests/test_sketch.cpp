#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fusionbench/errors.hpp"
#include "fusionbench/sketch.hpp"
#include "test_support.hpp"

using namespace fusionbench;
using testsupport::gaussian_vec;
using testsupport::rel_linf;

TEST_CASE("make_sketch degenerate size and value ranges") {
    Rng rng(5);
    const SketchSpec spec = make_sketch(1, 4, rng);
    REQUIRE(spec.s.size() == 1);
    REQUIRE(spec.h.size() == 1);
    CHECK((spec.s[0] == 1 || spec.s[0] == -1));
    CHECK(spec.h[0] >= 1);
    CHECK(spec.h[0] <= 4);
    CHECK(spec.seed == 5);
}

TEST_CASE("make_sketch is deterministic from seed") {
    Rng a(77), b(77);
    const SketchSpec sa = make_sketch(64, 16, a);
    const SketchSpec sb = make_sketch(64, 16, b);
    CHECK(sa.s == sb.s);
    CHECK(sa.h == sb.h);
}

TEST_CASE("make_sketch rejects zero dimensions") {
    Rng rng(1);
    CHECK_THROWS_AS(make_sketch(0, 4, rng), ParameterError);
    CHECK_THROWS_AS(make_sketch(4, 0, rng), ParameterError);
}

TEST_CASE("bucket occupancy is near-uniform") {
    // n/d = 625 per bucket, allowed band 625 +- 5*sqrt(625) = [500, 750].
    Rng rng(123);
    const SketchSpec spec = make_sketch(10000, 16, rng);
    std::vector<std::size_t> counts(16, 0);
    for (auto b : spec.h) {
        counts[b - 1] += 1;
    }
    for (std::size_t c : counts) {
        CHECK(c >= 500);
        CHECK(c <= 750);
    }
}

TEST_CASE("apply_sketch examples") {
    SketchSpec one{1, 3, {1}, {2}, 0};
    CHECK(apply_sketch(one, Tensor::vector({5})) == Tensor::vector({0, 5, 0}));

    // Collision in bucket 1: +2 - 3 = -1.
    SketchSpec coll{3, 4, {1, -1, 1}, {1, 1, 3}, 0};
    CHECK(apply_sketch(coll, Tensor::vector({2, 3, 4})) ==
          Tensor::vector({-1, 0, 4, 0}));

    CHECK(apply_sketch(coll, Tensor::vector({0, 0, 0})) ==
          Tensor::vector({0, 0, 0, 0}));

    CHECK_THROWS_AS(apply_sketch(coll, Tensor::vector({1, 2})), DimensionError);
}

TEST_CASE("apply_sketch is linear") {
    Rng rng(17);
    const SketchSpec spec = make_sketch(24, 8, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = gaussian_vec(rng, 24);
        const Tensor y = gaussian_vec(rng, 24);
        const double a = rng.next_gaussian(1.0), b = rng.next_gaussian(1.0);
        const Tensor lhs = apply_sketch(spec, add(scale(x, a), scale(y, b)));
        const Tensor rhs = add(scale(apply_sketch(spec, x), a),
                               scale(apply_sketch(spec, y), b));
        CHECK(rel_linf(lhs, rhs) < 1e-12);
    }
}

TEST_CASE("sketched inner products are unbiased") {
    Rng data_rng(31);
    const Tensor x = gaussian_vec(data_rng, 16);
    const Tensor y = gaussian_vec(data_rng, 16);
    const double exact = dot(x, y);

    const int reps = 1000;
    std::vector<double> estimates(reps);
    for (int i = 0; i < reps; ++i) {
        Rng rng(1000 + i);
        const SketchSpec spec = make_sketch(16, 64, rng);
        estimates[i] = dot(apply_sketch(spec, x), apply_sketch(spec, y));
    }
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= reps;
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= (reps - 1);
    const double stderr_mean = std::sqrt(var / reps);
    CHECK(std::abs(mean - exact) < 3.0 * stderr_mean);
}

TEST_CASE("outer sketch oracle trivial cases") {
    Rng rq(40), rv(41);
    const SketchSpec sq = make_sketch(4, 8, rq);
    const SketchSpec sv = make_sketch(4, 8, rv);

    const Tensor zero = Tensor::zeros({4});
    Rng rng(42);
    const Tensor q = gaussian_vec(rng, 4);
    CHECK(outer_sketch_oracle(sq, sv, zero, q) == Tensor::zeros({8}));
    CHECK(outer_sketch_oracle(sq, sv, q, zero) == Tensor::zeros({8}));

    // n = 1: single term lands at ((h_q + h_v - 2) mod d) + 1.
    SketchSpec sq1{1, 5, {-1}, {4}, 0};
    SketchSpec sv1{1, 5, {1}, {3}, 0};
    const Tensor out = outer_sketch_oracle(sq1, sv1, Tensor::vector({2}),
                                           Tensor::vector({7}));
    Tensor expect = Tensor::zeros({5});
    expect[(4 + 3 - 2) % 5] = -1.0 * 2.0 * 7.0;
    CHECK(out == expect);
}

TEST_CASE("outer sketch oracle rejects mismatched output dims") {
    Rng rq(1), rv(2);
    const SketchSpec sq = make_sketch(4, 8, rq);
    const SketchSpec sv = make_sketch(4, 16, rv);
    Rng rng(3);
    const Tensor q = gaussian_vec(rng, 4);
    CHECK_THROWS_AS(outer_sketch_oracle(sq, sv, q, q), ParameterError);
}

TEST_CASE("convolution theorem: sketch-then-convolve equals outer-product sketch") {
    Rng rng(55);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = rng.next_index(16);
        const std::size_t d = rng.next_index(32);
        Rng rq(rng.next_u64());
        Rng rv(rng.next_u64());
        const SketchSpec sq = make_sketch(n, d, rq);
        const SketchSpec sv = make_sketch(n, d, rv);
        const Tensor q = gaussian_vec(rng, n);
        const Tensor v = gaussian_vec(rng, n);
        const Tensor oracle = outer_sketch_oracle(sq, sv, q, v);
        const Tensor via_conv = circular_convolve(apply_sketch(sq, q),
                                                  apply_sketch(sv, v), ConvMode::Direct);
        CHECK(rel_linf(via_conv, oracle) < 1e-9);
    }
}

TEST_CASE("sketch transpose is the adjoint of apply") {
    Rng rng(60);
    const SketchSpec spec = make_sketch(12, 6, rng);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = gaussian_vec(rng, 12);
        const Tensor y = gaussian_vec(rng, 6);
        const double lhs = dot(apply_sketch(spec, x), y);
        const double rhs = dot(x, apply_sketch_transpose(spec, y));
        CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("sketch save/load round trip and exact byte layout") {
    SketchSpec spec{3, 4, {1, -1, 1}, {1, 4, 2}, 99};
    std::ostringstream out;
    save_sketch(spec, out);
    CHECK(out.str() == "3 4 99\n1 -1 1\n1 4 2\n");

    std::istringstream in(out.str());
    const SketchSpec loaded = load_sketch(in);
    CHECK(loaded.n == spec.n);
    CHECK(loaded.d == spec.d);
    CHECK(loaded.seed == spec.seed);
    CHECK(loaded.s == spec.s);
    CHECK(loaded.h == spec.h);
}

TEST_CASE("sketch load rejects malformed records") {
    {
        std::istringstream in("3 4 99\n1 -1 1\n");  // missing bucket line
        CHECK_THROWS_AS(load_sketch(in), ParseError);
    }
    {
        std::istringstream in("3 4 99\n1 2 1\n1 4 2\n");  // sign not in {-1, 1}
        CHECK_THROWS_AS(load_sketch(in), ParseError);
    }
    {
        std::istringstream in("3 4 99\n1 -1 1\n1 9 2\n");  // bucket out of range
        CHECK_THROWS_AS(load_sketch(in), ValidationError);
    }
}
