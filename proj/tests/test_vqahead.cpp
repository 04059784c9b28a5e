#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fusionbench/errors.hpp"
#include "fusionbench/synth.hpp"
#include "fusionbench/vqahead.hpp"
#include "test_support.hpp"

using namespace fusionbench;
using testsupport::gaussian_vec;
using testsupport::rel_linf;
using testsupport::TempDir;

namespace {

ModelSpec lr_baseline() {
    ModelSpec spec;  // defaults are the low-resolution baseline
    return spec;
}

ModelSpec small_spec(FusionKind kind) {
    ModelSpec spec;
    spec.n_img = 5;
    spec.n_txt = 4;
    spec.proj = 3;
    spec.fusion = kind;
    spec.mcb_d = 6;
    spec.mutan = {3, 3, 2, 2};
    spec.hidden = 4;
    spec.classes = 3;
    return spec;
}

std::string checkpoint_string(const ModelParams& p) {
    std::ostringstream out;
    save_model(p, out);
    return out.str();
}

}  // namespace

TEST_CASE("build_model accepts the LR baseline and rejects proj=0") {
    Rng rng(42);
    CHECK_NOTHROW(build_model(lr_baseline(), rng));

    ModelSpec bad = lr_baseline();
    bad.proj = 0;
    Rng rng2(42);
    CHECK_THROWS_AS(build_model(bad, rng2), ConfigError);
}

TEST_CASE("build_model is deterministic: identical checkpoints byte-for-byte") {
    for (FusionKind kind :
         {FusionKind::Elementwise, FusionKind::Mcb, FusionKind::Mutan}) {
        Rng a(7), b(7);
        const ModelParams pa = build_model(small_spec(kind), a);
        const ModelParams pb = build_model(small_spec(kind), b);
        CHECK(checkpoint_string(pa) == checkpoint_string(pb));
    }
}

TEST_CASE("forward maps zero inputs to zero logits (elementwise, zero biases)") {
    Rng rng(1);
    const ModelParams p = build_model(lr_baseline(), rng);
    const Tensor logits = forward(p, Tensor::zeros({2048}), Tensor::zeros({2400}));
    CHECK(logits == Tensor::zeros({9}));
}

TEST_CASE("forward emits one logit per answer class for all fusions on the LR spec") {
    Rng data_rng(2);
    const Tensor img = gaussian_vec(data_rng, 2048);
    const Tensor txt = gaussian_vec(data_rng, 2400);
    for (const TablePreset& preset : table_presets("lr")) {
        Rng rng(3);
        const ModelParams p = build_model(preset.spec, rng);
        const Tensor logits = forward(p, img, txt);
        CHECK(logits.numel() == 9);
        CHECK(logits.all_finite());
    }
}

TEST_CASE("forward rejects bad features") {
    Rng rng(4);
    const ModelParams p = build_model(small_spec(FusionKind::Elementwise), rng);
    CHECK_THROWS_AS(forward(p, Tensor::zeros({6}), Tensor::zeros({4})), DimensionError);
    Tensor img = Tensor::zeros({5});
    img[0] = std::nan("");
    CHECK_THROWS_AS(forward(p, img, Tensor::zeros({4})), ValidationError);
}

TEST_CASE("forward is deterministic") {
    Rng rng(5);
    const ModelParams p = build_model(small_spec(FusionKind::Mcb), rng);
    Rng data_rng(6);
    const Tensor img = gaussian_vec(data_rng, 5);
    const Tensor txt = gaussian_vec(data_rng, 4);
    CHECK(forward(p, img, txt) == forward(p, img, txt));
}

TEST_CASE("end-to-end cross-entropy gradient matches finite differences") {
    for (FusionKind kind :
         {FusionKind::Elementwise, FusionKind::Mcb, FusionKind::Mutan}) {
        Rng rng(8);
        ModelParams p = build_model(small_spec(kind), rng);
        Rng data_rng(9);
        const Tensor img = gaussian_vec(data_rng, 5);
        const Tensor txt = gaussian_vec(data_rng, 4);
        const std::size_t label = 1;

        const ForwardTrace trace = forward_trace(p, img, txt);
        ModelParams grads = backward(p, trace, cross_entropy_grad(trace.logits, label),
                                     img, txt);

        std::vector<Tensor*> params, grad_tensors;
        p.for_each_tensor([&](const std::string&, Tensor& t) { params.push_back(&t); });
        grads.for_each_tensor(
            [&](const std::string&, Tensor& t) { grad_tensors.push_back(&t); });
        REQUIRE(params.size() == grad_tensors.size());

        const double step = 1e-6;
        double max_err = 0.0;
        for (std::size_t t = 0; t < params.size(); ++t) {
            for (std::size_t i = 0; i < params[t]->numel(); ++i) {
                double& coord = (*params[t])[i];
                const double saved = coord;
                coord = saved + step;
                const double up = cross_entropy(forward(p, img, txt), label);
                coord = saved - step;
                const double down = cross_entropy(forward(p, img, txt), label);
                coord = saved;
                const double fd = (up - down) / (2.0 * step);
                const double a = (*grad_tensors[t])[i];
                max_err = std::max(max_err, std::abs(a - fd) /
                                                std::max({1.0, std::abs(a), std::abs(fd)}));
            }
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("count_params reproduces the hand-evaluated totals") {
    // 2048*1200+1200 + 2400*1200+1200 + 1200*256+256 + 256*9+9
    CHECK(count_params(lr_baseline()).total == 5649769);

    ModelSpec mcb16k = lr_baseline();
    mcb16k.fusion = FusionKind::Mcb;
    mcb16k.mcb_d = 16000;
    CHECK(count_params(mcb16k).total == 9438569);

    ModelSpec unit;
    unit.n_img = 1;
    unit.n_txt = 1;
    unit.proj = 1;
    unit.hidden = 1;
    unit.classes = 1;
    CHECK(count_params(unit).total == 8);
}

TEST_CASE("count_params totals equal the sum of blocks") {
    for (const TablePreset& preset : table_presets("lr")) {
        const ParamBreakdown b = count_params(preset.spec);
        std::size_t sum = 0;
        for (const auto& [name, count] : b.blocks) sum += count;
        CHECK(sum == b.total);
    }
}

TEST_CASE("count_params matches exhaustive enumeration on random specs") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        ModelSpec spec;
        spec.n_img = rng.next_index(8);
        spec.n_txt = rng.next_index(8);
        spec.proj = rng.next_index(6);
        spec.hidden = rng.next_index(6);
        spec.classes = 1 + rng.next_index(5);
        const std::uint64_t pick = rng.next_index(3);
        spec.fusion = pick == 1   ? FusionKind::Elementwise
                      : pick == 2 ? FusionKind::Mcb
                                  : FusionKind::Mutan;
        spec.mcb_d = rng.next_index(10);
        spec.mutan = {rng.next_index(4), rng.next_index(4), rng.next_index(4),
                      rng.next_index(3)};
        Rng build_rng(rng.next_u64());
        const ModelParams p = build_model(spec, build_rng);
        CHECK(count_params(spec).total == p.stored_scalar_count());
    }
}

TEST_CASE("ablation increments are exactly (d2 - d1) * hidden") {
    ModelSpec base = lr_baseline();
    base.fusion = FusionKind::Mcb;
    const auto& dims = ablation_dims();
    std::vector<std::size_t> totals;
    for (std::size_t d : dims) {
        ModelSpec spec = base;
        spec.mcb_d = d;
        totals.push_back(count_params(spec).total);
    }
    for (std::size_t i = 1; i < dims.size(); ++i) {
        CHECK(totals[i] - totals[i - 1] == (dims[i] - dims[i - 1]) * base.hidden);
    }
    // Increments from the d = 1200 row.
    CHECK(totals[1] - totals[0] == 716800);
    CHECK(totals[2] - totals[0] == 1740800);
    CHECK(totals[3] - totals[0] == 3788800);
    CHECK(totals[4] - totals[0] == 7884800);
}

TEST_CASE("preset totals stay within tolerance of the published scale") {
    auto within = [](std::size_t total, double target, double tol) {
        return std::abs(static_cast<double>(total) - target) <= tol * target;
    };
    const auto lr = table_presets("lr");
    CHECK(within(count_params(lr[0].spec).total, 5.7e6, 0.03));
    CHECK(within(count_params(lr[1].spec).total, 7.5e6, 0.03));
    CHECK(within(count_params(lr[2].spec).total, 4.4e6, 0.03));
    // MUTAN lands within 5% of 4.4e6.
    CHECK(within(count_params(lr[2].spec).total, 4.4e6, 0.05));

    const auto hr = table_presets("hr");
    CHECK(within(count_params(hr[0].spec).total, 5.7e6, 0.03));
    CHECK(within(count_params(hr[1].spec).total, 7.4e6, 0.03));
    CHECK(within(count_params(hr[2].spec).total, 4.3e6, 0.03));
}

TEST_CASE("breakdown CSV has the documented shape") {
    std::ostringstream out;
    write_breakdown_csv(count_params(lr_baseline()), out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "block,count");
    std::string last;
    while (std::getline(in, line)) last = line;
    CHECK(last == "total,5649769");
}

TEST_CASE("checkpoint round trip is bit-exact for every fusion kind") {
    for (FusionKind kind :
         {FusionKind::Elementwise, FusionKind::Mcb, FusionKind::Mutan}) {
        Rng rng(11);
        const ModelParams p = build_model(small_spec(kind), rng);
        std::stringstream buf;
        save_model(p, buf);
        const ModelParams q = load_model(buf);
        CHECK(checkpoint_string(p) == checkpoint_string(q));
        CHECK(p.proj_txt_w == q.proj_txt_w);
        CHECK(p.cls_out_b == q.cls_out_b);
        if (p.mcb) {
            CHECK(p.mcb->spec_q.h == q.mcb->spec_q.h);
            CHECK(p.mcb->spec_v.s == q.mcb->spec_v.s);
        }
        if (p.mutan) {
            CHECK(p.mutan->m[0] == q.mutan->m[0]);
            CHECK(p.mutan->n[1] == q.mutan->n[1]);
        }
    }
}

TEST_CASE("checkpoint round trip on the LR baseline model") {
    TempDir tmp("ckpt");
    Rng rng(12);
    const ModelParams p = build_model(lr_baseline(), rng);
    const std::string path = (tmp.path() / "lr-baseline.ckpt").string();
    save_model(p, path);
    const ModelParams q = load_model(path);
    CHECK(p.proj_txt_w == q.proj_txt_w);
    CHECK(p.proj_img_w == q.proj_img_w);
    CHECK(p.cls_hidden_w == q.cls_hidden_w);
    CHECK(p.cls_out_w == q.cls_out_w);
    CHECK(p.seed == q.seed);
}

TEST_CASE("checkpoint loader reports corruption with a line number") {
    Rng rng(13);
    const ModelParams p = build_model(small_spec(FusionKind::Elementwise), rng);
    std::string text = checkpoint_string(p);

    // Truncate mid-tensor.
    {
        std::istringstream in(text.substr(0, text.size() / 2));
        try {
            load_model(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
    }

    // Version bump.
    {
        std::string bumped = text;
        bumped.replace(bumped.find("checkpoint 1"), 12, "checkpoint 2");
        std::istringstream in(bumped);
        CHECK_THROWS_AS(load_model(in), VersionError);
    }

    // Manifest/tensor shape disagreement.
    {
        std::string mangled = text;
        const std::string needle = "tensor proj_txt_w 2 3 4";
        const auto pos = mangled.find(needle);
        REQUIRE(pos != std::string::npos);
        mangled.replace(pos, needle.size(), "tensor proj_txt_w 2 3 5");
        std::istringstream in(mangled);
        CHECK_THROWS_AS(load_model(in), ValidationError);
    }
}
