#include "fusionbench/vqahead.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fusionbench/errors.hpp"
#include "fusionbench/text_io.hpp"

namespace fusionbench {

const char* hidden_act_name(HiddenAct act) {
    return act == HiddenAct::Tanh ? "tanh" : "relu";
}

HiddenAct hidden_act_from_name(const std::string& name) {
    if (name == "tanh") return HiddenAct::Tanh;
    if (name == "relu") return HiddenAct::Relu;
    throw ParameterError("unknown hidden activation '" + name + "'");
}

bool ModelSpec::has_projections() const {
    return fusion != FusionKind::Mutan && !projection_free;
}

std::size_t ModelSpec::fusion_input_q() const {
    if (fusion == FusionKind::Mutan) return n_txt;
    return projection_free ? n_txt : proj;
}

std::size_t ModelSpec::fusion_input_v() const {
    if (fusion == FusionKind::Mutan) return n_img;
    return projection_free ? n_img : proj;
}

std::size_t ModelSpec::fusion_output_dim() const {
    switch (fusion) {
    case FusionKind::Elementwise: return fusion_input_q();
    case FusionKind::Mcb: return mcb_d;
    case FusionKind::Mutan: return mutan.t_o;
    }
    return 0;
}

void ModelSpec::validate() const {
    if (n_img < 1 || n_txt < 1) {
        throw ConfigError("model: feature dims must be >= 1 (n_img=" +
                          std::to_string(n_img) + ", n_txt=" + std::to_string(n_txt) + ")");
    }
    if (hidden < 1 || classes < 1) {
        throw ConfigError("model: hidden=" + std::to_string(hidden) + " and classes=" +
                          std::to_string(classes) + " must be >= 1");
    }
    if (has_projections() && proj < 1) {
        throw ConfigError("model: projection dim must be >= 1, got proj=" +
                          std::to_string(proj));
    }
    if (projection_free) {
        if (fusion != FusionKind::Elementwise) {
            throw ConfigError("model: projection-free mode is only defined for "
                              "element-wise fusion");
        }
        if (n_img != n_txt) {
            throw ConfigError("model: projection-free element-wise fusion needs "
                              "n_img == n_txt, got " + std::to_string(n_img) + " vs " +
                              std::to_string(n_txt));
        }
    }
    switch (fusion) {
    case FusionKind::Elementwise:
        break;
    case FusionKind::Mcb:
        if (mcb_d < 1) {
            throw ConfigError("model: mcb output dim must be >= 1, got d=" +
                              std::to_string(mcb_d));
        }
        break;
    case FusionKind::Mutan:
        if (mutan.t_q < 1 || mutan.t_v < 1 || mutan.t_o < 1) {
            throw ConfigError("model: mutan dims must be >= 1 (t_q=" +
                              std::to_string(mutan.t_q) + ", t_v=" +
                              std::to_string(mutan.t_v) + ", t_o=" +
                              std::to_string(mutan.t_o) + ")");
        }
        if (mutan.rank < 1) {
            throw ConfigError("model: mutan core rank must be >= 1, got R=" +
                              std::to_string(mutan.rank));
        }
        break;
    }
}

namespace {

Tensor gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    // fan-in = input dimension of the affine map.
    return gaussian_tensor(rng, {rows, cols}, 1.0 / std::sqrt(static_cast<double>(cols)));
}

}  // namespace

ModelParams build_model(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    ModelParams p;
    p.spec = spec;
    p.seed = rng.seed();
    if (spec.has_projections()) {
        p.proj_txt_w = gaussian_matrix(rng, spec.proj, spec.n_txt);
        p.proj_txt_b = Tensor::zeros({spec.proj});
        p.proj_img_w = gaussian_matrix(rng, spec.proj, spec.n_img);
        p.proj_img_b = Tensor::zeros({spec.proj});
    }
    if (spec.fusion == FusionKind::Mcb) {
        p.mcb = make_mcb_config(spec.fusion_input_q(), spec.mcb_d, rng.next_u64());
    } else if (spec.fusion == FusionKind::Mutan) {
        p.mutan = init_mutan(rng, spec.n_txt, spec.n_img, spec.mutan.t_q, spec.mutan.t_v,
                             spec.mutan.t_o, spec.mutan.rank);
    }
    p.cls_hidden_w = gaussian_matrix(rng, spec.hidden, spec.fusion_output_dim());
    p.cls_hidden_b = Tensor::zeros({spec.hidden});
    p.cls_out_w = gaussian_matrix(rng, spec.classes, spec.hidden);
    p.cls_out_b = Tensor::zeros({spec.classes});
    return p;
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, Tensor&)>& fn) {
    if (spec.has_projections()) {
        fn("proj_txt_w", proj_txt_w);
        fn("proj_txt_b", proj_txt_b);
        fn("proj_img_w", proj_img_w);
        fn("proj_img_b", proj_img_b);
    }
    if (mutan) {
        fn("mutan_w_q", mutan->w_q);
        fn("mutan_b_q", mutan->b_q);
        fn("mutan_w_v", mutan->w_v);
        fn("mutan_b_v", mutan->b_v);
        for (std::size_t r = 0; r < mutan->m.size(); ++r) {
            fn("mutan_m" + std::to_string(r), mutan->m[r]);
        }
        for (std::size_t r = 0; r < mutan->n.size(); ++r) {
            fn("mutan_n" + std::to_string(r), mutan->n[r]);
        }
    }
    fn("cls_hidden_w", cls_hidden_w);
    fn("cls_hidden_b", cls_hidden_b);
    fn("cls_out_w", cls_out_w);
    fn("cls_out_b", cls_out_b);
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    auto& self = const_cast<ModelParams&>(*this);
    self.for_each_tensor(
        [&](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
}

std::size_t ModelParams::stored_scalar_count() const {
    std::size_t total = 0;
    for_each_tensor([&](const std::string&, const Tensor& t) { total += t.numel(); });
    return total;
}

namespace {

void check_feature(const Tensor& feat, std::size_t want, const char* name) {
    if (feat.rank() != 1 || feat.dim(0) != want) {
        throw DimensionError(std::string("forward: ") + name + " feature shape " +
                             shape_str(feat) + " does not match expected [" +
                             std::to_string(want) + "]");
    }
    if (!feat.all_finite()) {
        throw ValidationError(std::string("forward: non-finite value in ") + name +
                              " features");
    }
}

}  // namespace

ForwardTrace forward_trace(const ModelParams& params, const Tensor& img_feat,
                           const Tensor& txt_feat) {
    const ModelSpec& spec = params.spec;
    check_feature(img_feat, spec.n_img, "image");
    check_feature(txt_feat, spec.n_txt, "text");

    ForwardTrace t;
    if (spec.has_projections()) {
        t.q_in = matvec(params.proj_txt_w, txt_feat, params.proj_txt_b);
        t.v_in = matvec(params.proj_img_w, img_feat, params.proj_img_b);
    } else {
        t.q_in = txt_feat;
        t.v_in = img_feat;
    }
    switch (spec.fusion) {
    case FusionKind::Elementwise:
        t.fused = fuse_elementwise(t.q_in, t.v_in);
        break;
    case FusionKind::Mcb:
        t.fused = fuse_mcb(*params.mcb, t.q_in, t.v_in);
        break;
    case FusionKind::Mutan:
        t.fused = fuse_mutan(*params.mutan, t.q_in, t.v_in);
        break;
    }
    t.hidden_act = matvec(params.cls_hidden_w, t.fused, params.cls_hidden_b);
    if (spec.hidden_act == HiddenAct::Tanh) {
        t.hidden_act = tanh_map(t.hidden_act);
    } else {
        for (double& v : t.hidden_act.data()) {
            v = v > 0.0 ? v : 0.0;
        }
    }
    t.logits = matvec(params.cls_out_w, t.hidden_act, params.cls_out_b);
    return t;
}

Tensor forward(const ModelParams& params, const Tensor& img_feat, const Tensor& txt_feat) {
    return forward_trace(params, img_feat, txt_feat).logits;
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     const Tensor& grad_logits, const Tensor& img_feat,
                     const Tensor& txt_feat) {
    const ModelSpec& spec = params.spec;
    ModelParams g;
    g.spec = spec;
    g.seed = params.seed;

    g.cls_out_w = outer(grad_logits, trace.hidden_act);
    g.cls_out_b = grad_logits;
    Tensor grad_hidden = vecmat(grad_logits, params.cls_out_w);
    for (std::size_t i = 0; i < grad_hidden.numel(); ++i) {
        const double a = trace.hidden_act[i];
        grad_hidden[i] *= spec.hidden_act == HiddenAct::Tanh ? 1.0 - a * a
                                                             : (a > 0.0 ? 1.0 : 0.0);
    }
    g.cls_hidden_w = outer(grad_hidden, trace.fused);
    g.cls_hidden_b = grad_hidden;
    const Tensor grad_fused = vecmat(grad_hidden, params.cls_hidden_w);

    Tensor grad_q, grad_v;
    switch (spec.fusion) {
    case FusionKind::Elementwise: {
        FusionVjp vjp = fusion_vjp(trace.q_in, trace.v_in, grad_fused);
        grad_q = std::move(vjp.grad_q);
        grad_v = std::move(vjp.grad_v);
        break;
    }
    case FusionKind::Mcb: {
        FusionVjp vjp = fusion_vjp(*params.mcb, trace.q_in, trace.v_in, grad_fused,
                                   default_conv_mode(spec.mcb_d));
        grad_q = std::move(vjp.grad_q);
        grad_v = std::move(vjp.grad_v);
        break;
    }
    case FusionKind::Mutan: {
        MutanVjp vjp = fusion_vjp(*params.mutan, trace.q_in, trace.v_in, grad_fused);
        g.mutan = std::move(vjp.grad_params);
        grad_q = std::move(vjp.grad_q);
        grad_v = std::move(vjp.grad_v);
        break;
    }
    }

    if (spec.has_projections()) {
        g.proj_txt_w = outer(grad_q, txt_feat);
        g.proj_txt_b = grad_q;
        g.proj_img_w = outer(grad_v, img_feat);
        g.proj_img_b = grad_v;
    }
    return g;
}

ParamBreakdown count_params(const ModelSpec& spec, CountMode mode) {
    spec.validate();
    ParamBreakdown b;
    auto block = [&](const std::string& name, std::size_t count) {
        b.blocks.emplace_back(name, count);
        b.total += count;
    };
    if (spec.has_projections()) {
        block("proj_txt", spec.n_txt * spec.proj + spec.proj);
        block("proj_img", spec.n_img * spec.proj + spec.proj);
    }
    switch (spec.fusion) {
    case FusionKind::Elementwise:
    case FusionKind::Mcb:
        block("fusion", 0);
        break;
    case FusionKind::Mutan: {
        const MutanDims& m = spec.mutan;
        const std::size_t bias_q = mode == CountMode::Full ? m.t_q : 0;
        const std::size_t bias_v = mode == CountMode::Full ? m.t_v : 0;
        block("fusion_w_q", spec.n_txt * m.t_q + bias_q);
        block("fusion_w_v", spec.n_img * m.t_v + bias_v);
        block("fusion_core", m.rank * (m.t_q * m.t_o + m.t_v * m.t_o));
        break;
    }
    }
    block("classifier_hidden", spec.fusion_output_dim() * spec.hidden + spec.hidden);
    block("classifier_output", spec.hidden * spec.classes + spec.classes);
    return b;
}

void write_breakdown_csv(const ParamBreakdown& b, std::ostream& out) {
    out << "block,count\n";
    for (const auto& [name, count] : b.blocks) {
        out << name << ',' << count << '\n';
    }
    out << "total," << b.total << '\n';
}

namespace {

constexpr const char* kCheckpointMagic = "fusionbench-checkpoint";
constexpr int kCheckpointVersion = 1;

// Tensor names and shapes derive from the spec alone.
std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_tensors(
    const ModelSpec& spec) {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    if (spec.has_projections()) {
        out.push_back({"proj_txt_w", {spec.proj, spec.n_txt}});
        out.push_back({"proj_txt_b", {spec.proj}});
        out.push_back({"proj_img_w", {spec.proj, spec.n_img}});
        out.push_back({"proj_img_b", {spec.proj}});
    }
    if (spec.fusion == FusionKind::Mutan) {
        const MutanDims& m = spec.mutan;
        out.push_back({"mutan_w_q", {spec.n_txt, m.t_q}});
        out.push_back({"mutan_b_q", {m.t_q}});
        out.push_back({"mutan_w_v", {spec.n_img, m.t_v}});
        out.push_back({"mutan_b_v", {m.t_v}});
        for (std::size_t r = 0; r < m.rank; ++r) {
            out.push_back({"mutan_m" + std::to_string(r), {m.t_q, m.t_o}});
        }
        for (std::size_t r = 0; r < m.rank; ++r) {
            out.push_back({"mutan_n" + std::to_string(r), {m.t_v, m.t_o}});
        }
    }
    out.push_back({"cls_hidden_w", {spec.hidden, spec.fusion_output_dim()}});
    out.push_back({"cls_hidden_b", {spec.hidden}});
    out.push_back({"cls_out_w", {spec.classes, spec.hidden}});
    out.push_back({"cls_out_b", {spec.classes}});
    return out;
}

}  // namespace

void save_model(const ModelParams& params, std::ostream& out) {
    const ModelSpec& spec = params.spec;
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "spec n_img " << spec.n_img << '\n';
    out << "spec n_txt " << spec.n_txt << '\n';
    if (spec.projection_free) {
        out << "spec proj none\n";
    } else {
        out << "spec proj " << spec.proj << '\n';
    }
    out << "spec fusion " << fusion_kind_name(spec.fusion) << '\n';
    if (spec.fusion == FusionKind::Mcb) {
        out << "spec mcb_d " << spec.mcb_d << '\n';
    } else if (spec.fusion == FusionKind::Mutan) {
        out << "spec mutan " << spec.mutan.t_q << ' ' << spec.mutan.t_v << ' '
            << spec.mutan.t_o << ' ' << spec.mutan.rank << '\n';
    }
    out << "spec hidden " << spec.hidden << '\n';
    out << "spec classes " << spec.classes << '\n';
    out << "seed " << params.seed << '\n';
    if (spec.fusion == FusionKind::Mcb) {
        out << "sketch q\n";
        save_sketch(params.mcb->spec_q, out);
        out << "sketch v\n";
        save_sketch(params.mcb->spec_v, out);
    }
    const auto expected = expected_tensors(spec);
    out << "tensors " << expected.size() << '\n';
    params.for_each_tensor([&](const std::string& name, const Tensor& t) {
        write_tensor_record(out, name, t);
    });
}

void save_model(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open '" + path + "' for writing");
    }
    save_model(params, out);
}

namespace {

std::string expect_keyword_line(LineReader& reader, const std::string& keyword) {
    std::string line = reader.require("checkpoint");
    if (line.rfind(keyword + " ", 0) != 0) {
        throw ParseError("expected '" + keyword + " ...' at line " +
                         std::to_string(reader.line()));
    }
    return line.substr(keyword.size() + 1);
}

std::size_t parse_size(const std::string& s, LineReader& reader) {
    try {
        return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
        throw ParseError("bad integer '" + s + "' at line " + std::to_string(reader.line()));
    }
}

}  // namespace

ModelParams load_model(std::istream& in) {
    LineReader reader(in);
    {
        std::string magic = reader.require("checkpoint");
        std::istringstream is(magic);
        std::string tag;
        int version = -1;
        if (!(is >> tag >> version) || tag != kCheckpointMagic) {
            throw ParseError("not a checkpoint file (line 1)");
        }
        if (version != kCheckpointVersion) {
            throw VersionError("unsupported checkpoint version " +
                               std::to_string(version) + " (this build reads version " +
                               std::to_string(kCheckpointVersion) + ")");
        }
    }

    ModelParams p;
    ModelSpec& spec = p.spec;
    spec.n_img = parse_size(expect_keyword_line(reader, "spec n_img"), reader);
    spec.n_txt = parse_size(expect_keyword_line(reader, "spec n_txt"), reader);
    {
        std::string proj = expect_keyword_line(reader, "spec proj");
        if (proj == "none") {
            spec.projection_free = true;
            spec.proj = 1;
        } else {
            spec.proj = parse_size(proj, reader);
        }
    }
    spec.fusion = fusion_kind_from_name(expect_keyword_line(reader, "spec fusion"));
    if (spec.fusion == FusionKind::Mcb) {
        spec.mcb_d = parse_size(expect_keyword_line(reader, "spec mcb_d"), reader);
    } else if (spec.fusion == FusionKind::Mutan) {
        std::istringstream is(expect_keyword_line(reader, "spec mutan"));
        if (!(is >> spec.mutan.t_q >> spec.mutan.t_v >> spec.mutan.t_o >> spec.mutan.rank)) {
            throw ParseError("malformed mutan dims at line " + std::to_string(reader.line()));
        }
    }
    spec.hidden = parse_size(expect_keyword_line(reader, "spec hidden"), reader);
    spec.classes = parse_size(expect_keyword_line(reader, "spec classes"), reader);
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        throw ValidationError(std::string("checkpoint manifest invalid: ") + e.what());
    }
    {
        std::string seed = expect_keyword_line(reader, "seed");
        try {
            p.seed = std::stoull(seed);
        } catch (const std::exception&) {
            throw ParseError("bad seed at line " + std::to_string(reader.line()));
        }
    }

    if (spec.fusion == FusionKind::Mcb) {
        McbConfig cfg;
        cfg.n = spec.fusion_input_q();
        cfg.d = spec.mcb_d;
        if (reader.require("checkpoint") != "sketch q") {
            throw ParseError("expected 'sketch q' at line " + std::to_string(reader.line()));
        }
        std::size_t line = reader.line();
        cfg.spec_q = load_sketch(in, &line);
        reader.advance(line - reader.line());
        if (reader.require("checkpoint") != "sketch v") {
            throw ParseError("expected 'sketch v' at line " + std::to_string(reader.line()));
        }
        line = reader.line();
        cfg.spec_v = load_sketch(in, &line);
        reader.advance(line - reader.line());
        if (cfg.spec_q.n != cfg.n || cfg.spec_q.d != cfg.d || cfg.spec_v.n != cfg.n ||
            cfg.spec_v.d != cfg.d) {
            throw ValidationError("checkpoint sketches disagree with manifest dims");
        }
        p.mcb = std::move(cfg);
    }

    const auto expected = expected_tensors(spec);
    {
        std::string count = expect_keyword_line(reader, "tensors");
        if (parse_size(count, reader) != expected.size()) {
            throw ValidationError("tensor count disagrees with manifest at line " +
                                  std::to_string(reader.line()));
        }
    }
    std::vector<Tensor> loaded;
    loaded.reserve(expected.size());
    for (const auto& [name, shape] : expected) {
        loaded.push_back(read_tensor_record(reader, name, shape));
    }

    if (spec.fusion == FusionKind::Mutan) {
        p.mutan = MutanParams{};
        p.mutan->m.resize(spec.mutan.rank, Tensor::zeros({1}));
        p.mutan->n.resize(spec.mutan.rank, Tensor::zeros({1}));
    }
    std::size_t idx = 0;
    p.for_each_tensor([&](const std::string&, Tensor& t) { t = loaded[idx++]; });
    return p;
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open checkpoint '" + path + "'");
    }
    return load_model(in);
}

std::vector<TablePreset> table_presets(const std::string& which) {
    ModelSpec base;
    if (which == "lr") {
        base.classes = 9;
    } else if (which == "hr") {
        base.classes = 55;
    } else {
        throw ParameterError("unknown preset table '" + which + "' (expected lr or hr)");
    }
    std::vector<TablePreset> out;
    {
        ModelSpec s = base;
        s.fusion = FusionKind::Elementwise;
        out.push_back({"baseline", s});
    }
    {
        ModelSpec s = base;
        s.fusion = FusionKind::Mcb;
        s.mcb_d = 8000;
        out.push_back({"mcb-8000", s});
    }
    {
        ModelSpec s = base;
        s.fusion = FusionKind::Mutan;
        out.push_back({"mutan", s});
    }
    return out;
}

const std::vector<std::size_t>& ablation_dims() {
    static const std::vector<std::size_t> dims = {1200, 4000, 8000, 16000, 32000};
    return dims;
}

}  // namespace fusionbench
