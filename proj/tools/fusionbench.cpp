#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fusionbench/config.hpp"
#include "fusionbench/errors.hpp"
#include "fusionbench/gradcheck.hpp"
#include "fusionbench/synth.hpp"
#include "fusionbench/text_io.hpp"
#include "fusionbench/vqahead.hpp"

namespace fb = fusionbench;

namespace {

// Exit contract: 0 success, 1 property/divergence failure, 2 usage/config.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

constexpr double kGradTolerance = 1e-5;
constexpr double kBenchCrossCheckTol = 1e-9;

std::vector<fb::FusionKind> kinds_from_flag(const std::string& flag) {
    if (flag == "all") {
        return {fb::FusionKind::Elementwise, fb::FusionKind::Mcb, fb::FusionKind::Mutan};
    }
    return {fb::fusion_kind_from_name(flag)};
}

void apply_model_overrides(fb::ModelSpec& spec, const fb::ModelSpec& overrides) {
    spec.n_img = overrides.n_img;
    spec.n_txt = overrides.n_txt;
    spec.proj = overrides.proj;
    spec.hidden = overrides.hidden;
    spec.classes = overrides.classes;
}

struct ParamsArgs {
    std::string config_path;
    std::string table;
};

int cmd_params(const ParamsArgs& args) {
    std::optional<fb::RunConfig> cfg;
    if (!args.config_path.empty()) {
        cfg = fb::parse_config_file(args.config_path);
    }
    if (args.table.empty() && !cfg) {
        std::cerr << "params: provide --table and/or --config\n";
        return kUsage;
    }

    if (args.table == "ablation") {
        fb::ModelSpec base = fb::table_presets("lr")[1].spec;  // MCB geometry
        if (cfg) {
            apply_model_overrides(base, cfg->model);
        }
        std::cout << "d,total\n";
        for (std::size_t d : fb::ablation_dims()) {
            fb::ModelSpec spec = base;
            spec.mcb_d = d;
            std::cout << d << ',' << fb::count_params(spec).total << '\n';
        }
        return kOk;
    }

    if (!args.table.empty()) {
        std::vector<fb::TablePreset> presets = fb::table_presets(args.table);
        std::cout << "model,block,count\n";
        for (fb::TablePreset& preset : presets) {
            if (cfg) {
                apply_model_overrides(preset.spec, cfg->model);
            }
            const fb::ParamBreakdown breakdown = fb::count_params(preset.spec);
            for (const auto& [block, count] : breakdown.blocks) {
                std::cout << preset.name << ',' << block << ',' << count << '\n';
            }
            std::cout << preset.name << ",total," << breakdown.total << '\n';
        }
        return kOk;
    }

    // Config-only audit: one breakdown per configured fusion.
    if (cfg->kinds.empty()) {
        throw fb::ConfigError("params: config has no [fusion] kinds to audit");
    }
    std::cout << "model,block,count\n";
    for (fb::FusionKind kind : cfg->kinds) {
        const fb::ParamBreakdown breakdown = fb::count_params(cfg->spec_for(kind));
        const char* name = fb::fusion_kind_name(kind);
        for (const auto& [block, count] : breakdown.blocks) {
            std::cout << name << ',' << block << ',' << count << '\n';
        }
        std::cout << name << ",total," << breakdown.total << '\n';
    }
    return kOk;
}

struct GradcheckArgs {
    std::string fusion = "all";
    std::size_t trials = 100;
    std::optional<std::uint64_t> seed;
};

int cmd_gradcheck(const GradcheckArgs& args) {
    const std::uint64_t seed =
        fb::resolve_seed(args.seed, std::getenv("FUSIONBENCH_SEED"), std::nullopt, 0);
    bool ok = true;
    for (fb::FusionKind kind : kinds_from_flag(args.fusion)) {
        const fb::GradcheckResult res = fb::gradcheck_fusion(kind, args.trials, seed);
        if (!res.all_finite) {
            std::cerr << "gradcheck: non-finite gradient for " << fb::fusion_kind_name(kind)
                      << ", replay with --seed " << res.worst_seed << " --trials 1\n";
            return kFailure;
        }
        std::cout << "fusion=" << fb::fusion_kind_name(kind)
                  << " trials=" << args.trials
                  << " max_rel_err=" << fb::format_double(res.max_rel_err)
                  << " worst_seed=" << res.worst_seed << '\n';
        ok = ok && res.max_rel_err < kGradTolerance;
    }
    return ok ? kOk : kFailure;
}

struct BenchArgs {
    std::string fusion = "all";
    std::vector<std::size_t> dims = {64, 1200};
    std::size_t iters = 1000;
    std::uint64_t seed = 0;
};

fb::Tensor bench_gaussian(fb::Rng& rng, std::size_t n) {
    fb::Tensor t = fb::Tensor::zeros({n});
    for (double& v : t.data()) {
        v = rng.next_gaussian(1.0);
    }
    return t;
}

std::int64_t median_ns(std::vector<std::int64_t>& samples) {
    std::sort(samples.begin(), samples.end());
    return samples[(samples.size() - 1) / 2];
}

template <typename Fn>
std::int64_t time_calls(std::size_t iters, Fn&& fn) {
    fn();  // warm-up
    std::vector<std::int64_t> ns(iters);
    for (std::size_t i = 0; i < iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ns[i] = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    }
    return median_ns(ns);
}

int cmd_bench(const BenchArgs& args) {
    std::cout << "fusion,dim,mode,ns_per_call\n";
    for (fb::FusionKind kind : kinds_from_flag(args.fusion)) {
        for (std::size_t dim : args.dims) {
            fb::Rng rng(args.seed + dim);
            switch (kind) {
            case fb::FusionKind::Elementwise: {
                const fb::Tensor q = bench_gaussian(rng, dim);
                const fb::Tensor v = bench_gaussian(rng, dim);
                const std::int64_t ns =
                    time_calls(args.iters, [&] { return fb::fuse_elementwise(q, v); });
                std::cout << "elementwise," << dim << ",-," << ns << '\n';
                break;
            }
            case fb::FusionKind::Mcb: {
                const fb::McbConfig cfg = fb::make_mcb_config(dim, dim, rng.next_u64());
                const fb::Tensor q = bench_gaussian(rng, dim);
                const fb::Tensor v = bench_gaussian(rng, dim);
                // Refuse to time a kernel whose two modes disagree.
                const fb::Tensor direct = fb::fuse_mcb(cfg, q, v, fb::ConvMode::Direct);
                const fb::Tensor freq = fb::fuse_mcb(cfg, q, v, fb::ConvMode::Frequency);
                double scale = 1.0, err = 0.0;
                for (std::size_t i = 0; i < direct.numel(); ++i) {
                    scale = std::max(scale, std::abs(direct[i]));
                    err = std::max(err, std::abs(direct[i] - freq[i]));
                }
                if (err / scale > kBenchCrossCheckTol) {
                    std::cerr << "bench: mcb direct/frequency cross-check failed at dim "
                              << dim << " (rel err " << fb::format_double(err / scale)
                              << ")\n";
                    return kFailure;
                }
                const std::int64_t ns_direct = time_calls(
                    args.iters, [&] { return fb::fuse_mcb(cfg, q, v, fb::ConvMode::Direct); });
                std::cout << "mcb," << dim << ",direct," << ns_direct << '\n';
                const std::int64_t ns_freq = time_calls(args.iters, [&] {
                    return fb::fuse_mcb(cfg, q, v, fb::ConvMode::Frequency);
                });
                std::cout << "mcb," << dim << ",frequency," << ns_freq << '\n';
                break;
            }
            case fb::FusionKind::Mutan: {
                const std::size_t t = std::min<std::size_t>(dim, 64);
                fb::MutanParams p = fb::init_mutan(rng, dim, dim, t, t, t, 5);
                const fb::Tensor q = bench_gaussian(rng, dim);
                const fb::Tensor v = bench_gaussian(rng, dim);
                const std::int64_t ns =
                    time_calls(args.iters, [&] { return fb::fuse_mutan(p, q, v); });
                std::cout << "mutan," << dim << ",-," << ns << '\n';
                break;
            }
            }
        }
    }
    return kOk;
}

struct SynthArgs {
    std::string config_path;
    std::string output_override;
    std::optional<std::uint64_t> seed;
    bool force = false;
    bool save_models = false;
};

int cmd_ckpt_info(const std::string& path) {
    const fb::ModelParams params = fb::load_model(path);
    const fb::ModelSpec& spec = params.spec;
    std::cout << "fusion=" << fb::fusion_kind_name(spec.fusion)
              << " n_img=" << spec.n_img << " n_txt=" << spec.n_txt;
    if (spec.projection_free) {
        std::cout << " proj=none";
    } else if (spec.has_projections()) {
        std::cout << " proj=" << spec.proj;
    }
    std::cout << " hidden=" << spec.hidden << " classes=" << spec.classes
              << " seed=" << params.seed
              << " learned_params=" << params.stored_scalar_count() << '\n';
    return kOk;
}

int cmd_synth(const SynthArgs& args) {
    const fb::RunConfig cfg = fb::parse_config_file(args.config_path);
    if (!cfg.has_train) {
        throw fb::ConfigError("synth: config '" + args.config_path +
                              "' has no [train] section");
    }
    if (cfg.kinds.empty()) {
        throw fb::ConfigError("synth: config '" + args.config_path +
                              "' configures no fusion kinds");
    }
    const char* env_seed = std::getenv("FUSIONBENCH_SEED");
    if (!args.seed && !(env_seed && *env_seed) && !cfg.seed) {
        throw fb::ConfigError("synth: no seed (set [run] seed, FUSIONBENCH_SEED or --seed)");
    }
    const std::uint64_t seed = fb::resolve_seed(args.seed, env_seed, cfg.seed, 0);

    std::string out_dir = args.output_override.empty() ? cfg.output_dir : args.output_override;
    if (out_dir.empty()) {
        throw fb::ConfigError("synth: no output directory (set [run] output or --output)");
    }
    std::filesystem::create_directories(out_dir);

    struct Job {
        fb::FusionKind kind;
        std::filesystem::path report, confusion, checkpoint;
    };
    std::vector<Job> jobs;
    for (fb::FusionKind kind : cfg.kinds) {
        Job job;
        job.kind = kind;
        const std::string name = fb::fusion_kind_name(kind);
        job.report = std::filesystem::path(out_dir) / (name + "-report.csv");
        job.confusion = std::filesystem::path(out_dir) / (name + "-confusion.csv");
        if (args.save_models) {
            job.checkpoint = std::filesystem::path(out_dir) / (name + "-model.ckpt");
        }
        if (!args.force &&
            (std::filesystem::exists(job.report) || std::filesystem::exists(job.confusion) ||
             (args.save_models && std::filesystem::exists(job.checkpoint)))) {
            throw fb::ConfigError("synth: refusing to overwrite " + job.report.string() +
                                  " (pass --force)");
        }
        jobs.push_back(std::move(job));
    }

    // All randomness is derived from the master seed: first the task stream,
    // then one model/train seed pair per configured fusion, in order.
    fb::Rng master(seed);
    const fb::SynthDataset data = fb::gen_task(cfg.task_spec(master.next_u64()));

    for (const Job& job : jobs) {
        const std::uint64_t model_seed = master.next_u64();
        const std::uint64_t train_seed = master.next_u64();
        fb::Rng model_rng(model_seed);
        fb::ModelParams model = fb::build_model(cfg.spec_for(job.kind), model_rng);
        fb::TrainConfig tc = cfg.train;
        tc.seed = train_seed;
        fb::TrainReport report;
        try {
            report = fb::train(model, data, tc);
        } catch (const fb::DivergenceError& e) {
            std::cerr << "synth: " << fb::fusion_kind_name(job.kind)
                      << " diverged at epoch " << e.epoch << '\n';
            return kFailure;
        }
        {
            std::ofstream out(job.report);
            fb::write_report_csv(report, out);
        }
        {
            std::ofstream out(job.confusion);
            fb::write_confusion_csv(report, out);
        }
        if (args.save_models) {
            fb::save_model(model, job.checkpoint.string());
        }
        const fb::EpochStats& last = report.epochs.back();
        std::cout << "fusion=" << fb::fusion_kind_name(job.kind)
                  << " epochs=" << report.epochs.size()
                  << " final_train_loss=" << fb::format_double(last.train_loss)
                  << " final_train_acc=" << fb::format_double(last.train_acc)
                  << " final_test_acc=" << fb::format_double(last.test_acc)
                  << " wall_s=" << fb::format_double(report.wall_seconds) << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fusionbench: bilinear image-text fusion operators, parameter audits "
                 "and synthetic training"};
    app.require_subcommand(1);

    ParamsArgs params_args;
    CLI::App* params = app.add_subcommand("params", "Learned-parameter audit tables");
    params->add_option("--config", params_args.config_path, "Config file ([model] overrides)");
    params->add_option("--table", params_args.table, "Built-in table: lr, hr or ablation")
        ->check(CLI::IsMember({"lr", "hr", "ablation"}));

    GradcheckArgs grad_args;
    std::uint64_t grad_seed_raw = 0;
    CLI::App* grad = app.add_subcommand("gradcheck",
                                        "Analytic VJP vs central finite differences");
    grad->add_option("--fusion", grad_args.fusion, "elementwise, mcb, mutan or all")
        ->check(CLI::IsMember({"elementwise", "mcb", "mutan", "all"}));
    grad->add_option("--trials", grad_args.trials, "Random instances per fusion")
        ->check(CLI::PositiveNumber);
    CLI::Option* grad_seed_opt = grad->add_option("--seed", grad_seed_raw, "Base seed");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "Forward-pass micro-benchmarks (CSV)");
    bench->add_option("--fusion", bench_args.fusion, "elementwise, mcb, mutan or all")
        ->check(CLI::IsMember({"elementwise", "mcb", "mutan", "all"}));
    bench->add_option("--dims", bench_args.dims, "Input dimensions to time")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    bench->add_option("--iters", bench_args.iters, "Timed calls per configuration")
        ->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_args.seed, "Seed for benchmark inputs");

    SynthArgs synth_args;
    std::uint64_t synth_seed_raw = 0;
    CLI::App* synth = app.add_subcommand("synth", "Synthetic-task training runs");
    synth->add_option("config", synth_args.config_path, "Run configuration file")
        ->required();
    synth->add_option("--output", synth_args.output_override, "Override [run] output dir");
    CLI::Option* synth_seed_opt = synth->add_option("--seed", synth_seed_raw,
                                                    "Override config seed");
    synth->add_flag("--force", synth_args.force, "Overwrite existing reports");
    synth->add_flag("--save-models", synth_args.save_models,
                    "Write a checkpoint per trained fusion");

    std::string ckpt_path;
    CLI::App* ckpt = app.add_subcommand("ckpt-info", "Print checkpoint manifest summary");
    ckpt->add_option("path", ckpt_path, "Checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (grad_seed_opt->count() > 0) {
        grad_args.seed = grad_seed_raw;
    }
    if (synth_seed_opt->count() > 0) {
        synth_args.seed = synth_seed_raw;
    }

    try {
        if (params->parsed()) return cmd_params(params_args);
        if (grad->parsed()) return cmd_gradcheck(grad_args);
        if (bench->parsed()) return cmd_bench(bench_args);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (ckpt->parsed()) return cmd_ckpt_info(ckpt_path);
    } catch (const fb::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fb::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fb::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const fb::VersionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
