#include "fusionbench/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fusionbench/errors.hpp"

namespace fusionbench {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct KeyValue {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line;
};

std::vector<KeyValue> tokenize(std::istream& in, const std::string& origin) {
    std::vector<KeyValue> out;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') {
            continue;
        }
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        }
        KeyValue kv;
        kv.section = section;
        kv.key = trim(t.substr(0, eq));
        kv.value = trim(t.substr(eq + 1));
        kv.line = lineno;
        if (kv.key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        out.push_back(std::move(kv));
    }
    return out;
}

class ValueParser {
public:
    ValueParser(const KeyValue& kv, const std::string& origin) : kv_(kv), origin_(origin) {}

    [[noreturn]] void fail(const std::string& why) const {
        throw ConfigError(origin_ + ":" + std::to_string(kv_.line) + ": key '" + kv_.key +
                          "': " + why);
    }

    std::uint64_t as_u64() const {
        std::uint64_t v = 0;
        const std::string& s = kv_.value;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            fail("expected unsigned integer, got '" + s + "'");
        }
        return v;
    }

    std::size_t as_size() const { return static_cast<std::size_t>(as_u64()); }

    double as_double() const {
        double v = 0.0;
        const std::string& s = kv_.value;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            fail("expected number, got '" + s + "'");
        }
        return v;
    }

    bool as_bool() const {
        if (kv_.value == "true" || kv_.value == "1" || kv_.value == "yes") return true;
        if (kv_.value == "false" || kv_.value == "0" || kv_.value == "no") return false;
        fail("expected boolean, got '" + kv_.value + "'");
    }

    const std::string& as_string() const { return kv_.value; }

private:
    const KeyValue& kv_;
    const std::string& origin_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == ',' || c == '\t') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    bool lr_explicit = false, batch_explicit = false, epochs_explicit = false;
    std::string preset;

    for (const KeyValue& kv : tokenize(in, origin)) {
        ValueParser p(kv, origin);
        if (kv.section == "run") {
            if (kv.key == "seed") cfg.seed = p.as_u64();
            else if (kv.key == "output") cfg.output_dir = p.as_string();
            else p.fail("unknown key in [run]");
        } else if (kv.section == "model") {
            if (kv.key == "n_img") cfg.model.n_img = p.as_size();
            else if (kv.key == "n_txt") cfg.model.n_txt = p.as_size();
            else if (kv.key == "proj") {
                if (p.as_string() == "none") {
                    cfg.model.projection_free = true;
                } else {
                    cfg.model.proj = p.as_size();
                    if (cfg.model.proj == 0) p.fail("projection dim must be >= 1");
                }
            } else if (kv.key == "hidden") cfg.model.hidden = p.as_size();
            else if (kv.key == "classes") cfg.model.classes = p.as_size();
            else p.fail("unknown key in [model]");
        } else if (kv.section == "fusion") {
            if (kv.key == "kinds") {
                for (const std::string& name : split_list(p.as_string())) {
                    try {
                        cfg.kinds.push_back(fusion_kind_from_name(name));
                    } catch (const ParameterError& e) {
                        p.fail(e.what());
                    }
                }
            } else if (kv.key == "d") cfg.model.mcb_d = p.as_size();
            else if (kv.key == "t_q") cfg.model.mutan.t_q = p.as_size();
            else if (kv.key == "t_v") cfg.model.mutan.t_v = p.as_size();
            else if (kv.key == "t_o") cfg.model.mutan.t_o = p.as_size();
            else if (kv.key == "rank") cfg.model.mutan.rank = p.as_size();
            else p.fail("unknown key in [fusion]");
        } else if (kv.section == "train") {
            cfg.has_train = true;
            if (kv.key == "preset") preset = p.as_string();
            else if (kv.key == "lr") { cfg.train.lr = p.as_double(); lr_explicit = true; }
            else if (kv.key == "batch") { cfg.train.batch = p.as_size(); batch_explicit = true; }
            else if (kv.key == "epochs") { cfg.train.epochs = p.as_size(); epochs_explicit = true; }
            else if (kv.key == "n_train") cfg.n_train = p.as_size();
            else if (kv.key == "n_test") cfg.n_test = p.as_size();
            else if (kv.key == "rank") cfg.task_rank = p.as_size();
            else if (kv.key == "noise_sigma") cfg.noise_sigma = p.as_double();
            else if (kv.key == "task") {
                const std::string& name = p.as_string();
                if (name == "random") cfg.scorers = TaskScorers::RandomLowRank;
                else if (name == "cross-index") cfg.scorers = TaskScorers::CrossIndex;
                else p.fail("expected 'random' or 'cross-index', got '" + name + "'");
            } else if (kv.key == "mirror") cfg.mirror_pairs = p.as_bool();
            else if (kv.key == "min_margin") cfg.min_margin = p.as_double();
            else p.fail("unknown key in [train]");
        } else {
            throw ConfigError(origin + ":" + std::to_string(kv.line) +
                              ": unknown section [" + kv.section + "]");
        }
    }

    if (!preset.empty()) {
        if (preset != "paper-defaults") {
            throw ConfigError(origin + ": unknown train preset '" + preset + "'");
        }
        if (!lr_explicit) cfg.train.lr = 1e-5;
        if (!batch_explicit) cfg.train.batch = 70;
        if (!epochs_explicit) cfg.train.epochs = 150;
    }

    if (cfg.has_train) {
        if (!(cfg.train.lr >= 0.0)) {
            throw ConfigError(origin + ": learning rate must be >= 0");
        }
        if (cfg.train.batch < 1 || cfg.train.epochs < 1) {
            throw ConfigError(origin + ": batch and epochs must be >= 1");
        }
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse_config(in, path);
}

ModelSpec RunConfig::spec_for(FusionKind kind) const {
    ModelSpec spec = model;
    spec.fusion = kind;
    if (kind != FusionKind::Elementwise) {
        spec.projection_free = false;
    }
    spec.validate();
    return spec;
}

SynthTaskSpec RunConfig::task_spec(std::uint64_t seed) const {
    SynthTaskSpec spec;
    spec.n_q = model.n_txt;
    spec.n_v = model.n_img;
    spec.classes = model.classes;
    spec.rank = task_rank;
    spec.n_train = n_train;
    spec.n_test = n_test;
    spec.noise_sigma = noise_sigma;
    spec.seed = seed;
    spec.scorers = scorers;
    spec.mirror_pairs = mirror_pairs;
    spec.min_margin = min_margin;
    spec.validate();
    return spec;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const char* env_value,
                           const std::optional<std::uint64_t>& config,
                           std::uint64_t fallback) {
    if (flag) {
        return *flag;
    }
    if (env_value && *env_value) {
        std::uint64_t v = 0;
        const std::string s(env_value);
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ConfigError("FUSIONBENCH_SEED must be an unsigned integer, got '" + s +
                              "'");
        }
        return v;
    }
    if (config) {
        return *config;
    }
    return fallback;
}

}  // namespace fusionbench
