#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fusionbench/synth.hpp"
#include "fusionbench/vqahead.hpp"

namespace fusionbench {

// Parsed run configuration. Flat INI-style file with [run], [model],
// [fusion] and [train] sections; every key is validated and unknown keys
// are rejected. Grammar in docs/formats.md.
struct RunConfig {
    // [run]
    std::optional<std::uint64_t> seed;
    std::string output_dir;

    // [model]
    ModelSpec model;  // fusion/mcb_d/mutan filled from [fusion]

    // [fusion]
    std::vector<FusionKind> kinds;

    // [train]
    bool has_train = false;
    TrainConfig train;
    std::size_t n_train = 256;
    std::size_t n_test = 128;
    std::size_t task_rank = 1;
    double noise_sigma = 0.0;
    TaskScorers scorers = TaskScorers::RandomLowRank;
    bool mirror_pairs = false;
    double min_margin = 0.0;

    // Model spec for one configured fusion kind.
    ModelSpec spec_for(FusionKind kind) const;
    SynthTaskSpec task_spec(std::uint64_t seed) const;
};

RunConfig parse_config(std::istream& in, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

// Seed precedence: command-line flag > FUSIONBENCH_SEED environment
// variable > config [run] seed > fallback.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const char* env_value,
                           const std::optional<std::uint64_t>& config,
                           std::uint64_t fallback);

}  // namespace fusionbench
