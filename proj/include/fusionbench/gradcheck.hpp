#pragma once

#include <cstdint>

#include "fusionbench/fusion.hpp"

namespace fusionbench {

// Central-difference verification of the analytic VJPs on random small
// instances. Per coordinate the discrepancy is
//   |analytic - fd| / max(1, |analytic|, |fd|),
// which behaves as a relative error for O(1) gradients and an absolute one
// near zero (central differences bottom out around 1e-10 there).
struct GradcheckResult {
    double max_rel_err = 0.0;
    bool all_finite = true;
    std::uint64_t worst_seed = 0;  // seed of the worst (or first non-finite) instance
};

GradcheckResult gradcheck_fusion(FusionKind kind, std::size_t trials, std::uint64_t seed,
                                 double step = 1e-6);

}  // namespace fusionbench
