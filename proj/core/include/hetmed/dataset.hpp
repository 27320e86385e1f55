#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hetmed/types.hpp"

namespace hetmed {

/// Normalized population shares: component j equals sizes[j] / sum(sizes).
/// Throws InputError on an empty vector or a non-positive size.
std::vector<double> weights_from_sizes(std::span<const std::int64_t> sizes);

/// Validates raw subgroup records into a well-formed dataset, deriving
/// weights from the sample sizes. Requires K >= 3, distinct group ids, and
/// per-record invariants (non-negative SEs, |cov_uv| <= se_gamma*se_tau,
/// n >= 1, consistent covariate dimension). Record order is preserved.
EffectDataset validate_dataset(std::vector<SubgroupEffect> raw);

/// Same validation with user-supplied weights (e.g. design shares) in
/// record order. Weights must be non-negative, not all zero; they are
/// normalized to sum to one.
EffectDataset validate_dataset(std::vector<SubgroupEffect> raw,
                               std::vector<double> weights);

}  // namespace hetmed
