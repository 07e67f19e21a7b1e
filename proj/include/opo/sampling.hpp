#pragma once

// SPDX-License-Identifier: Apache-2.0

// Sampling geometry: group-relative advantages and the alpha-reweighted
// driving signal omega_alpha(y) = t(y)^alpha * A(y).

#include "opo/core_types.hpp"

#include <optional>

namespace opo {

struct RolloutBatch {
  std::vector<std::size_t> outcome_ids;
  std::vector<double> rewards;
  /// Probability of each sampled outcome under the behaviour policy.
  std::vector<double> behavior_probs;

  std::size_t size() const { return outcome_ids.size(); }
  /// Throws std::invalid_argument on ragged lengths or probabilities outside (0, 1].
  void validate() const;
};

struct AdvantageOptions {
  /// Divide by the group standard deviation (GRPO-style). Off by default.
  bool scale_by_std = false;
  /// Symmetric clip |A| <= clip when set.
  std::optional<double> clip;
};

/// A_i = R_i - mean(R), then the optional scaling and clipping.
AdvantageField group_normalized_advantage(const RolloutBatch& batch,
                                          const AdvantageOptions& options = {});

/// omega_i = (v_i + 1)^alpha * A_i. alpha == 0 returns A unchanged.
/// Throws std::domain_error on a non-positive ratio with non-integer alpha.
WeightField alpha_weights(const AdvantageField& advantages, const RatioField& ratios,
                          double alpha);

/// Per-sample values of `field` at the batch's outcomes.
RatioField gather(const RatioField& field, std::span<const std::size_t> outcome_ids);

/// Folds per-sample weights into a per-outcome field; repeated outcomes add up.
WeightField aggregate_weights(std::span<const double> per_sample,
                              std::span<const std::size_t> outcome_ids,
                              std::size_t space_size);

struct WeightSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double l2_norm = 0.0;
};

WeightSummary weight_diagnostics(const WeightField& omega);

}  // namespace opo
