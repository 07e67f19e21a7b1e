// SPDX-License-Identifier: Apache-2.0

#include "opo/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opo {

void RolloutBatch::validate() const {
  if (rewards.size() != outcome_ids.size() || behavior_probs.size() != outcome_ids.size()) {
    throw std::invalid_argument("rollout batch has ragged fields");
  }
  for (double p : behavior_probs) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw std::invalid_argument("behaviour probability outside (0, 1]");
    }
  }
}

AdvantageField group_normalized_advantage(const RolloutBatch& batch,
                                          const AdvantageOptions& options) {
  batch.validate();
  if (batch.size() == 0) throw std::invalid_argument("empty rollout batch");
  const auto n = static_cast<double>(batch.size());
  // Shifted mean: a tied group yields exactly zero advantages.
  const double pivot = batch.rewards.front();
  double shift = 0.0;
  for (double r : batch.rewards) shift += r - pivot;
  const double mean = pivot + shift / n;

  AdvantageField out{std::vector<double>(batch.size())};
  for (std::size_t i = 0; i < batch.size(); ++i) out.a[i] = batch.rewards[i] - mean;

  if (options.scale_by_std) {
    double var = 0.0;
    for (double a : out.a) var += a * a;
    const double sd = std::sqrt(var / n);
    // A tied group carries no signal; leave the zero vector untouched.
    if (sd > 0.0) {
      for (auto& a : out.a) a /= sd;
    }
  }
  if (options.clip) {
    const double c = *options.clip;
    if (!(c > 0.0)) throw std::invalid_argument("advantage clip must be > 0");
    for (auto& a : out.a) a = std::clamp(a, -c, c);
  }
  return out;
}

WeightField alpha_weights(const AdvantageField& advantages, const RatioField& ratios,
                          double alpha) {
  require_same_space(advantages.size(), ratios.size(), "alpha_weights");
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
  WeightField out{advantages.a};
  if (alpha == 0.0) return out;
  const bool integral = std::floor(alpha) == alpha;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double t = ratios.v[i] + 1.0;
    if (t <= 0.0 && !integral) {
      throw std::domain_error("non-positive ratio with non-integer alpha");
    }
    out.omega[i] = std::pow(t, alpha) * advantages.a[i];
  }
  return out;
}

RatioField gather(const RatioField& field, std::span<const std::size_t> outcome_ids) {
  RatioField out{std::vector<double>(outcome_ids.size())};
  for (std::size_t i = 0; i < outcome_ids.size(); ++i) {
    if (outcome_ids[i] >= field.size()) throw std::out_of_range("gather: outcome id");
    out.v[i] = field.v[outcome_ids[i]];
  }
  return out;
}

WeightField aggregate_weights(std::span<const double> per_sample,
                              std::span<const std::size_t> outcome_ids,
                              std::size_t space_size) {
  require_same_space(per_sample.size(), outcome_ids.size(), "aggregate_weights");
  WeightField out{std::vector<double>(space_size, 0.0)};
  for (std::size_t i = 0; i < outcome_ids.size(); ++i) {
    if (outcome_ids[i] >= space_size) throw std::out_of_range("aggregate_weights: outcome id");
    out.omega[outcome_ids[i]] += per_sample[i];
  }
  return out;
}

WeightSummary weight_diagnostics(const WeightField& omega) {
  WeightSummary s;
  if (omega.size() == 0) return s;
  s.min = *std::min_element(omega.omega.begin(), omega.omega.end());
  s.max = *std::max_element(omega.omega.begin(), omega.omega.end());
  double sum = 0.0;
  double sq = 0.0;
  for (double w : omega.omega) {
    sum += w;
    sq += w * w;
  }
  s.mean = sum / static_cast<double>(omega.size());
  s.l2_norm = std::sqrt(sq);
  return s;
}

}  // namespace opo
