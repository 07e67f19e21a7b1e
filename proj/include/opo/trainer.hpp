#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file trainer.hpp
 * @brief Tabular softmax training loops: OPO and the GRPO-style, DPO-style,
 * KL-regularized and L2-regularized policy-gradient baselines, all sharing
 * one rollout and metrics pipeline.
 *
 * One iteration:
 *   1. reference <- current policy (OnPolicy) or the initial policy (Fixed)
 *   2. draw a rollout group from the current policy
 *   3. A_i = R_i - mean(R)
 *   4. omega_i = t(y_i)^alpha A_i, folded per outcome (repeats add up)
 *   5. ratio or log-ratio field against the reference
 *   6. the algorithm's loss
 *   7. theta <- theta - eta * grad_theta(loss)
 *
 * The sampled signal (advantages, weights, preference pairs) is frozen at
 * step start; only the coordinate fields depend on theta.
 *
 * OPO's linear term sums the batch weights over sampled outcomes. In ratio
 * coordinates this is written as E_ref[omega~ v] with omega~(y) = W(y)/ref(y),
 * where W is the folded batch weight, so both coordinate modes share one
 * driving force. The chi-square penalty E_ref[.] is exact by enumeration, or
 * importance-weighted over the batch in MonteCarlo mode.
 */

#include "opo/core_types.hpp"
#include "opo/environments.hpp"
#include "opo/objectives.hpp"
#include "opo/random.hpp"
#include "opo/sampling.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opo {

enum class Algo { OPO, GRPO, DPO, KLPG, L2PG };
enum class AnchorMode { OnPolicy, Fixed };
enum class RefExpectation { Exact, MonteCarlo };

std::string_view to_string(Algo algo);
std::string_view to_string(AnchorMode mode);
std::string_view to_string(CoordinateMode mode);
Algo algo_from_name(std::string_view name);
AnchorMode anchor_from_name(std::string_view name);
CoordinateMode coordinate_from_name(std::string_view name);

struct TrainConfig {
  Algo algo = Algo::OPO;
  // Algorithm-specific; unset means "not supplied".
  std::optional<double> alpha;
  std::optional<double> mu;
  std::optional<double> beta;
  std::optional<double> lambda;

  double eta = 0.05;
  int steps = 400;
  int rollouts_per_step = 6;
  Seed seed{7};
  CoordinateMode coordinate_mode = CoordinateMode::ExactRatio;
  AnchorMode anchor_mode = AnchorMode::OnPolicy;
  RefExpectation ref_expectation = RefExpectation::Exact;
  AdvantageOptions advantage;
  /// Starting logits; uniform (all zeros) when unset.
  std::optional<PolicyLogits> initial_logits;

  /// Built-in defaults per algorithm: OPO alpha 0.6, mu 1.0, on-policy anchor;
  /// GRPO on-policy; DPO beta 1.0, fixed anchor; KLPG beta 0.1, fixed anchor;
  /// L2PG lambda 0.01, fixed anchor. eta 0.05, 400 steps, 6 rollouts, seed 7.
  static TrainConfig preset(Algo algo);

  /// Throws std::invalid_argument on a missing or invalid hyperparameter and
  /// returns warnings for supplied hyperparameters the algorithm ignores.
  std::vector<std::string> validate() const;
};

struct TrainResult {
  std::vector<RunMetrics> metrics;
  CategoricalPolicy final_policy;
  PolicyLogits final_logits;
  std::vector<std::string> warnings;
};

struct PreferencePair {
  std::size_t winner = 0;  ///< batch position
  std::size_t loser = 0;
};

/// Sort by reward (descending, stable) and pair best against worst moving
/// inward; tied pairs are skipped and an odd middle element is dropped.
std::vector<PreferencePair> build_preference_pairs(const RolloutBatch& batch);

double exact_expected_reward(const Environment& env, const CategoricalPolicy& pi);

/// Sampled quantities frozen at the start of a step.
struct StepTargets {
  RolloutBatch batch;
  AdvantageField advantages;
  /// Per-sample omega (OPO only).
  WeightField sample_weights;
  /// Folded per-outcome weights: OPO uses omega, the PG baselines use A.
  WeightField outcome_weights;
  /// Distinct sampled outcomes in first-seen order.
  std::vector<std::size_t> distinct_outcomes;
  /// Penalty weights standing in for ref(y) in MonteCarlo mode.
  std::vector<double> penalty_weights;
  std::vector<PreferencePair> pairs;
};

StepTargets prepare_step(const TrainConfig& cfg, const CategoricalPolicy& pi_start,
                         const CategoricalPolicy& ref, RolloutBatch batch);

struct StepEvaluation {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Loss and logit gradient at `theta` with the targets held fixed.
/// `theta0` anchors the L2 penalty.
StepEvaluation evaluate_step(const TrainConfig& cfg, const StepTargets& targets,
                             const PolicyLogits& theta, const CategoricalPolicy& ref,
                             const PolicyLogits& theta0);

struct StepSnapshot {
  int step = 0;
  const PolicyLogits& theta_before;
  const CategoricalPolicy& reference;
  const StepTargets& targets;
  const StepEvaluation& evaluation;
  const CategoricalPolicy& policy_after;
};

using StepObserver = std::function<void(const StepSnapshot&)>;

TrainResult run_training(const Environment& env, const TrainConfig& cfg,
                         const StepObserver& observer = {});

}  // namespace opo
