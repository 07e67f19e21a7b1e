#pragma once

// SPDX-License-Identifier: Apache-2.0

// Synthetic tasks with enumerable outcome spaces and exact rewards.
//
// Sequence outcomes are flattened row-major over tokens: the first token is
// the most significant digit, so id = sum_k token[k] * vocab^(length-1-k).

#include "opo/core_types.hpp"
#include "opo/random.hpp"
#include "opo/sampling.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace opo {

struct BanditEnv {
  std::vector<double> arm_rewards;

  void validate() const;
};

struct SequenceEnv {
  static constexpr std::size_t kMaxOutcomes = 4096;

  std::size_t vocab = 2;
  std::size_t length = 1;
  std::vector<std::size_t> target_sequence;

  void validate() const;
};

using Environment = std::variant<BanditEnv, SequenceEnv>;

/// 10 arms with rewards linearly spaced over [0.05, 0.95].
BanditEnv bandit10();
/// vocab 4, length 4, target (1, 3, 0, 2).
SequenceEnv seq4x4();

/// "bandit10" or "seq4x4"; throws std::invalid_argument otherwise.
Environment environment_from_name(std::string_view name);
std::string environment_name(const Environment& env);

/// Throws std::invalid_argument if the space exceeds the enumeration cap.
OutcomeSpace enumerate_outcomes(const Environment& env);

std::vector<std::size_t> decode_sequence(const SequenceEnv& env, std::size_t id);
std::size_t encode_sequence(const SequenceEnv& env, std::span<const std::size_t> tokens);

/// Deterministic reward in [0, 1]; throws std::out_of_range for a bad id.
double reward_of(const Environment& env, std::size_t outcome_id);

/// Rewards of every outcome, indexed by id.
std::vector<double> reward_table(const Environment& env);

/// Index of the first CDF bucket strictly above u; zero-probability outcomes
/// are never returned.
std::size_t inverse_cdf(const CategoricalPolicy& policy, double u);

/// n i.i.d. draws from `policy` via inverse-CDF on a splitmix64 stream seeded
/// with `seed`. Pure in (env, policy, n, seed).
RolloutBatch sample_rollouts(const Environment& env, const CategoricalPolicy& policy,
                             std::size_t n, Seed seed);

}  // namespace opo
