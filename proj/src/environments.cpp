// SPDX-License-Identifier: Apache-2.0

#include "opo/environments.hpp"

#include <cmath>
#include <stdexcept>

namespace opo {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t sequence_space_size(const SequenceEnv& env) {
  std::size_t size = 1;
  for (std::size_t k = 0; k < env.length; ++k) {
    if (size > SequenceEnv::kMaxOutcomes / env.vocab) {
      throw std::invalid_argument("sequence outcome space exceeds the enumeration cap");
    }
    size *= env.vocab;
  }
  return size;
}

}  // namespace

void BanditEnv::validate() const {
  if (arm_rewards.size() < 2) throw std::invalid_argument("bandit needs at least 2 arms");
  for (double r : arm_rewards) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("arm reward outside [0, 1]");
  }
}

void SequenceEnv::validate() const {
  if (vocab < 2) throw std::invalid_argument("sequence vocab must be >= 2");
  if (length < 1) throw std::invalid_argument("sequence length must be >= 1");
  if (target_sequence.size() != length) {
    throw std::invalid_argument("target sequence length mismatch");
  }
  for (auto tok : target_sequence) {
    if (tok >= vocab) throw std::invalid_argument("target token outside vocab");
  }
  sequence_space_size(*this);
}

BanditEnv bandit10() {
  BanditEnv env;
  for (int k = 0; k < 10; ++k) env.arm_rewards.push_back(0.05 + 0.1 * k);
  return env;
}

SequenceEnv seq4x4() { return SequenceEnv{4, 4, {1, 3, 0, 2}}; }

Environment environment_from_name(std::string_view name) {
  if (name == "bandit10") return bandit10();
  if (name == "seq4x4") return seq4x4();
  throw std::invalid_argument("unknown environment '" + std::string(name) + "'");
}

std::string environment_name(const Environment& env) {
  return std::visit(overloaded{[](const BanditEnv& b) {
                                 return "bandit" + std::to_string(b.arm_rewards.size());
                               },
                               [](const SequenceEnv& s) {
                                 return "seq" + std::to_string(s.vocab) + "x" +
                                        std::to_string(s.length);
                               }},
                    env);
}

OutcomeSpace enumerate_outcomes(const Environment& env) {
  return std::visit(overloaded{[](const BanditEnv& b) {
                                 b.validate();
                                 return OutcomeSpace(b.arm_rewards.size());
                               },
                               [](const SequenceEnv& s) {
                                 s.validate();
                                 return OutcomeSpace(sequence_space_size(s));
                               }},
                    env);
}

std::vector<std::size_t> decode_sequence(const SequenceEnv& env, std::size_t id) {
  if (id >= sequence_space_size(env)) throw std::out_of_range("sequence id out of range");
  std::vector<std::size_t> tokens(env.length);
  for (std::size_t k = env.length; k-- > 0;) {
    tokens[k] = id % env.vocab;
    id /= env.vocab;
  }
  return tokens;
}

std::size_t encode_sequence(const SequenceEnv& env, std::span<const std::size_t> tokens) {
  if (tokens.size() != env.length) throw std::invalid_argument("token count mismatch");
  std::size_t id = 0;
  for (auto tok : tokens) {
    if (tok >= env.vocab) throw std::invalid_argument("token outside vocab");
    id = id * env.vocab + tok;
  }
  return id;
}

double reward_of(const Environment& env, std::size_t outcome_id) {
  return std::visit(
      overloaded{[&](const BanditEnv& b) {
                   if (outcome_id >= b.arm_rewards.size()) {
                     throw std::out_of_range("arm id out of range");
                   }
                   return b.arm_rewards[outcome_id];
                 },
                 [&](const SequenceEnv& s) {
                   const auto tokens = decode_sequence(s, outcome_id);
                   std::size_t prefix = 0;
                   while (prefix < s.length && tokens[prefix] == s.target_sequence[prefix]) {
                     ++prefix;
                   }
                   return static_cast<double>(prefix) / static_cast<double>(s.length);
                 }},
      env);
}

std::vector<double> reward_table(const Environment& env) {
  const std::size_t n = enumerate_outcomes(env).size();
  std::vector<double> table(n);
  for (std::size_t y = 0; y < n; ++y) table[y] = reward_of(env, y);
  return table;
}

std::size_t inverse_cdf(const CategoricalPolicy& policy, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t y = 0; y < policy.size(); ++y) {
    if (policy[y] <= 0.0) continue;
    cumulative += policy[y];
    last_positive = y;
    if (u < cumulative) return y;
  }
  // u landed in the rounding gap above the accumulated total.
  return last_positive;
}

RolloutBatch sample_rollouts(const Environment& env, const CategoricalPolicy& policy,
                             std::size_t n, Seed seed) {
  if (n < 1) throw std::invalid_argument("need at least one rollout");
  require_same_space(enumerate_outcomes(env).size(), policy.size(), "sample_rollouts");
  SplitMix64 rng(seed);
  RolloutBatch batch;
  batch.outcome_ids.reserve(n);
  batch.rewards.reserve(n);
  batch.behavior_probs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = inverse_cdf(policy, rng.uniform());
    batch.outcome_ids.push_back(y);
    batch.rewards.push_back(reward_of(env, y));
    batch.behavior_probs.push_back(policy[y]);
  }
  return batch;
}

}  // namespace opo
