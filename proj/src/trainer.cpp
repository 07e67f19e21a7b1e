// SPDX-License-Identifier: Apache-2.0

#include "opo/trainer.hpp"

#include "opo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace opo {

namespace {

void require_positive(const std::optional<double>& x, const char* name, std::string_view algo) {
  if (!x) {
    throw std::invalid_argument(std::string(algo) + " requires " + name);
  }
  if (!(*x > 0.0) || !std::isfinite(*x)) {
    throw std::invalid_argument(std::string(name) + " must be finite and > 0");
  }
}

void warn_unused(std::vector<std::string>& warnings, const std::optional<double>& x,
                 const char* name, std::string_view algo) {
  if (x) warnings.push_back(std::string(name) + " is ignored by " + std::string(algo));
}

double norm2(const std::vector<double>& g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::OPO: return "opo";
    case Algo::GRPO: return "grpo";
    case Algo::DPO: return "dpo";
    case Algo::KLPG: return "klpg";
    case Algo::L2PG: return "l2pg";
  }
  return "?";
}

std::string_view to_string(AnchorMode mode) {
  return mode == AnchorMode::OnPolicy ? "onpolicy" : "fixed";
}

std::string_view to_string(CoordinateMode mode) {
  return mode == CoordinateMode::ExactRatio ? "ratio" : "log";
}

Algo algo_from_name(std::string_view name) {
  for (Algo a : {Algo::OPO, Algo::GRPO, Algo::DPO, Algo::KLPG, Algo::L2PG}) {
    if (name == to_string(a)) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

AnchorMode anchor_from_name(std::string_view name) {
  if (name == "onpolicy") return AnchorMode::OnPolicy;
  if (name == "fixed") return AnchorMode::Fixed;
  throw std::invalid_argument("unknown anchor mode '" + std::string(name) + "'");
}

CoordinateMode coordinate_from_name(std::string_view name) {
  if (name == "ratio") return CoordinateMode::ExactRatio;
  if (name == "log") return CoordinateMode::LogApprox;
  throw std::invalid_argument("unknown coordinate mode '" + std::string(name) + "'");
}

TrainConfig TrainConfig::preset(Algo algo) {
  TrainConfig cfg;
  cfg.algo = algo;
  switch (algo) {
    case Algo::OPO:
      cfg.alpha = 0.6;
      cfg.mu = 1.0;
      cfg.anchor_mode = AnchorMode::OnPolicy;
      break;
    case Algo::GRPO:
      cfg.anchor_mode = AnchorMode::OnPolicy;
      break;
    case Algo::DPO:
      cfg.beta = 1.0;
      cfg.anchor_mode = AnchorMode::Fixed;
      break;
    case Algo::KLPG:
      cfg.beta = 0.1;
      cfg.anchor_mode = AnchorMode::Fixed;
      break;
    case Algo::L2PG:
      cfg.lambda = 0.01;
      cfg.anchor_mode = AnchorMode::Fixed;
      break;
  }
  return cfg;
}

std::vector<std::string> TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (rollouts_per_step < 1) throw std::invalid_argument("rollouts must be >= 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and > 0");

  std::vector<std::string> warnings;
  const auto name = to_string(algo);
  switch (algo) {
    case Algo::OPO:
      require_positive(mu, "mu", name);
      if (!alpha) throw std::invalid_argument("opo requires alpha");
      if (!std::isfinite(*alpha)) throw std::invalid_argument("alpha must be finite");
      warn_unused(warnings, beta, "beta", name);
      warn_unused(warnings, lambda, "lambda", name);
      break;
    case Algo::GRPO:
      warn_unused(warnings, alpha, "alpha", name);
      warn_unused(warnings, mu, "mu", name);
      warn_unused(warnings, beta, "beta", name);
      warn_unused(warnings, lambda, "lambda", name);
      break;
    case Algo::DPO:
    case Algo::KLPG:
      require_positive(beta, "beta", name);
      warn_unused(warnings, alpha, "alpha", name);
      warn_unused(warnings, mu, "mu", name);
      warn_unused(warnings, lambda, "lambda", name);
      break;
    case Algo::L2PG:
      if (!lambda) throw std::invalid_argument("l2pg requires lambda");
      if (!(*lambda >= 0.0) || !std::isfinite(*lambda)) {
        throw std::invalid_argument("lambda must be finite and >= 0");
      }
      warn_unused(warnings, alpha, "alpha", name);
      warn_unused(warnings, mu, "mu", name);
      warn_unused(warnings, beta, "beta", name);
      break;
  }
  if (algo != Algo::OPO && coordinate_mode != CoordinateMode::ExactRatio) {
    warnings.push_back("coordinate mode is ignored by " + std::string(name));
  }
  if (initial_logits) {
    for (double x : initial_logits->logits) {
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite initial logit");
    }
  }
  return warnings;
}

std::vector<PreferencePair> build_preference_pairs(const RolloutBatch& batch) {
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return batch.rewards[a] > batch.rewards[b];
  });
  std::vector<PreferencePair> pairs;
  if (order.empty()) return pairs;
  std::size_t i = 0;
  std::size_t j = order.size() - 1;
  while (i < j) {
    if (batch.rewards[order[i]] > batch.rewards[order[j]]) {
      pairs.push_back({order[i], order[j]});
    }
    ++i;
    --j;
  }
  return pairs;
}

double exact_expected_reward(const Environment& env, const CategoricalPolicy& pi) {
  const auto rewards = reward_table(env);
  require_same_space(rewards.size(), pi.size(), "exact_expected_reward");
  double total = 0.0;
  for (std::size_t y = 0; y < rewards.size(); ++y) total += pi[y] * rewards[y];
  return total;
}

StepTargets prepare_step(const TrainConfig& cfg, const CategoricalPolicy& pi_start,
                         const CategoricalPolicy& ref, RolloutBatch batch) {
  const std::size_t n = pi_start.size();
  StepTargets t;
  t.advantages = group_normalized_advantage(batch, cfg.advantage);

  if (cfg.algo == Algo::OPO) {
    const RatioField ratios = ratio_from_policies(pi_start, ref);
    t.sample_weights = alpha_weights(t.advantages, gather(ratios, batch.outcome_ids), *cfg.alpha);
    t.outcome_weights = aggregate_weights(t.sample_weights.omega, batch.outcome_ids, n);
  } else {
    t.outcome_weights = aggregate_weights(t.advantages.a, batch.outcome_ids, n);
  }

  std::unordered_set<std::size_t> seen;
  for (std::size_t y : batch.outcome_ids) {
    if (seen.insert(y).second) t.distinct_outcomes.push_back(y);
  }

  if (cfg.ref_expectation == RefExpectation::MonteCarlo) {
    // E_ref[f] ~ (1/n) sum_i ref(y_i)/b_i f(y_i): unbiased for any behaviour policy.
    t.penalty_weights.assign(n, 0.0);
    const auto count = static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::size_t y = batch.outcome_ids[i];
      t.penalty_weights[y] += ref[y] / (count * batch.behavior_probs[i]);
    }
  } else {
    t.penalty_weights.assign(ref.probs().begin(), ref.probs().end());
  }

  if (cfg.algo == Algo::DPO) t.pairs = build_preference_pairs(batch);
  t.batch = std::move(batch);
  return t;
}

StepEvaluation evaluate_step(const TrainConfig& cfg, const StepTargets& targets,
                             const PolicyLogits& theta, const CategoricalPolicy& ref,
                             const PolicyLogits& theta0) {
  const CategoricalPolicy pi = softmax(theta);
  const std::size_t n = pi.size();
  const auto& W = targets.outcome_weights.omega;
  const auto& c = targets.penalty_weights;
  StepEvaluation out;

  switch (cfg.algo) {
    case Algo::OPO: {
      const double mu = *cfg.mu;
      if (cfg.coordinate_mode == CoordinateMode::ExactRatio) {
        const RatioField v = ratio_from_policies(pi, ref);
        WeightField driving{std::vector<double>(n)};
        for (std::size_t y = 0; y < n; ++y) driving.omega[y] = W[y] / ref[y];
        if (cfg.ref_expectation == RefExpectation::Exact) {
          out.loss = opo_loss_ratio(v, driving, ref, mu);
          out.grad = pullback_ratio(opo_grad_v(v, driving, mu), pi);
        } else {
          double linear = 0.0;
          double quadratic = 0.0;
          RatioField g{std::vector<double>(n)};
          for (std::size_t y = 0; y < n; ++y) {
            linear += W[y] * v.v[y];
            quadratic += c[y] * v.v[y] * v.v[y];
            g.v[y] = -driving.omega[y] + mu * c[y] / ref[y] * v.v[y];
          }
          out.loss = -linear + 0.5 * mu * quadratic;
          out.grad = pullback_ratio(g, pi);
        }
      } else {
        const LogRatioField delta = log_ratio_from_policies(pi, ref);
        std::vector<double> partials(n);
        for (std::size_t y = 0; y < n; ++y) partials[y] = -W[y] + mu * c[y] * delta.delta[y];
        if (cfg.ref_expectation == RefExpectation::Exact) {
          out.loss = opo_loss_log(delta, targets.outcome_weights, targets.distinct_outcomes, ref, mu);
        } else {
          double linear = 0.0;
          double quadratic = 0.0;
          for (std::size_t y = 0; y < n; ++y) {
            linear += W[y] * delta.delta[y];
            quadratic += c[y] * delta.delta[y] * delta.delta[y];
          }
          out.loss = -linear + 0.5 * mu * quadratic;
        }
        out.grad = pullback_log(partials, pi);
      }
      break;
    }
    case Algo::GRPO:
    case Algo::KLPG:
    case Algo::L2PG: {
      std::vector<double> partials(n);
      for (std::size_t y = 0; y < n; ++y) partials[y] = -W[y];
      out.grad = pullback_log(partials, pi);
      if (cfg.algo == Algo::GRPO) {
        out.loss = pg_loss(theta, targets.advantages, targets.batch.outcome_ids);
      } else if (cfg.algo == Algo::KLPG) {
        const double beta = *cfg.beta;
        out.loss = kl_reg_pg_loss(pi, ref, targets.advantages, targets.batch.outcome_ids, beta);
        const auto kl_grad = kl_logit_gradient(pi, ref);
        for (std::size_t j = 0; j < n; ++j) out.grad[j] += beta * kl_grad[j];
      } else {
        L2PgConfig l2{*cfg.lambda, theta0};
        out.loss = l2_pg_loss(theta, targets.advantages, targets.batch.outcome_ids, l2);
        for (std::size_t j = 0; j < n; ++j) {
          out.grad[j] += l2.lambda * (theta.logits[j] - theta0.logits[j]);
        }
      }
      break;
    }
    case Algo::DPO: {
      const double beta = *cfg.beta;
      out.grad.assign(n, 0.0);
      if (targets.pairs.empty()) break;
      const LogRatioField delta = log_ratio_from_policies(pi, ref);
      for (const auto& pair : targets.pairs) {
        const std::size_t w = targets.batch.outcome_ids[pair.winner];
        const std::size_t l = targets.batch.outcome_ids[pair.loser];
        // beta-free margin; the temperature is applied inside the loss.
        const double margin = delta.delta[w] - delta.delta[l];
        out.loss += dpo_logistic_loss(margin, beta);
        const double d = dpo_loss_derivative(margin, beta);
        out.grad[w] += d;
        out.grad[l] -= d;
      }
      break;
    }
  }
  return out;
}

TrainResult run_training(const Environment& env, const TrainConfig& cfg,
                         const StepObserver& observer) {
  std::vector<std::string> warnings = cfg.validate();
  const std::size_t n = enumerate_outcomes(env).size();

  PolicyLogits theta = cfg.initial_logits.value_or(PolicyLogits{std::vector<double>(n, 0.0)});
  require_same_space(theta.size(), n, "initial logits");
  const PolicyLogits theta0 = theta;
  const CategoricalPolicy initial_policy = softmax(theta0);

  SplitMix64 seeds(cfg.seed);
  std::vector<RunMetrics> metrics;
  metrics.reserve(static_cast<std::size_t>(cfg.steps));
  int idle_dpo_steps = 0;

  for (int step = 1; step <= cfg.steps; ++step) {
    const CategoricalPolicy pi = softmax(theta);
    const CategoricalPolicy ref = cfg.anchor_mode == AnchorMode::OnPolicy ? pi : initial_policy;

    RolloutBatch batch = sample_rollouts(env, pi, static_cast<std::size_t>(cfg.rollouts_per_step),
                                         Seed{seeds.next()});
    const StepTargets targets = prepare_step(cfg, pi, ref, std::move(batch));
    if (cfg.algo == Algo::DPO && targets.pairs.empty()) ++idle_dpo_steps;

    const StepEvaluation eval = evaluate_step(cfg, targets, theta, ref, theta0);
    const PolicyLogits theta_before = theta;
    for (std::size_t j = 0; j < n; ++j) theta.logits[j] -= cfg.eta * eval.grad[j];
    const CategoricalPolicy after = softmax(theta);

    RunMetrics m;
    m.step = step;
    m.mean_reward = exact_expected_reward(env, after);
    m.grad_norm = norm2(eval.grad);
    m.entropy = policy_entropy(after);
    m.chi2_to_ref = chi2_divergence(after, ref, ref);
    m.kl_to_ref = kl_divergence(after, ref);
    m.tv_to_ref = tv_distance(after, ref);
    m.loss = eval.loss;
    metrics.push_back(m);

    if (observer) observer(StepSnapshot{step, theta_before, ref, targets, eval, after});
  }

  if (idle_dpo_steps > 0) {
    warnings.push_back(std::to_string(idle_dpo_steps) +
                       " steps had no preference pairs (all rewards tied) and were no-ops");
  }
  CategoricalPolicy final_policy = softmax(theta);
  return TrainResult{std::move(metrics), std::move(final_policy), std::move(theta),
                     std::move(warnings)};
}

}  // namespace opo
