// SPDX-License-Identifier: Apache-2.0

#include "opo/objectives.hpp"

#include "opo/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace opo {

namespace {

void require_mu(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("stiffness mu must be finite and > 0");
  }
}

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("temperature beta must be finite and > 0");
  }
}

void require_samples(std::span<const std::size_t> sample_set, std::size_t n) {
  if (sample_set.empty()) throw std::invalid_argument("empty sample set");
  for (std::size_t y : sample_set) {
    if (y >= n) throw std::out_of_range("sample index outside the outcome space");
  }
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

void OpoConfig::validate() const {
  require_mu(mu);
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
}

void DpoConfig::validate() const { require_beta(beta); }

void L2PgConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be finite and >= 0");
  }
}

double opo_loss_ratio(const RatioField& v, const WeightField& omega,
                      const CategoricalPolicy& ref, double mu) {
  require_mu(mu);
  require_same_space(v.size(), omega.size(), "opo_loss_ratio");
  require_same_space(v.size(), ref.size(), "opo_loss_ratio");
  double linear = 0.0;
  double quadratic = 0.0;
  for (std::size_t y = 0; y < v.size(); ++y) {
    linear += ref[y] * omega.omega[y] * v.v[y];
    quadratic += ref[y] * v.v[y] * v.v[y];
  }
  return -linear + 0.5 * mu * quadratic;
}

RatioField opo_grad_v(const RatioField& v, const WeightField& omega, double mu) {
  require_mu(mu);
  require_same_space(v.size(), omega.size(), "opo_grad_v");
  RatioField g{std::vector<double>(v.size())};
  for (std::size_t y = 0; y < v.size(); ++y) g.v[y] = -omega.omega[y] + mu * v.v[y];
  return g;
}

RatioField opo_closed_form(const WeightField& omega, double mu) {
  require_mu(mu);
  RatioField v{std::vector<double>(omega.size())};
  for (std::size_t y = 0; y < v.size(); ++y) v.v[y] = omega.omega[y] / mu;
  return v;
}

double opo_loss_log(const LogRatioField& delta, const WeightField& omega,
                    std::span<const std::size_t> sample_set, const CategoricalPolicy& ref,
                    double mu) {
  require_mu(mu);
  require_same_space(delta.size(), omega.size(), "opo_loss_log");
  require_same_space(delta.size(), ref.size(), "opo_loss_log");
  require_samples(sample_set, delta.size());
  std::unordered_set<std::size_t> seen;
  double linear = 0.0;
  for (std::size_t y : sample_set) {
    if (!seen.insert(y).second) throw std::invalid_argument("duplicate index in sample set");
    linear += omega.omega[y] * delta.delta[y];
  }
  double quadratic = 0.0;
  for (std::size_t y = 0; y < delta.size(); ++y) {
    quadratic += ref[y] * delta.delta[y] * delta.delta[y];
  }
  return -linear + 0.5 * mu * quadratic;
}

DualSolution lagrange_dual_solve(const WeightField& omega, const CategoricalPolicy& ref,
                                 double epsilon) {
  const double mu = TrustRegion::from_radius(epsilon).resolve_mu(omega, ref);
  return {opo_closed_form(omega, mu), mu};
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dpo_logistic_loss(double margin, double beta) {
  require_beta(beta);
  return softplus(-beta * margin);
}

double dpo_margin_grad(double margin, double beta) {
  require_beta(beta);
  // s(1 - s) = sigmoid(m) sigmoid(-m); the product form keeps the tails accurate.
  return beta * sigmoid(margin) * sigmoid(-margin);
}

double dpo_margin_curvature(double margin, double beta) {
  require_beta(beta);
  return beta * beta * sigmoid(margin) * sigmoid(-margin);
}

double dpo_loss_derivative(double margin, double beta) {
  require_beta(beta);
  return -beta * sigmoid(-beta * margin);
}

double pg_loss(const PolicyLogits& logits, const AdvantageField& advantages,
               std::span<const std::size_t> sample_set) {
  require_samples(sample_set, logits.size());
  require_same_space(sample_set.size(), advantages.size(), "pg_loss");
  const auto log_pi = log_softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < sample_set.size(); ++i) {
    total -= advantages.a[i] * log_pi[sample_set[i]];
  }
  return total;
}

double l2_pg_loss(const PolicyLogits& logits, const AdvantageField& advantages,
                  std::span<const std::size_t> sample_set, const L2PgConfig& cfg) {
  cfg.validate();
  require_same_space(logits.size(), cfg.theta0.size(), "l2_pg_loss");
  double sq = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const double d = logits.logits[j] - cfg.theta0.logits[j];
    sq += d * d;
  }
  return pg_loss(logits, advantages, sample_set) + 0.5 * cfg.lambda * sq;
}

double kl_reg_pg_loss(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref,
                      const AdvantageField& advantages,
                      std::span<const std::size_t> sample_set, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("KL coefficient must be finite and >= 0");
  }
  require_samples(sample_set, pi.size());
  require_same_space(sample_set.size(), advantages.size(), "kl_reg_pg_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < sample_set.size(); ++i) {
    const double p = pi[sample_set[i]];
    if (p <= 0.0) throw std::domain_error("sampled outcome has zero probability");
    total -= advantages.a[i] * std::log(p);
  }
  return total + beta * kl_divergence(pi, pi_ref);
}

std::vector<double> pullback_ratio(const RatioField& g, const CategoricalPolicy& pi) {
  require_same_space(g.size(), pi.size(), "pullback_ratio");
  double mean = 0.0;
  for (std::size_t y = 0; y < g.size(); ++y) mean += pi[y] * g.v[y];
  std::vector<double> out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) out[j] = pi[j] * (g.v[j] - mean);
  return out;
}

std::vector<double> pullback_log(std::span<const double> c, const CategoricalPolicy& pi) {
  require_same_space(c.size(), pi.size(), "pullback_log");
  double total = 0.0;
  for (double x : c) total += x;
  std::vector<double> out(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) out[j] = c[j] - pi[j] * total;
  return out;
}

std::vector<double> kl_logit_gradient(const CategoricalPolicy& pi, const CategoricalPolicy& ref) {
  const double kl = kl_divergence(pi, ref);
  std::vector<double> out(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    out[j] = pi[j] > 0.0 ? pi[j] * (std::log(pi[j] / ref[j]) - kl) : 0.0;
  }
  return out;
}

}  // namespace opo
