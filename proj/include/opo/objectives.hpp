#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file objectives.hpp
 * @brief The OPO loss in ratio and log-ratio coordinates, its functional
 * gradient and closed-form minimizer, the chi-square constrained dual, and
 * the baseline objectives (logistic preference loss, KL-regularized and
 * L2-regularized policy gradient).
 *
 * Every objective here is a loss to be minimized.
 *
 * OPO in ratio coordinates:
 *   L(v) = -E_ref[omega v] + (mu/2) E_ref[v^2]
 *   grad_v L(y) = -omega(y) + mu v(y)        (functional gradient in L2(ref))
 *   v*(y)      = omega(y) / mu
 *
 * OPO in log-ratio coordinates (small trust regions, v ~ delta):
 *   L(delta) = -sum_{y in S} omega(y) delta(y) + (mu/2) E_ref[delta^2]
 *
 * Parameter-space gradients for tabular softmax policies are obtained by
 * pulling the coordinate gradients back through the softmax Jacobian.
 */

#include "opo/core_types.hpp"

#include <span>
#include <utility>

namespace opo {

enum class CoordinateMode { ExactRatio, LogApprox };

struct OpoConfig {
  double alpha = 0.6;
  double mu = 1.0;
  CoordinateMode coordinate_mode = CoordinateMode::ExactRatio;

  void validate() const;
};

struct DpoConfig {
  double beta = 1.0;

  void validate() const;
};

struct L2PgConfig {
  double lambda = 0.0;
  PolicyLogits theta0;

  void validate() const;
};

// -- OPO ---------------------------------------------------------------------

double opo_loss_ratio(const RatioField& v, const WeightField& omega,
                      const CategoricalPolicy& ref, double mu);

RatioField opo_grad_v(const RatioField& v, const WeightField& omega, double mu);

RatioField opo_closed_form(const WeightField& omega, double mu);

/// `sample_set` lists distinct outcome indices; duplicates are rejected, since
/// repeated draws are already folded into the per-outcome weights.
double opo_loss_log(const LogRatioField& delta, const WeightField& omega,
                    std::span<const std::size_t> sample_set,
                    const CategoricalPolicy& ref, double mu);

struct DualSolution {
  RatioField v;
  double mu;
};

/// Maximizes E_ref[omega v] subject to E_ref[v^2] <= epsilon. The returned v
/// is exactly opo_closed_form(omega, mu) for the implied multiplier mu.
/// Throws std::invalid_argument when omega is identically zero.
DualSolution lagrange_dual_solve(const WeightField& omega, const CategoricalPolicy& ref,
                                 double epsilon);

// -- Logistic preference loss --------------------------------------------------

double sigmoid(double x);

/// -log sigmoid(beta * margin), evaluated without overflow.
double dpo_logistic_loss(double margin, double beta);

/// beta * s * (1 - s) with s = sigmoid(margin), the margin already carrying
/// its temperature. Peaks at beta/4 for margin = 0 and decays exponentially
/// in |margin|.
double dpo_margin_grad(double margin, double beta);

/// beta^2 s (1 - s), s = sigmoid(margin): the local curvature scale of the
/// logistic loss.
double dpo_margin_curvature(double margin, double beta);

/// d/dm of dpo_logistic_loss: -beta * (1 - sigmoid(beta * m)).
double dpo_loss_derivative(double margin, double beta);

// -- Policy-gradient baselines ------------------------------------------------

/// -sum_{y in S} A(y) log pi(y). `sample_set[i]` is the outcome for `advantages.a[i]`.
double pg_loss(const PolicyLogits& logits, const AdvantageField& advantages,
               std::span<const std::size_t> sample_set);

double l2_pg_loss(const PolicyLogits& logits, const AdvantageField& advantages,
                  std::span<const std::size_t> sample_set, const L2PgConfig& cfg);

double kl_reg_pg_loss(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref,
                      const AdvantageField& advantages,
                      std::span<const std::size_t> sample_set, double beta);

// -- Pullbacks to softmax logits -----------------------------------------------

/// E_ref[g(y) d v(y)/d theta] for v = softmax(theta)/ref - 1. Per component:
/// pi_j (g_j - E_pi[g]). This is the parameter-space image of a functional
/// gradient g taken in L2(ref).
std::vector<double> pullback_ratio(const RatioField& g, const CategoricalPolicy& pi);

/// sum_y c(y) d log pi(y)/d theta = c - pi * sum(c) for Euclidean coordinate
/// partials c(y) of a loss in log-probabilities.
std::vector<double> pullback_log(std::span<const double> c, const CategoricalPolicy& pi);

/// Gradient of kl(pi || ref) with respect to the logits of pi.
std::vector<double> kl_logit_gradient(const CategoricalPolicy& pi, const CategoricalPolicy& ref);

}  // namespace opo
