#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file dynamics.hpp
 * @brief Function-space experiments on the OPO objective: gradient descent in
 * v-space and its contraction rate, finite-difference curvature probes,
 * logistic-vs-linear saturation tables, the log-ratio approximation bounds,
 * and the parameter-gradient projection check.
 *
 * Finite-difference steps: 1e-5 for gradients, 1e-4 for curvature probes.
 * Distances are measured in the L2(ref) norm.
 */

#include "opo/core_types.hpp"

#include <vector>

namespace opo {

struct DescentTrace {
  std::vector<RatioField> iterates;
  /// L2(ref) distance of each iterate to v* = omega / mu.
  std::vector<double> distances;
  /// distances[k+1] / distances[k]; NaN once the distance reaches zero.
  std::vector<double> rate_estimates;
  double eta = 0.0;
  double mu = 0.0;
  /// Set when |1 - eta mu| >= 1, i.e. outside the contraction regime.
  bool divergent = false;
};

/// v_{k+1} = v_k - eta * (-omega + mu v_k) for `steps` steps.
DescentTrace v_space_descent(const RatioField& v0, const WeightField& omega,
                             const CategoricalPolicy& ref, double mu, double eta, int steps);

/// Geometric mean of the successive distance ratios, taken over the leading
/// iterates whose distance exceeds max(1e-13, 1e-8 * d0) so that round-off in
/// v_k - v* does not bias the estimate. Needs at least 3 such iterates.
double measure_contraction_rate(const DescentTrace& trace);

struct HessianProbe {
  /// One row-major n x n matrix per probe point.
  std::vector<std::vector<double>> matrices;
  std::size_t dimension = 0;
  double max_diag_error = 0.0;  ///< max |H_yy - mu|
  double max_offdiag = 0.0;     ///< max |H_yz|, y != z
};

/// Central differences (step h) of the Euclidean coordinate gradient of the
/// ratio loss, each row divided by ref(y) to return to the L2(ref) metric.
HessianProbe hessian_probe(const WeightField& omega, const CategoricalPolicy& ref, double mu,
                           const std::vector<RatioField>& probe_points, double h = 1e-4);

struct MarginRow {
  double margin = 0.0;
  double dpo_grad = 0.0;       ///< |dpo_margin_grad(m, beta)|
  double dpo_curvature = 0.0;  ///< beta^2 s (1 - s), reported, not asserted
};

struct OffsetRow {
  double offset = 0.0;    ///< d = |v - v*|
  double opo_grad = 0.0;  ///< |grad_v L| at that distance
};

struct SaturationProfile {
  std::vector<MarginRow> margins;
  std::vector<OffsetRow> offsets;
  double beta = 0.0;
  double mu = 0.0;
  double dpo_max = 0.0;
  double dpo_argmax = 0.0;
  /// max |opo_grad - mu d| over the offset rows.
  double opo_linearity_error = 0.0;
};

SaturationProfile saturation_profile(double beta, double mu, const std::vector<double>& margins,
                                     const std::vector<double>& v_offsets);

struct LogApproxReport {
  double delta_inf = 0.0;
  std::vector<double> err_v;   ///< |v - delta|
  std::vector<double> err_sq;  ///< |v^2 - delta^2|
  double bound_v = 0.0;        ///< 1/2 delta^2 e^delta
  double bound_sq = 0.0;       ///< delta^3 e^(2 delta)
  std::size_t violations = 0;

  bool holds() const { return violations == 0; }
};

/// Throws std::domain_error when ||delta||_inf >= 1.
LogApproxReport log_approx_error_check(const LogRatioField& delta);

struct GradCheckReport {
  std::vector<double> chain_rule;
  std::vector<double> finite_difference;
  double max_abs_error = 0.0;
  /// max_abs_error / max(||chain_rule||_inf, ||finite_difference||_inf, 1e-6)
  double max_rel_error = 0.0;
};

/// Loss of the ratio objective as a function of softmax logits.
double opo_logit_loss(const PolicyLogits& logits, const CategoricalPolicy& ref,
                      const WeightField& omega, double mu);

/// Compares the projected functional gradient E_ref[grad_v L * d v/d theta]
/// (explicit softmax Jacobian) with central differences of the loss in theta.
GradCheckReport param_grad_check(const PolicyLogits& logits, const CategoricalPolicy& ref,
                                 const WeightField& omega, double mu, double h = 1e-5);

struct StepStudyPoint {
  double h = 0.0;
  double max_abs_error = 0.0;
};

struct StepStudy {
  std::vector<StepStudyPoint> points;
  /// Least-squares slope of log(error) against log(h).
  double order = 0.0;
};

/// Finite-difference error of param_grad_check as h is halved from h0.
StepStudy fd_step_study(const PolicyLogits& logits, const CategoricalPolicy& ref,
                        const WeightField& omega, double mu, double h0 = 0.1, int halvings = 5);

}  // namespace opo
