// SPDX-License-Identifier: Apache-2.0

#include "opo/dynamics.hpp"

#include "opo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace opo {

namespace {

double weighted_distance(const RatioField& a, const RatioField& b, const CategoricalPolicy& ref) {
  double total = 0.0;
  for (std::size_t y = 0; y < a.size(); ++y) {
    const double d = a.v[y] - b.v[y];
    total += ref[y] * d * d;
  }
  return std::sqrt(total);
}

double inf_norm(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

DescentTrace v_space_descent(const RatioField& v0, const WeightField& omega,
                             const CategoricalPolicy& ref, double mu, double eta, int steps) {
  if (steps < 1) throw std::invalid_argument("descent needs at least one step");
  require_same_space(v0.size(), omega.size(), "v_space_descent");
  require_same_space(v0.size(), ref.size(), "v_space_descent");
  if (!std::isfinite(eta)) throw std::invalid_argument("step size must be finite");

  DescentTrace trace;
  trace.eta = eta;
  trace.mu = mu;
  trace.divergent = std::abs(1.0 - eta * mu) >= 1.0;

  const RatioField target = opo_closed_form(omega, mu);
  trace.iterates.reserve(static_cast<std::size_t>(steps) + 1);
  trace.iterates.push_back(v0);
  trace.distances.push_back(weighted_distance(v0, target, ref));

  for (int k = 0; k < steps; ++k) {
    const RatioField& v = trace.iterates.back();
    const RatioField g = opo_grad_v(v, omega, mu);
    RatioField next{std::vector<double>(v.size())};
    for (std::size_t y = 0; y < v.size(); ++y) next.v[y] = v.v[y] - eta * g.v[y];
    trace.distances.push_back(weighted_distance(next, target, ref));
    trace.iterates.push_back(std::move(next));
    const double prev = trace.distances[trace.distances.size() - 2];
    trace.rate_estimates.push_back(prev > 0.0 ? trace.distances.back() / prev
                                              : std::numeric_limits<double>::quiet_NaN());
  }
  return trace;
}

double measure_contraction_rate(const DescentTrace& trace) {
  if (trace.distances.empty()) throw std::invalid_argument("empty trace");
  const double d0 = trace.distances.front();
  const double floor = std::max(1e-13, 1e-8 * d0);
  std::size_t usable = 0;
  while (usable < trace.distances.size() && trace.distances[usable] > floor) ++usable;
  if (usable < 3) {
    throw std::invalid_argument("trace too short or already at equilibrium");
  }
  const double k = static_cast<double>(usable - 1);
  return std::exp((std::log(trace.distances[usable - 1]) - std::log(d0)) / k);
}

HessianProbe hessian_probe(const WeightField& omega, const CategoricalPolicy& ref, double mu,
                           const std::vector<RatioField>& probe_points, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("degenerate probe step");
  require_reference(ref);
  const std::size_t n = ref.size();
  HessianProbe out;
  out.dimension = n;

  // Euclidean partials dL/dv(y) = ref(y) * (functional gradient)(y).
  auto coordinate_gradient = [&](const RatioField& v) {
    RatioField g = opo_grad_v(v, omega, mu);
    for (std::size_t y = 0; y < n; ++y) g.v[y] *= ref[y];
    return g;
  };

  for (const auto& point : probe_points) {
    require_same_space(point.size(), n, "hessian_probe");
    std::vector<double> m(n * n);
    for (std::size_t z = 0; z < n; ++z) {
      RatioField plus = point;
      RatioField minus = point;
      plus.v[z] += h;
      minus.v[z] -= h;
      const RatioField gp = coordinate_gradient(plus);
      const RatioField gm = coordinate_gradient(minus);
      for (std::size_t y = 0; y < n; ++y) {
        m[y * n + z] = (gp.v[y] - gm.v[y]) / (2.0 * h) / ref[y];
      }
    }
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t z = 0; z < n; ++z) {
        const double value = m[y * n + z];
        if (y == z) {
          out.max_diag_error = std::max(out.max_diag_error, std::abs(value - mu));
        } else {
          out.max_offdiag = std::max(out.max_offdiag, std::abs(value));
        }
      }
    }
    out.matrices.push_back(std::move(m));
  }
  return out;
}

SaturationProfile saturation_profile(double beta, double mu, const std::vector<double>& margins,
                                     const std::vector<double>& v_offsets) {
  if (margins.empty() || v_offsets.empty()) throw std::invalid_argument("empty saturation grid");
  SaturationProfile out;
  out.beta = beta;
  out.mu = mu;
  out.dpo_max = -1.0;

  for (double m : margins) {
    MarginRow row{m, std::abs(dpo_margin_grad(m, beta)), dpo_margin_curvature(m, beta)};
    if (row.dpo_grad > out.dpo_max) {
      out.dpo_max = row.dpo_grad;
      out.dpo_argmax = m;
    }
    out.margins.push_back(row);
  }

  // Unit scalar driving force; the OPO column depends only on the offset.
  const WeightField omega{{1.0}};
  const RatioField equilibrium = opo_closed_form(omega, mu);
  for (double d : v_offsets) {
    const RatioField v{{equilibrium.v[0] + d}};
    OffsetRow row{std::abs(d), std::abs(opo_grad_v(v, omega, mu).v[0])};
    // Compare against the offset actually representable after adding it to v*.
    const double realized = std::abs(v.v[0] - equilibrium.v[0]);
    out.opo_linearity_error =
        std::max(out.opo_linearity_error, std::abs(row.opo_grad - mu * realized));
    out.offsets.push_back(row);
  }
  return out;
}

LogApproxReport log_approx_error_check(const LogRatioField& delta) {
  LogApproxReport out;
  out.delta_inf = inf_norm(delta.delta);
  if (!(out.delta_inf < 1.0)) {
    throw std::domain_error("log-ratio bound requires ||delta||_inf < 1");
  }
  const double d = out.delta_inf;
  out.bound_v = 0.5 * d * d * std::exp(d);
  out.bound_sq = d * d * d * std::exp(2.0 * d);
  out.err_v.resize(delta.size());
  out.err_sq.resize(delta.size());
  for (std::size_t y = 0; y < delta.size(); ++y) {
    const double x = delta.delta[y];
    const double v = std::expm1(x);
    out.err_v[y] = std::abs(v - x);
    out.err_sq[y] = std::abs(v * v - x * x);
    if (out.err_v[y] > out.bound_v || out.err_sq[y] > out.bound_sq) ++out.violations;
  }
  return out;
}

double opo_logit_loss(const PolicyLogits& logits, const CategoricalPolicy& ref,
                      const WeightField& omega, double mu) {
  return opo_loss_ratio(ratio_from_policies(softmax(logits), ref), omega, ref, mu);
}

GradCheckReport param_grad_check(const PolicyLogits& logits, const CategoricalPolicy& ref,
                                 const WeightField& omega, double mu, double h) {
  require_reference(ref);
  require_same_space(logits.size(), ref.size(), "param_grad_check");
  const std::size_t n = logits.size();
  const CategoricalPolicy pi = softmax(logits);
  const RatioField v = ratio_from_policies(pi, ref);
  const RatioField g = opo_grad_v(v, omega, mu);

  GradCheckReport out;
  out.chain_rule.assign(n, 0.0);
  // d v(y) / d theta_j = pi(y) (1[y == j] - pi(j)) / ref(y)
  for (std::size_t j = 0; j < n; ++j) {
    double total = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      const double jac = pi[y] * ((y == j ? 1.0 : 0.0) - pi[j]) / ref[y];
      total += ref[y] * g.v[y] * jac;
    }
    out.chain_rule[j] = total;
  }

  out.finite_difference.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    PolicyLogits plus = logits;
    PolicyLogits minus = logits;
    plus.logits[j] += h;
    minus.logits[j] -= h;
    out.finite_difference[j] =
        (opo_logit_loss(plus, ref, omega, mu) - opo_logit_loss(minus, ref, omega, mu)) / (2.0 * h);
  }

  for (std::size_t j = 0; j < n; ++j) {
    out.max_abs_error =
        std::max(out.max_abs_error, std::abs(out.chain_rule[j] - out.finite_difference[j]));
  }
  const double scale =
      std::max({inf_norm(out.chain_rule), inf_norm(out.finite_difference), 1e-6});
  out.max_rel_error = out.max_abs_error / scale;
  return out;
}

StepStudy fd_step_study(const PolicyLogits& logits, const CategoricalPolicy& ref,
                        const WeightField& omega, double mu, double h0, int halvings) {
  if (halvings < 1) throw std::invalid_argument("step study needs at least one halving");
  StepStudy out;
  double h = h0;
  for (int i = 0; i <= halvings; ++i, h *= 0.5) {
    out.points.push_back({h, param_grad_check(logits, ref, omega, mu, h).max_abs_error});
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto m = static_cast<double>(out.points.size());
  for (const auto& p : out.points) {
    const double x = std::log(p.h);
    const double y = std::log(p.max_abs_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return out;
}

}  // namespace opo
