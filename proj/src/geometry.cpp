// SPDX-License-Identifier: Apache-2.0

#include "opo/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace opo {

MirrorMap::MirrorMap(MirrorKind kind, CategoricalPolicy reference)
    : kind_(kind), reference_(std::move(reference)) {
  require_reference(reference_);
}

double MirrorMap::potential(const RatioField& v) const {
  require_same_space(v.size(), reference_.size(), "potential");
  double total = 0.0;
  for (std::size_t y = 0; y < v.size(); ++y) {
    const double x = v.v[y];
    if (!std::isfinite(x)) throw std::invalid_argument("potential: non-finite ratio");
    if (kind_ == MirrorKind::EuclideanRatio) {
      total += reference_[y] * x * x;
    } else {
      const double t = 1.0 + x;
      if (t < 0.0) throw std::domain_error("negative entropy potential needs v >= -1");
      // 0 log 0 := 0 at t = 0, the boundary reached by a zero-probability policy entry.
      if (t > 0.0) total += reference_[y] * t * std::log(t);
    }
  }
  return kind_ == MirrorKind::EuclideanRatio ? 0.5 * total : total;
}

RatioField MirrorMap::gradient(const RatioField& v) const {
  require_same_space(v.size(), reference_.size(), "gradient");
  if (kind_ == MirrorKind::EuclideanRatio) return v;
  RatioField g{std::vector<double>(v.size())};
  for (std::size_t y = 0; y < v.size(); ++y) {
    const double t = 1.0 + v.v[y];
    if (t <= 0.0) throw std::domain_error("negative entropy gradient needs v > -1");
    g.v[y] = std::log(t) + 1.0;
  }
  return g;
}

double potential(const MirrorMap& map, const RatioField& v) { return map.potential(v); }

double bregman(const MirrorMap& map, const CategoricalPolicy& pi,
               const CategoricalPolicy& pi_k) {
  const auto& ref = map.reference();
  const RatioField v = ratio_from_policies(pi, ref);
  const RatioField vk = ratio_from_policies(pi_k, ref);
  const RatioField grad_k = map.gradient(vk);
  double inner = 0.0;
  for (std::size_t y = 0; y < v.size(); ++y) {
    inner += ref[y] * grad_k.v[y] * (v.v[y] - vk.v[y]);
  }
  const double d = map.potential(v) - map.potential(vk) - inner;
  // Cancellation can leave a tiny negative residue when pi == pi_k.
  return d < 0.0 ? 0.0 : d;
}

double chi2_divergence(const CategoricalPolicy& pi, const CategoricalPolicy& pi_k,
                       const CategoricalPolicy& ref) {
  require_same_space(pi.size(), pi_k.size(), "chi2_divergence");
  require_same_space(pi.size(), ref.size(), "chi2_divergence");
  require_reference(ref);
  double total = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) {
    const double d = pi[y] / ref[y] - pi_k[y] / ref[y];
    total += ref[y] * d * d;
  }
  return 0.5 * total;
}

double kl_divergence(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref) {
  require_same_space(pi.size(), pi_ref.size(), "kl_divergence");
  require_reference(pi_ref);
  double total = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (pi[y] > 0.0) total += pi[y] * std::log(pi[y] / pi_ref[y]);
  }
  return total < 0.0 ? 0.0 : total;
}

double tv_distance(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref) {
  require_same_space(pi.size(), pi_ref.size(), "tv_distance");
  double total = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) total += std::abs(pi[y] - pi_ref[y]);
  return std::min(0.5 * total, 1.0);
}

double tv_chi2_bound_gap(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref) {
  const RatioField v = ratio_from_policies(pi, pi_ref);
  double second_moment = 0.0;
  for (std::size_t y = 0; y < v.size(); ++y) second_moment += pi_ref[y] * v.v[y] * v.v[y];
  return 0.5 * std::sqrt(second_moment) - tv_distance(pi, pi_ref);
}

TrustRegion TrustRegion::from_stiffness(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("trust region stiffness must be finite and > 0");
  }
  TrustRegion tr;
  tr.mu_ = mu;
  return tr;
}

TrustRegion TrustRegion::from_radius(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("trust region radius must be finite and > 0");
  }
  TrustRegion tr;
  tr.epsilon_ = epsilon;
  return tr;
}

double TrustRegion::resolve_mu(const WeightField& omega, const CategoricalPolicy& ref) const {
  if (mu_) return *mu_;
  require_same_space(omega.size(), ref.size(), "resolve_mu");
  double second_moment = 0.0;
  for (std::size_t y = 0; y < omega.size(); ++y) {
    second_moment += ref[y] * omega.omega[y] * omega.omega[y];
  }
  if (second_moment == 0.0) {
    throw std::invalid_argument("zero weight field: multiplier is undefined");
  }
  return std::sqrt(second_moment / *epsilon_);
}

}  // namespace opo
