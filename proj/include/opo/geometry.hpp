#pragma once

// SPDX-License-Identifier: Apache-2.0

// Mirror maps over ratio coordinates and the divergences they induce.
//
// Inner products are taken in L2(pi_ref): <f, g> = sum_y ref(y) f(y) g(y).
// Under that convention the functional gradient of a potential at y carries
// no ref(y) factor. Chi-square carries the factor 1/2 throughout:
//   chi2(pi || pi_k) = 1/2 E_ref[(pi/ref - pi_k/ref)^2].

#include "opo/core_types.hpp"

#include <optional>

namespace opo {

enum class MirrorKind { EuclideanRatio, NegativeEntropy };

class MirrorMap {
 public:
  /// Throws std::invalid_argument when `reference` has a zero entry.
  MirrorMap(MirrorKind kind, CategoricalPolicy reference);

  MirrorKind kind() const { return kind_; }
  const CategoricalPolicy& reference() const { return reference_; }

  /// Psi(v). Euclidean: 1/2 E_ref[v^2]. Negative entropy: E_ref[(1+v) log(1+v)].
  double potential(const RatioField& v) const;

  /// Functional gradient of Psi in L2(ref). Euclidean: v. Negative entropy: log(1+v) + 1.
  RatioField gradient(const RatioField& v) const;

 private:
  MirrorKind kind_;
  CategoricalPolicy reference_;
};

double potential(const MirrorMap& map, const RatioField& v);

/// D_Psi(pi || pi_k) = Psi(v) - Psi(v_k) - <grad Psi(v_k), v - v_k>, with
/// both ratio fields taken against map.reference().
double bregman(const MirrorMap& map, const CategoricalPolicy& pi,
               const CategoricalPolicy& pi_k);

double chi2_divergence(const CategoricalPolicy& pi, const CategoricalPolicy& pi_k,
                       const CategoricalPolicy& ref);

double kl_divergence(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref);

double tv_distance(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref);

/// 1/2 sqrt(E_ref[v^2]) - TV(pi, pi_ref). Non-negative by Jensen.
double tv_chi2_bound_gap(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref);

/// Stiffness mu or chi-square radius epsilon; exactly one is authoritative.
/// The two are linked through the weight field: mu = sqrt(E_ref[omega^2] / epsilon).
class TrustRegion {
 public:
  static TrustRegion from_stiffness(double mu);
  static TrustRegion from_radius(double epsilon);

  bool stiffness_authoritative() const { return mu_.has_value(); }
  std::optional<double> mu() const { return mu_; }
  std::optional<double> epsilon() const { return epsilon_; }

  /// The stiffness to use against `omega`; derived from the radius if needed.
  double resolve_mu(const WeightField& omega, const CategoricalPolicy& ref) const;

 private:
  TrustRegion() = default;
  std::optional<double> mu_;
  std::optional<double> epsilon_;
};

}  // namespace opo
