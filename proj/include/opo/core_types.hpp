#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file core_types.hpp
 * @brief Value types shared across the library: outcome spaces, categorical
 * policies, logits, and the per-outcome coordinate fields.
 *
 * Coordinates relative to a reference policy pi_ref:
 *   t(y)     = pi(y) / pi_ref(y)          density ratio
 *   v(y)     = t(y) - 1                   centered ratio  (RatioField)
 *   delta(y) = log pi(y) - log pi_ref(y)  log-ratio       (LogRatioField)
 * so that v = exp(delta) - 1.
 *
 * All types are immutable once constructed; every operation is a pure
 * function and is safe to call concurrently.
 */

#include <cstddef>
#include <span>
#include <vector>

namespace opo {

class OutcomeSpace {
 public:
  /// Throws std::invalid_argument when size < 2.
  explicit OutcomeSpace(std::size_t size);
  std::size_t size() const { return size_; }
  bool operator==(const OutcomeSpace&) const = default;

 private:
  std::size_t size_;
};

/// A normalized probability vector over a finite outcome space.
class CategoricalPolicy {
 public:
  static constexpr double kSumTolerance = 1e-12;

  /// Validates: size >= 2, finite entries, each >= 0, sum within 1e-12 of 1.
  explicit CategoricalPolicy(std::vector<double> probs);

  static CategoricalPolicy uniform(std::size_t n);
  static CategoricalPolicy one_hot(std::size_t n, std::size_t index);

  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t y) const { return probs_[y]; }
  std::size_t size() const { return probs_.size(); }
  OutcomeSpace space() const { return OutcomeSpace(probs_.size()); }
  bool strictly_positive() const;

 private:
  std::vector<double> probs_;
};

/// Throws std::invalid_argument unless every entry of `ref` is > 0.
void require_reference(const CategoricalPolicy& ref);

/// Throws std::invalid_argument on a size mismatch.
void require_same_space(std::size_t a, std::size_t b, const char* what);

struct PolicyLogits {
  std::vector<double> logits;

  std::size_t size() const { return logits.size(); }
};

/// Numerically stable softmax; throws on non-finite logits.
CategoricalPolicy softmax(const PolicyLogits& theta);
std::vector<double> log_softmax(const PolicyLogits& theta);

struct RatioField {
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
  double ratio(std::size_t y) const { return v[y] + 1.0; }
};

struct LogRatioField {
  std::vector<double> delta;

  std::size_t size() const { return delta.size(); }
};

/// Advantages over the sampled outcomes of one rollout group.
struct AdvantageField {
  std::vector<double> a;

  std::size_t size() const { return a.size(); }
};

struct WeightField {
  std::vector<double> omega;

  std::size_t size() const { return omega.size(); }
};

struct RunMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double grad_norm = 0.0;
  double entropy = 0.0;
  double chi2_to_ref = 0.0;
  double kl_to_ref = 0.0;
  double tv_to_ref = 0.0;
  double loss = 0.0;
};

/// v(y) = pi(y)/pi_ref(y) - 1.
RatioField ratio_from_policies(const CategoricalPolicy& pi,
                               const CategoricalPolicy& pi_ref);

/// delta(y) = log pi(y) - log pi_ref(y); both policies must be strictly positive.
LogRatioField log_ratio_from_policies(const CategoricalPolicy& pi,
                                      const CategoricalPolicy& pi_ref);

/// Shannon entropy in nats with 0 log 0 := 0.
double policy_entropy(const CategoricalPolicy& pi);

/// Sum over y of ref(y) * f(y).
double expect(const CategoricalPolicy& ref, std::span<const double> f);

}  // namespace opo
