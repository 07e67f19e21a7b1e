// SPDX-License-Identifier: Apache-2.0

#include "opo/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace opo {

OutcomeSpace::OutcomeSpace(std::size_t size) : size_(size) {
  if (size < 2) {
    throw std::invalid_argument("outcome space needs at least 2 outcomes, got " +
                                std::to_string(size));
  }
}

CategoricalPolicy::CategoricalPolicy(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw std::invalid_argument("policy needs at least 2 outcomes");
  }
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("policy entries must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw std::invalid_argument("policy entries sum to " + std::to_string(total) +
                                ", expected 1");
  }
}

CategoricalPolicy CategoricalPolicy::uniform(std::size_t n) {
  return CategoricalPolicy(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

CategoricalPolicy CategoricalPolicy::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) throw std::out_of_range("one_hot index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return CategoricalPolicy(std::move(p));
}

bool CategoricalPolicy::strictly_positive() const {
  return std::all_of(probs_.begin(), probs_.end(), [](double p) { return p > 0.0; });
}

void require_reference(const CategoricalPolicy& ref) {
  if (!ref.strictly_positive()) {
    throw std::invalid_argument("reference policy has a zero entry; ratios are undefined");
  }
}

void require_same_space(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

std::vector<double> log_softmax(const PolicyLogits& theta) {
  if (theta.size() < 2) throw std::invalid_argument("logits need at least 2 entries");
  double shift = -INFINITY;
  for (double x : theta.logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite logit");
    shift = std::max(shift, x);
  }
  double total = 0.0;
  for (double x : theta.logits) total += std::exp(x - shift);
  const double lse = shift + std::log(total);
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta.logits[i] - lse;
  return out;
}

CategoricalPolicy softmax(const PolicyLogits& theta) {
  if (theta.size() < 2) throw std::invalid_argument("logits need at least 2 entries");
  double shift = -INFINITY;
  for (double x : theta.logits) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite logit");
    shift = std::max(shift, x);
  }
  std::vector<double> p(theta.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(theta.logits[i] - shift);
    total += p[i];
  }
  for (auto& x : p) x /= total;
  return CategoricalPolicy(std::move(p));
}

RatioField ratio_from_policies(const CategoricalPolicy& pi, const CategoricalPolicy& pi_ref) {
  require_same_space(pi.size(), pi_ref.size(), "ratio_from_policies");
  require_reference(pi_ref);
  RatioField out{std::vector<double>(pi.size())};
  for (std::size_t y = 0; y < pi.size(); ++y) out.v[y] = pi[y] / pi_ref[y] - 1.0;
  return out;
}

LogRatioField log_ratio_from_policies(const CategoricalPolicy& pi,
                                      const CategoricalPolicy& pi_ref) {
  require_same_space(pi.size(), pi_ref.size(), "log_ratio_from_policies");
  require_reference(pi_ref);
  if (!pi.strictly_positive()) {
    throw std::invalid_argument("log-ratio needs a strictly positive policy");
  }
  LogRatioField out{std::vector<double>(pi.size())};
  for (std::size_t y = 0; y < pi.size(); ++y) {
    out.delta[y] = std::log(pi[y]) - std::log(pi_ref[y]);
  }
  return out;
}

double policy_entropy(const CategoricalPolicy& pi) {
  double h = 0.0;
  for (double p : pi.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(pi.size())));
}

double expect(const CategoricalPolicy& ref, std::span<const double> f) {
  require_same_space(ref.size(), f.size(), "expect");
  double total = 0.0;
  for (std::size_t y = 0; y < f.size(); ++y) total += ref[y] * f[y];
  return total;
}

}  // namespace opo
