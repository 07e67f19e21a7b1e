// SPDX-License-Identifier: Apache-2.0

#pragma once

// Independent reference computations and random generators for the tests.
//
// Nothing here calls into the library: each oracle re-derives its quantity
// from the definition, in long double where cancellation matters, so a shared
// bug cannot make both sides agree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// -- generators ----------------------------------------------------------------

/// Hand-rolled generator on mt19937_64, deliberately distinct from the
/// library's splitmix64 stream.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }
  Vec normals(std::size_t n, double sd = 1.0) {
    Vec x(n);
    for (auto& v : x) v = normal(sd);
    return x;
  }
  /// Strictly positive probability vector with entries >= floor / n.
  Vec simplex(std::size_t n, double floor = 0.05) {
    Vec p(n);
    double total = 0.0;
    for (auto& x : p) {
      x = -std::log(uniform(1e-12, 1.0)) + floor;
      total += x;
    }
    for (auto& x : p) x /= total;
    return p;
  }

 private:
  std::mt19937_64 eng_;
};

// -- probability ---------------------------------------------------------------

inline Vec softmax(const Vec& theta) {
  long double m = *std::max_element(theta.begin(), theta.end());
  long double z = 0.0L;
  std::vector<long double> e(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(theta[i]) - m);
    z += e[i];
  }
  Vec p(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) p[i] = static_cast<double>(e[i] / z);
  return p;
}

inline double sigmoid(double x) { return static_cast<double>(1.0L / (1.0L + std::exp(-static_cast<long double>(x)))); }

inline double entropy(const Vec& p) {
  long double h = 0.0L;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(static_cast<long double>(x));
  }
  return static_cast<double>(h);
}

/// 1/2 sum ref (pi/ref - pik/ref)^2
inline double chi2(const Vec& pi, const Vec& pik, const Vec& ref) {
  long double s = 0.0L;
  for (std::size_t y = 0; y < pi.size(); ++y) {
    const long double d = (static_cast<long double>(pi[y]) - pik[y]) / ref[y];
    s += ref[y] * d * d;
  }
  return static_cast<double>(0.5L * s);
}

inline double kl(const Vec& p, const Vec& q) {
  long double s = 0.0L;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] > 0.0) s += p[y] * std::log(static_cast<long double>(p[y]) / q[y]);
  }
  return static_cast<double>(s);
}

inline double tv(const Vec& p, const Vec& q) {
  long double s = 0.0L;
  for (std::size_t y = 0; y < p.size(); ++y) s += std::fabs(static_cast<long double>(p[y]) - q[y]);
  return static_cast<double>(0.5L * s);
}

// -- objective ------------------------------------------------------------------

/// -E_ref[omega v] + mu/2 E_ref[v^2]
inline double opo_ratio_loss(const Vec& v, const Vec& omega, const Vec& ref, double mu) {
  long double lin = 0.0L;
  long double quad = 0.0L;
  for (std::size_t y = 0; y < v.size(); ++y) {
    lin += static_cast<long double>(ref[y]) * omega[y] * v[y];
    quad += static_cast<long double>(ref[y]) * v[y] * v[y];
  }
  return static_cast<double>(-lin + 0.5L * mu * quad);
}

/// Ratio loss as a function of logits.
inline double opo_logit_loss(const Vec& theta, const Vec& omega, const Vec& ref, double mu) {
  const Vec pi = softmax(theta);
  Vec v(pi.size());
  for (std::size_t y = 0; y < v.size(); ++y) v[y] = pi[y] / ref[y] - 1.0;
  return opo_ratio_loss(v, omega, ref, mu);
}

// -- finite differences -----------------------------------------------------------

inline Vec central_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec p = x;
    Vec m = x;
    p[i] += h;
    m[i] -= h;
    g[i] = (f(p) - f(m)) / (2.0 * h);
  }
  return g;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double norm2(const Vec& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

// -- environments -------------------------------------------------------------------

/// Reward by decoding the id with the first token most significant.
inline double sequence_reward(std::size_t id, std::size_t vocab, const std::vector<std::size_t>& target) {
  const std::size_t len = target.size();
  std::vector<std::size_t> tok(len);
  for (std::size_t k = len; k-- > 0;) {
    tok[k] = id % vocab;
    id /= vocab;
  }
  std::size_t prefix = 0;
  while (prefix < len && tok[prefix] == target[prefix]) ++prefix;
  return static_cast<double>(prefix) / static_cast<double>(len);
}

/// Regularized upper incomplete gamma Q(s, x) for the chi-square tail, by
/// series / continued fraction.
inline double gamma_q(double s, double x) {
  if (x <= 0.0) return 1.0;
  const double gln = std::lgamma(s);
  if (x < s + 1.0) {
    double sum = 1.0 / s;
    double term = sum;
    for (int n = 1; n < 1000; ++n) {
      term *= x / (s + n);
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + s * std::log(x) - gln);
  }
  double b = x + 1.0 - s;
  double c = 1.0 / 1e-300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + s * std::log(x) - gln) * h;
}

/// Upper-tail p-value of a chi-square statistic with k degrees of freedom.
inline double chi_square_p_value(double statistic, double dof) { return gamma_q(0.5 * dof, 0.5 * statistic); }

}  // namespace oracle
