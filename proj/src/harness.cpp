// SPDX-License-Identifier: Apache-2.0

#include "opo/harness.hpp"

#include "opo/dynamics.hpp"
#include "opo/geometry.hpp"
#include "opo/objectives.hpp"
#include "opo/random.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace opo {

namespace {

const std::vector<std::string> kTrainKeys = {"algo",  "env",   "alpha", "mu",
                                             "eta",   "beta",  "lambda", "steps",
                                             "rollouts", "seed", "coord", "anchor"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_real(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw UsageError("invalid value for " + key + ": '" + text + "'");
  }
  return value;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("invalid value for " + key + ": '" + text + "'");
  }
  return value;
}

int parse_count(const std::string& key, const std::string& text) {
  const std::uint64_t value = parse_unsigned(key, text);
  if (value > 100'000'000ULL) throw UsageError(key + " is too large");
  return static_cast<int>(value);
}

std::optional<std::string> lookup(const KeyValues& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) return std::nullopt;
  return it->second;
}

double real_or(const KeyValues& kv, const std::string& key, double fallback) {
  const auto v = lookup(kv, key);
  return v ? parse_real(key, *v) : fallback;
}

int count_or(const KeyValues& kv, const std::string& key, int fallback) {
  const auto v = lookup(kv, key);
  return v ? parse_count(key, *v) : fallback;
}

std::uint64_t seed_or(const KeyValues& kv, std::uint64_t fallback) {
  const auto v = lookup(kv, "seed");
  return v ? parse_unsigned("seed", *v) : fallback;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Accumulates CSV text; numeric cells only.
class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (auto h : header) {
      if (!first) body_ += ',';
      body_ += h;
      first = false;
    }
    body_ += '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((append(cells, first)), ...);
    body_ += '\n';
  }

  const std::string& str() const { return body_; }

 private:
  void append(double x, bool& first) { sep(first), body_ += format_number(x); }
  void append(int x, bool& first) { sep(first), body_ += std::to_string(x); }
  void append(std::size_t x, bool& first) { sep(first), body_ += std::to_string(x); }
  void append(const std::string& x, bool& first) { sep(first), body_ += x; }
  void sep(bool& first) {
    if (!first) body_ += ',';
    first = false;
  }

  std::string body_;
};

void emit(SuiteReport& report, const fs::path& out_dir, const std::string& relative,
          const std::string& content) {
  const fs::path path = out_dir / relative;
  fs::create_directories(path.parent_path());
  write_file_atomic(path, content);
  report.artifacts.push_back(relative);
}

double max_abs(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

CategoricalPolicy random_policy(SplitMix64& rng, std::size_t n) {
  // Keep every entry away from zero so ratios stay bounded.
  std::vector<double> p = rng.simplex(n);
  double total = 0.0;
  for (auto& x : p) {
    x = 0.9 * x + 0.1 / static_cast<double>(n);
    total += x;
  }
  for (auto& x : p) x /= total;
  return CategoricalPolicy(std::move(p));
}

std::vector<double> normal_vector(SplitMix64& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void record_train_config(KeyValues& resolved, const std::string& prefix, const TrainConfig& cfg,
                         const std::string& env) {
  resolved[prefix + "algo"] = std::string(to_string(cfg.algo));
  resolved[prefix + "env"] = env;
  if (cfg.alpha) resolved[prefix + "alpha"] = format_number(*cfg.alpha);
  if (cfg.mu) resolved[prefix + "mu"] = format_number(*cfg.mu);
  if (cfg.beta) resolved[prefix + "beta"] = format_number(*cfg.beta);
  if (cfg.lambda) resolved[prefix + "lambda"] = format_number(*cfg.lambda);
  resolved[prefix + "eta"] = format_number(cfg.eta);
  resolved[prefix + "steps"] = std::to_string(cfg.steps);
  resolved[prefix + "rollouts"] = std::to_string(cfg.rollouts_per_step);
  resolved[prefix + "seed"] = std::to_string(cfg.seed.value);
  resolved[prefix + "coord"] = std::string(to_string(cfg.coordinate_mode));
  resolved[prefix + "anchor"] = std::string(to_string(cfg.anchor_mode));
}

Environment env_from(const KeyValues& kv) {
  const std::string name = lookup(kv, "env").value_or("bandit10");
  try {
    return environment_from_name(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

const std::map<std::string, std::string> kFlagHelp = {
    {"algo", "opo|grpo|dpo|klpg|l2pg (compare: comma list)"},
    {"env", "bandit10|seq4x4"},
    {"alpha", "sampling-geometry exponent on the density ratio"},
    {"mu", "stiffness of the chi-square penalty"},
    {"eta", "learner step size"},
    {"beta", "DPO / KL temperature"},
    {"lambda", "L2 weight-space penalty"},
    {"steps", "training steps (dynamics: descent steps)"},
    {"rollouts", "rollouts per step"},
    {"seed", "master seed"},
    {"coord", "ratio|log"},
    {"anchor", "onpolicy|fixed"},
    {"trials", "random instances per bound check"}};

const std::vector<std::string> kPlotMetrics = {"mean_reward", "grad_norm", "entropy",
                                               "chi2_to_ref", "kl_to_ref", "tv_to_ref",
                                               "loss"};

double metric_value(const RunMetrics& m, const std::string& name) {
  if (name == "mean_reward") return m.mean_reward;
  if (name == "grad_norm") return m.grad_norm;
  if (name == "entropy") return m.entropy;
  if (name == "chi2_to_ref") return m.chi2_to_ref;
  if (name == "kl_to_ref") return m.kl_to_ref;
  if (name == "tv_to_ref") return m.tv_to_ref;
  return m.loss;
}

bool metrics_finite(const std::vector<RunMetrics>& metrics) {
  for (const auto& m : metrics) {
    for (const auto& name : kPlotMetrics) {
      if (!std::isfinite(metric_value(m, name))) return false;
    }
  }
  return true;
}

}  // namespace

std::string_view to_string(Suite suite) {
  switch (suite) {
    case Suite::Dynamics: return "dynamics";
    case Suite::Bounds: return "bounds";
    case Suite::Train: return "train";
    case Suite::Compare: return "compare";
  }
  return "?";
}

const std::vector<std::string>& suite_keys(Suite suite) {
  static const std::vector<std::string> dynamics = {"mu", "eta", "beta", "steps", "seed"};
  static const std::vector<std::string> bounds = {"trials", "seed"};
  switch (suite) {
    case Suite::Dynamics: return dynamics;
    case Suite::Bounds: return bounds;
    case Suite::Train:
    case Suite::Compare: return kTrainKeys;
  }
  return kTrainKeys;
}

KeyValues parse_config_text(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw UsageError("config line " + std::to_string(line_no) + ": empty key or value");
    }
    if (!kv.emplace(key, value).second) {
      throw UsageError("config line " + std::to_string(line_no) + ": duplicate key " + key);
    }
  }
  return kv;
}

KeyValues load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string metrics_csv(const std::vector<RunMetrics>& metrics) {
  CsvWriter csv{"step", "mean_reward", "grad_norm", "entropy",
                "chi2_to_ref", "kl_to_ref", "tv_to_ref", "loss"};
  for (const auto& m : metrics) {
    csv.row(m.step, m.mean_reward, m.grad_norm, m.entropy, m.chi2_to_ref, m.kl_to_ref,
            m.tv_to_ref, m.loss);
  }
  return csv.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

TrainConfig train_config_from(Algo algo, const KeyValues& kv) {
  TrainConfig cfg = TrainConfig::preset(algo);
  if (auto v = lookup(kv, "alpha")) cfg.alpha = parse_real("alpha", *v);
  if (auto v = lookup(kv, "mu")) cfg.mu = parse_real("mu", *v);
  if (auto v = lookup(kv, "beta")) cfg.beta = parse_real("beta", *v);
  if (auto v = lookup(kv, "lambda")) cfg.lambda = parse_real("lambda", *v);
  cfg.eta = real_or(kv, "eta", cfg.eta);
  cfg.steps = count_or(kv, "steps", cfg.steps);
  cfg.rollouts_per_step = count_or(kv, "rollouts", cfg.rollouts_per_step);
  cfg.seed = Seed{seed_or(kv, cfg.seed.value)};
  try {
    if (auto v = lookup(kv, "coord")) cfg.coordinate_mode = coordinate_from_name(*v);
    if (auto v = lookup(kv, "anchor")) cfg.anchor_mode = anchor_from_name(*v);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

std::size_t final_window_size(std::size_t steps) { return std::max<std::size_t>(1, steps / 5); }

ComparisonRow summarize_run(std::string_view algo, const std::vector<RunMetrics>& metrics) {
  if (metrics.empty()) throw std::invalid_argument("empty run");
  ComparisonRow row;
  row.algo = std::string(algo);
  const std::size_t w = final_window_size(metrics.size());
  for (std::size_t i = metrics.size() - w; i < metrics.size(); ++i) {
    row.mean_reward_final20 += metrics[i].mean_reward;
    row.grad_norm_final20 += metrics[i].grad_norm;
  }
  row.mean_reward_final20 /= static_cast<double>(w);
  row.grad_norm_final20 /= static_cast<double>(w);
  row.entropy_final = metrics.back().entropy;
  return row;
}

void SuiteReport::check(bool condition, std::string what) {
  if (!condition) {
    passed = false;
    failures.push_back(std::move(what));
  }
}

SuiteReport compare_runs(const Environment& env, const std::vector<TrainConfig>& configs,
                         const fs::path& out_dir) {
  if (configs.size() < 2) throw UsageError("a comparison needs at least two configurations");
  std::set<Algo> distinct;
  for (const auto& c : configs) {
    if (!distinct.insert(c.algo).second) {
      throw UsageError("algorithm listed twice: " + std::string(to_string(c.algo)));
    }
  }

  SuiteReport report;
  const std::string env_name = environment_name(env);
  std::vector<ComparisonRow> rows;
  std::vector<std::string> completed;

  for (const auto& cfg : configs) {
    const std::string algo(to_string(cfg.algo));
    record_train_config(report.resolved, algo + ".", cfg, env_name);
    std::optional<TrainResult> run;
    try {
      run = run_training(env, cfg);
    } catch (const std::exception& e) {
      report.aborted = true;
      report.check(false, "run " + algo + " failed: " + e.what());
      break;
    }
    const TrainResult& result = *run;
    for (const auto& w : result.warnings) report.warnings.push_back(algo + ": " + w);
    report.check(metrics_finite(result.metrics), algo + ": non-finite metric");
    emit(report, out_dir, algo + "/metrics.csv", metrics_csv(result.metrics));
    for (const auto& metric : kPlotMetrics) {
      CsvWriter plot{"step", "value"};
      for (const auto& m : result.metrics) plot.row(m.step, metric_value(m, metric));
      emit(report, out_dir, "plotdata/" + metric + "_" + algo + ".csv", plot.str());
    }
    rows.push_back(summarize_run(algo, result.metrics));
    completed.push_back(algo);
  }

  std::string completed_list;
  for (const auto& c : completed) completed_list += (completed_list.empty() ? "" : ",") + c;
  report.extra["completed_runs"] = completed_list;
  if (report.aborted) return report;

  CsvWriter summary{"algo", "mean_reward_final20", "grad_norm_final20", "entropy_final"};
  for (const auto& r : rows) {
    summary.row(r.algo, r.mean_reward_final20, r.grad_norm_final20, r.entropy_final);
  }
  emit(report, out_dir, "summary.csv", summary.str());
  return report;
}

SuiteReport run_dynamics_suite(const KeyValues& kv, const fs::path& out_dir) {
  SuiteReport report;
  const double mu = real_or(kv, "mu", 1.0);
  const double eta = real_or(kv, "eta", 0.5);
  const double beta = real_or(kv, "beta", 1.0);
  const int steps = count_or(kv, "steps", 40);
  const std::uint64_t seed = seed_or(kv, 7);
  if (!(mu > 0.0)) throw UsageError("mu must be > 0");
  if (!(eta > 0.0)) throw UsageError("eta must be > 0");
  if (!(beta > 0.0)) throw UsageError("beta must be > 0");
  if (steps < 1) throw UsageError("steps must be >= 1");
  report.resolved = {{"mu", format_number(mu)},       {"eta", format_number(eta)},
                     {"beta", format_number(beta)},   {"steps", std::to_string(steps)},
                     {"seed", std::to_string(seed)}};

  SplitMix64 rng(seed);
  constexpr std::size_t kDim = 6;

  // Contraction of function-space gradient descent toward v* = omega / mu.
  {
    const CategoricalPolicy ref = random_policy(rng, kDim);
    const WeightField omega{normal_vector(rng, kDim)};
    const RatioField v0{normal_vector(rng, kDim)};
    const DescentTrace trace = v_space_descent(v0, omega, ref, mu, eta, steps);
    const RatioField target = opo_closed_form(omega, mu);
    const double factor = 1.0 - eta * mu;

    CsvWriter csv{"step", "distance", "ratio_to_previous"};
    double recursion_error = 0.0;
    for (std::size_t k = 0; k < trace.distances.size(); ++k) {
      const double ratio = k == 0 ? std::nan("") : trace.rate_estimates[k - 1];
      csv.row(k, trace.distances[k], ratio);
      if (k == 0) continue;
      for (std::size_t y = 0; y < kDim; ++y) {
        const double expected = factor * (trace.iterates[k - 1].v[y] - target.v[y]);
        const double actual = trace.iterates[k].v[y] - target.v[y];
        const double scale = std::max(1.0, std::abs(expected));
        recursion_error = std::max(recursion_error, std::abs(actual - expected) / scale);
      }
    }
    emit(report, out_dir, "contraction_trace.csv", csv.str());
    report.check(recursion_error <= 1e-12, "descent deviates from the linear recursion by " +
                                               format_number(recursion_error));
    try {
      const double rate = measure_contraction_rate(trace);
      report.check(std::abs(rate - std::abs(factor)) <= 1e-9,
                   "contraction rate " + format_number(rate) + " vs " +
                       format_number(std::abs(factor)));
    } catch (const std::invalid_argument&) {
      // eta * mu == 1 lands on v* in one step; nothing left to measure.
      report.check(trace.distances.size() > 1 && trace.distances[1] <= 1e-12 * (1 + trace.distances[0]),
                   "trace collapsed without reaching the equilibrium");
    }
    if (trace.divergent) report.warnings.push_back("|1 - eta*mu| >= 1: descent does not contract");
  }

  // Curvature probes across sampling geometries.
  {
    const std::vector<double> alphas = {0.0, 0.3, 0.6, 1.0};
    constexpr int kProbes = 10;
    const CategoricalPolicy ref = random_policy(rng, kDim);
    const CategoricalPolicy behaviour = random_policy(rng, kDim);
    const RatioField t_minus_1 = ratio_from_policies(behaviour, ref);
    const AdvantageField adv{normal_vector(rng, kDim)};
    std::vector<RatioField> points;
    for (int p = 0; p < kProbes; ++p) points.push_back(RatioField{normal_vector(rng, kDim)});

    CsvWriter csv{"alpha", "probe", "max_diag_error", "max_offdiag"};
    std::vector<std::vector<std::vector<double>>> by_alpha;
    for (double alpha : alphas) {
      const WeightField omega = alpha_weights(adv, t_minus_1, alpha);
      std::vector<std::vector<double>> mats;
      for (int p = 0; p < kProbes; ++p) {
        const HessianProbe probe = hessian_probe(omega, ref, mu, {points[static_cast<std::size_t>(p)]});
        csv.row(alpha, p, probe.max_diag_error, probe.max_offdiag);
        report.check(probe.max_diag_error <= 1e-6 && probe.max_offdiag <= 1e-6,
                     "Hessian differs from mu*I at alpha " + format_number(alpha));
        mats.push_back(probe.matrices.front());
      }
      by_alpha.push_back(std::move(mats));
    }
    double cross = 0.0;
    for (std::size_t a = 1; a < by_alpha.size(); ++a) {
      for (std::size_t p = 0; p < by_alpha[a].size(); ++p) {
        for (std::size_t i = 0; i < by_alpha[a][p].size(); ++i) {
          cross = std::max(cross, std::abs(by_alpha[a][p][i] - by_alpha[0][p][i]));
        }
      }
    }
    emit(report, out_dir, "hessian_probe.csv", csv.str());
    report.check(cross <= 1e-6, "Hessian varies with alpha by " + format_number(cross));
  }

  // Logistic vs linear restoring force on one grid x in [-20, 20].
  {
    std::vector<double> grid;
    for (int k = 0; k <= 4000; ++k) grid.push_back(static_cast<double>(k - 2000) / 100.0);
    const SaturationProfile profile = saturation_profile(beta, mu, grid, grid);
    CsvWriter csv{"x", "dpo_grad", "dpo_curvature", "opo_grad"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      csv.row(grid[i], profile.margins[i].dpo_grad, profile.margins[i].dpo_curvature,
              profile.offsets[i].opo_grad);
    }
    emit(report, out_dir, "saturation_profile.csv", csv.str());
    report.check(std::abs(profile.dpo_max - beta / 4.0) <= 1e-9,
                 "logistic gradient peak " + format_number(profile.dpo_max));
    report.check(std::abs(dpo_margin_grad(10.0, beta)) < 1e-4 * beta,
                 "logistic gradient at |m| = 10 is not saturated");
    report.check(profile.opo_linearity_error <= 1e-12 * std::max(1.0, 20.0 * mu),
                 "linear restoring force deviates by " +
                     format_number(profile.opo_linearity_error));
  }
  return report;
}

SuiteReport run_bounds_suite(const KeyValues& kv, const fs::path& out_dir) {
  SuiteReport report;
  const int trials = count_or(kv, "trials", 1000);
  const std::uint64_t seed = seed_or(kv, 42);
  if (trials < 1) throw UsageError("trials must be >= 1");
  report.resolved = {{"trials", std::to_string(trials)}, {"seed", std::to_string(seed)}};
  SplitMix64 rng(seed);

  {
    CsvWriter csv{"trial", "size", "delta_inf", "max_err_v", "bound_v", "max_err_sq", "bound_sq"};
    std::size_t violations = 0;
    for (int trial = 0; trial < trials; ++trial) {
      const auto n = static_cast<std::size_t>(rng.integer(2, 16));
      double target = rng.uniform(0.0, 0.99);
      while (target <= 0.0) target = rng.uniform(0.0, 0.99);
      std::vector<double> d = normal_vector(rng, n);
      const double scale = max_abs(d);
      for (auto& x : d) x *= target / scale;
      const LogApproxReport r = log_approx_error_check(LogRatioField{d});
      violations += r.violations;
      csv.row(trial, n, r.delta_inf, max_abs(r.err_v), r.bound_v, max_abs(r.err_sq), r.bound_sq);
    }
    emit(report, out_dir, "log_approx_bounds.csv", csv.str());
    report.check(violations == 0,
                 std::to_string(violations) + " log-ratio approximation bound violations");
  }

  {
    CsvWriter csv{"trial", "size", "tv", "bound", "gap"};
    std::size_t violations = 0;
    for (int trial = 0; trial < trials; ++trial) {
      const auto n = static_cast<std::size_t>(rng.integer(2, 16));
      const CategoricalPolicy pi(rng.simplex(n));
      const CategoricalPolicy ref = random_policy(rng, n);
      const double tv = tv_distance(pi, ref);
      const double gap = tv_chi2_bound_gap(pi, ref);
      if (gap < 0.0) ++violations;
      csv.row(trial, n, tv, tv + gap, gap);
    }
    // Symmetric binary case: the bound is attained.
    const CategoricalPolicy pi({0.8, 0.2});
    const CategoricalPolicy ref = CategoricalPolicy::uniform(2);
    const double gap = tv_chi2_bound_gap(pi, ref);
    csv.row(trials, std::size_t{2}, tv_distance(pi, ref), tv_distance(pi, ref) + gap, gap);
    emit(report, out_dir, "tv_chi2_bounds.csv", csv.str());
    report.check(violations == 0, std::to_string(violations) + " TV bound violations");
    report.check(std::abs(gap) < 1e-12, "symmetric binary TV gap " + format_number(gap));
  }

  {
    CsvWriter csv{"trial", "size", "epsilon", "mu", "closed_form_error", "constraint_error",
                  "dual_objective", "best_random_objective"};
    constexpr int kRandomPoints = 1000;
    for (int trial = 0; trial < trials; ++trial) {
      const auto n = static_cast<std::size_t>(rng.integer(2, 5));
      const CategoricalPolicy ref = random_policy(rng, n);
      const WeightField omega{normal_vector(rng, n)};
      const double eps = rng.uniform(0.01, 1.0);
      const DualSolution dual = lagrange_dual_solve(omega, ref, eps);
      const RatioField closed = opo_closed_form(omega, dual.mu);
      double closed_error = 0.0;
      for (std::size_t y = 0; y < n; ++y) {
        closed_error = std::max(closed_error, std::abs(dual.v.v[y] - closed.v[y]));
      }
      const double dual_obj = expect(ref, [&] {
        std::vector<double> p(n);
        for (std::size_t y = 0; y < n; ++y) p[y] = omega.omega[y] * dual.v.v[y];
        return p;
      }());
      double second = 0.0;
      for (std::size_t y = 0; y < n; ++y) second += ref[y] * dual.v.v[y] * dual.v.v[y];
      const double constraint_error = std::abs(second - eps) / eps;

      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < kRandomPoints; ++k) {
        std::vector<double> u = normal_vector(rng, n);
        double norm = 0.0;
        for (std::size_t y = 0; y < n; ++y) norm += ref[y] * u[y] * u[y];
        const double radius = std::sqrt(eps) * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
        double obj = 0.0;
        for (std::size_t y = 0; y < n; ++y) obj += ref[y] * omega.omega[y] * u[y] * radius / std::sqrt(norm);
        best = std::max(best, obj);
      }
      csv.row(trial, n, eps, dual.mu, closed_error, constraint_error, dual_obj, best);
      report.check(closed_error <= 1e-12, "dual solution departs from the closed form");
      report.check(constraint_error <= 1e-12, "dual solution is off the constraint boundary");
      report.check(best <= dual_obj + 1e-9, "random feasible point beats the dual solution");
    }
    emit(report, out_dir, "dual_equivalence.csv", csv.str());
  }
  return report;
}

SuiteReport run_train_suite(const KeyValues& kv, const fs::path& out_dir) {
  Algo algo = Algo::OPO;
  try {
    algo = algo_from_name(lookup(kv, "algo").value_or("opo"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Environment env = env_from(kv);
  const TrainConfig cfg = train_config_from(algo, kv);
  SuiteReport report;
  record_train_config(report.resolved, "", cfg, environment_name(env));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const TrainResult result = run_training(env, cfg);
  report.warnings = result.warnings;
  emit(report, out_dir, "metrics.csv", metrics_csv(result.metrics));
  report.check(result.metrics.size() == static_cast<std::size_t>(cfg.steps),
               "metrics length differs from steps");
  report.check(metrics_finite(result.metrics), "non-finite metric");
  report.resolved["final_expected_reward"] = format_number(result.metrics.back().mean_reward);
  return report;
}

SuiteReport run_compare_suite(const KeyValues& kv, const fs::path& out_dir) {
  const auto names = split_list(lookup(kv, "algo").value_or("opo,grpo,dpo,l2pg"));
  const Environment env = env_from(kv);
  std::vector<TrainConfig> configs;
  for (const auto& name : names) {
    try {
      configs.push_back(train_config_from(algo_from_name(name), kv));
      configs.back().validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return compare_runs(env, configs, out_dir);
}

SuiteReport run_suite(const SuiteSpec& spec) {
  const auto& allowed = suite_keys(spec.suite);
  for (const auto& [key, value] : spec.overrides) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw UsageError("unknown key '" + key + "' for " + std::string(to_string(spec.suite)));
    }
  }
  fs::create_directories(spec.out_dir);
  switch (spec.suite) {
    case Suite::Dynamics: return run_dynamics_suite(spec.overrides, spec.out_dir);
    case Suite::Bounds: return run_bounds_suite(spec.overrides, spec.out_dir);
    case Suite::Train: return run_train_suite(spec.overrides, spec.out_dir);
    case Suite::Compare: return run_compare_suite(spec.overrides, spec.out_dir);
  }
  throw UsageError("unknown suite");
}

void write_manifest(const SuiteSpec& spec, const SuiteReport& report) {
  std::string text;
  auto line = [&](const std::string& key, const std::string& value) {
    text += key + " = " + value + "\n";
  };
  line("suite", std::string(to_string(spec.suite)));
  line("status", report.aborted ? "aborted" : report.passed ? "passed" : "failed");
  line("timestamp", timestamp_utc());
  for (const auto& [k, v] : report.resolved) line("config." + k, v);
  for (const auto& [k, v] : report.extra) line(k, v);
  for (std::size_t i = 0; i < report.artifacts.size(); ++i) {
    line("artifact." + std::to_string(i), report.artifacts[i]);
  }
  for (std::size_t i = 0; i < report.warnings.size(); ++i) {
    line("warning." + std::to_string(i), report.warnings[i]);
  }
  for (std::size_t i = 0; i < report.failures.size(); ++i) {
    line("failure." + std::to_string(i), report.failures[i]);
  }
  write_file_atomic(spec.out_dir / "manifest", text);
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Orthogonalized policy optimization lab: function-space dynamics, analytic "
               "bounds, and tabular training comparisons."};
  app.require_subcommand(1);

  struct Sub {
    Suite suite;
    CLI::App* app;
    std::map<std::string, std::string> values;
    std::string out;
    std::string config;
  };
  std::vector<Sub> subs;
  subs.reserve(4);
  const std::map<Suite, std::string> help = {
      {Suite::Dynamics, "v-space descent, curvature probes and saturation profiles"},
      {Suite::Bounds, "randomized checks of the log-ratio, TV and dual bounds"},
      {Suite::Train, "train one algorithm and write metrics.csv"},
      {Suite::Compare, "train several algorithms (--algo a,b,...) and write summary.csv"}};
  for (Suite s : {Suite::Dynamics, Suite::Bounds, Suite::Train, Suite::Compare}) {
    subs.push_back(Sub{s, app.add_subcommand(std::string(to_string(s)), help.at(s)), {}, {}, {}});
  }
  for (auto& sub : subs) {
    for (const auto& key : suite_keys(sub.suite)) {
      sub.app->add_option("--" + key, sub.values[key], kFlagHelp.at(key));
    }
    sub.app->add_option("--out", sub.out, "output directory (default: $OPO_LAB_OUT or runs/<suite>)");
    sub.app->add_option("--config", sub.config, "key = value file; flags take precedence");
    if (sub.suite == Suite::Train || sub.suite == Suite::Compare) {
      sub.app->footer("mu is held constant for the whole run; no adaptive temperature schedule is applied.");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  Sub* chosen = nullptr;
  for (auto& sub : subs) {
    if (sub.app->parsed()) chosen = &sub;
  }
  if (chosen == nullptr) {
    err << app.help();
    return 2;
  }

  SuiteSpec spec;
  spec.suite = chosen->suite;
  try {
    if (!chosen->config.empty()) spec.overrides = load_config_file(chosen->config);
    for (const auto& key : suite_keys(chosen->suite)) {
      if (chosen->app->count("--" + key) > 0) spec.overrides[key] = chosen->values[key];
    }
    if (!chosen->out.empty()) {
      spec.out_dir = chosen->out;
    } else if (const char* env = std::getenv("OPO_LAB_OUT"); env != nullptr && *env != '\0') {
      spec.out_dir = env;
    } else {
      spec.out_dir = fs::path("runs") / std::string(to_string(chosen->suite));
    }

    SuiteReport report = run_suite(spec);
    write_manifest(spec, report);
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    for (const auto& f : report.failures) err << "FAILED: " << f << "\n";
    out << to_string(spec.suite) << ": " << (report.passed ? "passed" : "failed") << ", "
        << report.artifacts.size() << " artifacts in " << spec.out_dir.string() << "\n";
    return report.passed ? 0 : 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << chosen->app->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cli_main(int argc, const char* const* argv) {
  return cli_main(argc, argv, std::cout, std::cerr);
}

}  // namespace opo
