#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file harness.hpp
 * @brief The `opo-lab` experiment suites and their file outputs.
 *
 * Each suite writes its CSVs and a `manifest` (key = value lines) into one
 * output directory. CSV bodies are a pure function of the resolved
 * configuration; the timestamp lives only in the manifest.
 *
 * Configuration precedence: suite preset < config file < command-line flags.
 * Config files hold `key = value` lines with `#` comments; keys are the flag
 * names without the leading dashes.
 *
 * Exit codes: 0 success, 1 a suite assertion failed, 2 usage error.
 */

#include "opo/core_types.hpp"
#include "opo/environments.hpp"
#include "opo/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace opo {

enum class Suite { Dynamics, Bounds, Train, Compare };

std::string_view to_string(Suite suite);

using KeyValues = std::map<std::string, std::string>;

/// Malformed configuration input; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SuiteSpec {
  Suite suite = Suite::Train;
  /// Merged config-file and flag values, flags winning.
  KeyValues overrides;
  std::filesystem::path out_dir;
};

/// Keys accepted by a suite (flag names without dashes, excluding config/out).
const std::vector<std::string>& suite_keys(Suite suite);

/// Parses `key = value` lines. Throws UsageError on a malformed line or a
/// repeated key.
KeyValues parse_config_text(std::string_view text);
KeyValues load_config_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double x);

/// Header `step,mean_reward,grad_norm,entropy,chi2_to_ref,kl_to_ref,tv_to_ref,loss`.
std::string metrics_csv(const std::vector<RunMetrics>& metrics);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// preset(algo) overlaid with the values in `kv`. Throws UsageError on an
/// unparsable or unknown value.
TrainConfig train_config_from(Algo algo, const KeyValues& kv);

/// Number of trailing steps in the "final 20%" window: max(1, steps / 5).
std::size_t final_window_size(std::size_t steps);

struct ComparisonRow {
  std::string algo;
  double mean_reward_final20 = 0.0;
  double grad_norm_final20 = 0.0;
  double entropy_final = 0.0;
};

ComparisonRow summarize_run(std::string_view algo, const std::vector<RunMetrics>& metrics);

struct SuiteReport {
  bool passed = true;
  /// Paths relative to the output directory.
  std::vector<std::string> artifacts;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  /// Resolved configuration, recorded in the manifest.
  KeyValues resolved;
  /// Extra manifest entries (e.g. completed runs of an aborted comparison).
  KeyValues extra;
  bool aborted = false;

  void check(bool condition, std::string what);
};

/// Runs every config, writing `<algo>/metrics.csv`, `summary.csv` and
/// `plotdata/<metric>_<algo>.csv`. Needs at least two configs with distinct
/// algorithms. A failing run aborts the comparison; the report then lists the
/// runs that completed.
SuiteReport compare_runs(const Environment& env, const std::vector<TrainConfig>& configs,
                         const std::filesystem::path& out_dir);

SuiteReport run_dynamics_suite(const KeyValues& kv, const std::filesystem::path& out_dir);
SuiteReport run_bounds_suite(const KeyValues& kv, const std::filesystem::path& out_dir);
SuiteReport run_train_suite(const KeyValues& kv, const std::filesystem::path& out_dir);
SuiteReport run_compare_suite(const KeyValues& kv, const std::filesystem::path& out_dir);

SuiteReport run_suite(const SuiteSpec& spec);

/// Writes `manifest` into `out_dir`.
void write_manifest(const SuiteSpec& spec, const SuiteReport& report);

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace opo
