// SPDX-License-Identifier: Apache-2.0

#include "opo/harness.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace opo;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name)
      : path(fs::temp_directory_path() / ("opo_lab_test_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run lab(std::vector<std::string> args) {
  args.insert(args.begin(), "opo-lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("config text parsing") {
  const KeyValues kv = parse_config_text("# comment\nalpha = 0.3\n\n  mu=2   # trailing\nenv = seq4x4\n");
  CHECK(kv.at("alpha") == "0.3");
  CHECK(kv.at("mu") == "2");
  CHECK(kv.at("env") == "seq4x4");
  CHECK(kv.size() == 3);
  CHECK_THROWS_AS(parse_config_text("alpha 0.3\n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("alpha = \n"), UsageError);
  CHECK_THROWS_AS(parse_config_text("a = 1\na = 2\n"), UsageError);
  CHECK(parse_config_text("").empty());
}

TEST_CASE("number formatting round-trips") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
  for (double x : {1e-300, 3.141592653589793, -2.5e17, 4.54e-5}) CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("metrics CSV header and final window") {
  std::vector<RunMetrics> m(3);
  for (int i = 0; i < 3; ++i) m[static_cast<std::size_t>(i)].step = i + 1;
  const std::string csv = metrics_csv(m);
  CHECK(csv.rfind("step,mean_reward,grad_norm,entropy,chi2_to_ref,kl_to_ref,tv_to_ref,loss\n", 0) == 0);
  CHECK(line_count(csv) == 4);

  CHECK(final_window_size(400) == 80);
  CHECK(final_window_size(3) == 1);
  std::vector<RunMetrics> run(400);
  for (int i = 0; i < 400; ++i) {
    run[static_cast<std::size_t>(i)].step = i + 1;
    run[static_cast<std::size_t>(i)].mean_reward = i + 1 >= 321 ? 1.0 : 0.0;
    run[static_cast<std::size_t>(i)].grad_norm = static_cast<double>(i + 1);
  }
  const ComparisonRow row = summarize_run("opo", run);
  CHECK(row.mean_reward_final20 == 1.0);
  CHECK(row.grad_norm_final20 == doctest::Approx((321.0 + 400.0) / 2.0));
}

TEST_CASE("train config resolution") {
  const TrainConfig cfg = train_config_from(Algo::DPO, {{"beta", "2"}, {"steps", "10"}, {"anchor", "onpolicy"}});
  CHECK(*cfg.beta == 2.0);
  CHECK(cfg.steps == 10);
  CHECK(cfg.anchor_mode == AnchorMode::OnPolicy);
  CHECK_FALSE(cfg.alpha.has_value());
  CHECK_THROWS_AS(train_config_from(Algo::OPO, {{"mu", "abc"}}), UsageError);
  CHECK_THROWS_AS(train_config_from(Algo::OPO, {{"steps", "-3"}}), UsageError);
  CHECK_THROWS_AS(train_config_from(Algo::OPO, {{"coord", "polar"}}), UsageError);
}

TEST_CASE("dynamics and bounds suites write their artifacts") {
  ScratchDir dir("suites");
  const Run d = lab({"dynamics", "--mu", "1.0", "--eta", "0.5", "--out", (dir.path / "d1").string()});
  CHECK(d.code == 0);
  for (const char* f : {"contraction_trace.csv", "hessian_probe.csv", "saturation_profile.csv", "manifest"}) {
    CHECK(fs::exists(dir.path / "d1" / f));
  }
  const Run b = lab({"bounds", "--trials", "200", "--seed", "42", "--out", (dir.path / "b1").string()});
  CHECK(b.code == 0);
  for (const char* f : {"log_approx_bounds.csv", "tv_chi2_bounds.csv", "dual_equivalence.csv", "manifest"}) {
    CHECK(fs::exists(dir.path / "b1" / f));
  }
  // Divergent step sizes are reported, not rejected.
  const Run div = lab({"dynamics", "--mu", "1.0", "--eta", "2.5", "--steps", "10", "--out", (dir.path / "d2").string()});
  CHECK(div.code == 0);
  CHECK(div.err.find("does not contract") != std::string::npos);
  // eta * mu = 1 converges in one step.
  CHECK(lab({"dynamics", "--eta", "1", "--out", (dir.path / "d3").string()}).code == 0);
}

TEST_CASE("train suite writes 400 metric rows and a manifest") {
  ScratchDir dir("train");
  const fs::path out = dir.path / "t1";
  const Run r = lab({"train", "--algo", "opo", "--env", "bandit10", "--alpha", "0.6", "--mu", "1.0", "--eta",
                     "0.05", "--steps", "400", "--rollouts", "6", "--seed", "7", "--out", out.string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "metrics.csv");
  CHECK(line_count(csv) == 401);
  const std::string manifest = slurp(out / "manifest");
  CHECK(manifest.find("status = passed") != std::string::npos);
  CHECK(manifest.find("artifact.0 = metrics.csv") != std::string::npos);
  CHECK(manifest.find("config.alpha = 0.6") != std::string::npos);
  CHECK(manifest.find("timestamp = ") != std::string::npos);
  for (const auto& entry : fs::directory_iterator(out)) CHECK(entry.path().extension() != ".tmp");

  // Byte-identical bodies on rerun.
  const fs::path again = dir.path / "t2";
  lab({"train", "--algo", "opo", "--steps", "400", "--seed", "7", "--out", again.string()});
  CHECK(slurp(again / "metrics.csv") == csv);
}

TEST_CASE("config file sits between preset and flags") {
  ScratchDir dir("config");
  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << "# shorter run\nsteps = 12\nseed = 3\nalgo = grpo\n";
  const Run r = lab({"train", "--config", cfg.string(), "--steps", "7", "--out", (dir.path / "o").string()});
  REQUIRE(r.code == 0);
  CHECK(line_count(slurp(dir.path / "o" / "metrics.csv")) == 8);
  const std::string manifest = slurp(dir.path / "o" / "manifest");
  CHECK(manifest.find("config.seed = 3") != std::string::npos);
  CHECK(manifest.find("config.algo = grpo") != std::string::npos);

  std::ofstream(dir.path / "bad.cfg") << "trials = 4\n";
  CHECK(lab({"train", "--config", (dir.path / "bad.cfg").string(), "--out", (dir.path / "p").string()}).code == 2);
  CHECK(lab({"train", "--config", (dir.path / "missing.cfg").string()}).code == 2);
}

TEST_CASE("compare suite") {
  ScratchDir dir("compare");
  const fs::path out = dir.path / "c";
  const Run r = lab({"compare", "--algo", "opo,grpo,dpo,l2pg", "--env", "bandit10", "--steps", "50", "--out", out.string()});
  REQUIRE(r.code == 0);
  const std::string summary = slurp(out / "summary.csv");
  CHECK(summary.rfind("algo,mean_reward_final20,grad_norm_final20,entropy_final\n", 0) == 0);
  CHECK(line_count(summary) == 5);
  for (const char* algo : {"opo", "grpo", "dpo", "l2pg"}) {
    CHECK(fs::exists(out / algo / "metrics.csv"));
    CHECK(fs::exists(out / "plotdata" / (std::string("grad_norm_") + algo + ".csv")));
  }
  CHECK(slurp(out / "plotdata" / "mean_reward_opo.csv").rfind("step,value\n", 0) == 0);

  CHECK(lab({"compare", "--algo", "opo", "--out", (dir.path / "single").string()}).code == 2);
  CHECK(lab({"compare", "--algo", "opo,opo", "--out", (dir.path / "dup").string()}).code == 2);
}

TEST_CASE("usage errors exit 2") {
  const Run none = lab({});
  CHECK(none.code == 2);
  CHECK(none.err.find("Usage") != std::string::npos);
  CHECK(lab({"explode"}).code == 2);
  CHECK(lab({"train", "--bogus", "1"}).code == 2);
  CHECK(lab({"bounds", "--alpha", "1"}).code == 2);
  CHECK(lab({"train", "--algo", "ppo"}).code == 2);
  CHECK(lab({"train", "--env", "gridworld"}).code == 2);
  CHECK(lab({"train", "--steps", "0"}).code == 2);
  CHECK(lab({"train", "--algo", "dpo", "--beta", "-1"}).code == 2);
  CHECK(lab({"train", "--eta", "fast"}).code == 2);
  CHECK(lab({"--help"}).code == 0);
}

TEST_CASE("OPO_LAB_OUT sets the default output directory") {
  ScratchDir dir("env");
  const fs::path target = dir.path / "from_env";
  ::setenv("OPO_LAB_OUT", target.c_str(), 1);
  const Run r = lab({"train", "--steps", "5"});
  ::unsetenv("OPO_LAB_OUT");
  CHECK(r.code == 0);
  CHECK(fs::exists(target / "metrics.csv"));
}

TEST_CASE("manifest records an aborted comparison") {
  ScratchDir dir("abort");
  std::vector<TrainConfig> cfgs = {TrainConfig::preset(Algo::GRPO), TrainConfig::preset(Algo::OPO)};
  cfgs[0].steps = 5;
  cfgs[1].steps = 5;
  cfgs[1].initial_logits = PolicyLogits{{0.0, 0.0}};  // wrong size for bandit10
  const SuiteReport report = compare_runs(bandit10(), cfgs, dir.path);
  CHECK(report.aborted);
  CHECK_FALSE(report.passed);
  CHECK(report.extra.at("completed_runs") == "grpo");
  SuiteSpec spec{Suite::Compare, {}, dir.path};
  write_manifest(spec, report);
  const std::string manifest = slurp(dir.path / "manifest");
  CHECK(manifest.find("status = aborted") != std::string::npos);
  CHECK(manifest.find("completed_runs = grpo") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "summary.csv"));
}
