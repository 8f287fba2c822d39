#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "experiment.hpp"

using namespace tsde;
using namespace tsde::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tsde-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> violations_of(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, std::string_view needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c;
  c.mode = Mode::kFrequentist;
  c.K = 2;
  c.N = 1;
  c.T = 200;
  c.grid_min = 0.2;
  c.grid_max = 0.8;
  c.grid_step = 0.3;
  c.theta_star = {{.2, .8}, {.5, .5}};
  c.reps = 3;
  c.eval_steps = 5000;
  c.eval_reps = 2;
  c.curve_stride = 10;
  c.seed = 77;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST(Config, Presets) {
  const auto fig2 = preset("fig2");
  EXPECT_EQ(fig2.mode, Mode::kBayesian);
  EXPECT_EQ(fig2.K, 8);
  EXPECT_EQ(fig2.N, 3);
  EXPECT_EQ(fig2.T, 2000);
  EXPECT_TRUE(fig2.sample_theta_star());
  const auto fig3 = preset("fig3");
  EXPECT_EQ(fig3.mode, Mode::kFrequentist);
  EXPECT_EQ(fig3.K, 4);
  EXPECT_EQ(fig3.N, 2);
  EXPECT_EQ(fig3.T, 10000);
  EXPECT_EQ(fig3.theta_star, (std::vector<GePair>{{.3, .7}, {.4, .6}, {.5, .5}, {.6, .4}}));
  EXPECT_TRUE(validate(fig2).empty());
  EXPECT_TRUE(validate(fig3).empty());
  EXPECT_THROW(preset("fig9"), ConfigError);
}

TEST(Config, NExceedingKNamesBothFields) {
  const auto v = violations_of(R"({"K": 2, "N": 3, "theta_star": "sample-from-prior", "mode": "bayesian"})");
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(mentions(v, "N, K"));
}

TEST(Config, ReportsEveryViolationAtOnce) {
  const auto v = violations_of(R"({"K": 0, "T": 1, "reps": "many", "colour": "blue", "mappings": ["ucb"]})");
  EXPECT_TRUE(mentions(v, "colour"));
  EXPECT_TRUE(mentions(v, "reps"));
  EXPECT_TRUE(mentions(v, "ucb"));
  EXPECT_TRUE(mentions(v, "K"));
  EXPECT_TRUE(mentions(v, "T"));
  EXPECT_GE(v.size(), 5u);
}

TEST(Config, ParseErrorsCarryLineAndColumn) {
  const auto v = violations_of("{\n  \"K\": 4,\n  \"N\": ,\n}");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(mentions(v, "line 3")) << v[0];
}

TEST(Config, CanonicalRoundTrip) {
  for (const auto* name : {"fig2", "fig3"}) {
    const auto c = preset(name);
    const auto text = serialize_config(c);
    EXPECT_EQ(parse_config(text), c);
    EXPECT_EQ(serialize_config(parse_config(text)), text);
  }
  auto c = tiny_config("somewhere");
  c.candidates = {{{.2, .8}, {.5, .5}}, {{.5, .5}}};
  c.mappings = {PolicyMappingId::kWhittle};
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, ModeNames) {
  for (auto m : {Mode::kBayesian, Mode::kFrequentist, Mode::kEvalPolicy, Mode::kDiagnostics}) {
    EXPECT_EQ(parse_mode(to_string(m)), m);
  }
  EXPECT_FALSE(parse_mode("bayes").has_value());
}

TEST(Config, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(SlopeReport, RecoversSyntheticExponents) {
  const auto dir = scratch_dir("slope");
  {
    std::ofstream csv(dir / "regret.csv");
    csv.precision(17);
    csv << "time,regret_mean,regret_stderr,mapping\n";
    for (int t = 0; t <= 1000; t += 50) {
      csv << t << ',' << 4.0 * std::sqrt(t) << ",0,sqrt\n";
      csv << t << ',' << 0.1 * t << ",0,linear\n";
    }
  }
  const auto reports = emit_slope_report(dir / "regret.csv", 100, 1000, std::nullopt, dir / "loglog");
  ASSERT_EQ(reports.size(), 2u);
  for (const auto& r : reports) {
    const double expected = r.mapping == "sqrt" ? 0.5 : 1.0;
    EXPECT_NEAR(r.fit.slope, expected, 1e-9) << r.mapping;
    EXPECT_TRUE(fs::exists(r.loglog_file));
  }
  const auto only = emit_slope_report(dir / "regret.csv", 100, 1000, std::string("linear"), dir / "one");
  ASSERT_EQ(only.size(), 1u);
  EXPECT_EQ(only[0].mapping, "linear");
  EXPECT_THROW(emit_slope_report(dir / "missing.csv", 1, 2, std::nullopt, dir / "x"), std::runtime_error);
}

TEST(Experiment, TinyRunIsByteReproducible) {
  const auto a = scratch_dir("repro-a");
  const auto b = scratch_dir("repro-b");
  const auto ra = run_experiment(tiny_config(a));
  const auto rb = run_experiment(tiny_config(b));
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (const char* name : {"eval.csv", "regret.csv", "bound.csv", "trace_whittle.csv"}) {
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const auto manifest = slurp(a / "manifest.json");
  EXPECT_NE(manifest.find("config_hash"), std::string::npos);
  EXPECT_NE(manifest.find("\"seed\": 77"), std::string::npos);
  EXPECT_EQ(ra.mappings.size(), 3u);
  for (const auto& m : ra.mappings) {
    ASSERT_TRUE(m.regret.has_value());
    EXPECT_EQ(m.regret->times.back(), 200);
  }

  const auto c = scratch_dir("repro-c");
  auto other = tiny_config(c);
  other.seed = 78;
  run_experiment(other);
  EXPECT_NE(slurp(a / "regret.csv"), slurp(c / "regret.csv"));
}

TEST(Experiment, OutputDirectoryFallsBackToEnvironment) {
  auto c = tiny_config("");
  c.output_dir.clear();
  ::setenv("TSDE_OUTPUT_DIR", "/tmp/tsde-env-out", 1);
  EXPECT_EQ(resolve(c).output_dir, fs::path("/tmp/tsde-env-out"));
  ::unsetenv("TSDE_OUTPUT_DIR");
  EXPECT_EQ(resolve(c).output_dir, fs::path("tsde-out"));
  c.output_dir = "explicit";
  EXPECT_EQ(resolve(c).output_dir, fs::path("explicit"));
}
