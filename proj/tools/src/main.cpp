#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "config.hpp"
#include "experiment.hpp"
#include "json.hpp"
#include "tsde/version.hpp"

namespace {

using namespace tsde;
using namespace tsde::cli;

struct SourceOptions {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<int> threads;
  std::string output_dir;
  std::vector<std::string> mappings;
};

void add_source_options(CLI::App* cmd, SourceOptions& o) {
  cmd->add_option("config", o.config_path, "Experiment config (flat JSON)");
  cmd->add_option("--preset", o.preset_name, "Built-in experiment")->check(CLI::IsMember({"fig2", "fig3"}));
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--reps", o.reps, "Replications per theta*");
  cmd->add_option("--threads", o.threads, "Worker threads");
  cmd->add_option("--output-dir", o.output_dir, "Output directory (default: $TSDE_OUTPUT_DIR or tsde-out)");
  cmd->add_option("--mapping", o.mappings, "Policy mapping(s): best-fixed, myopic, whittle, oracle-vi");
}

ExperimentConfig build_config(const SourceOptions& o, std::optional<Mode> mode) {
  if (o.config_path.empty() == o.preset_name.empty()) {
    throw ConfigError({"give exactly one of a config path or --preset"});
  }
  ExperimentConfig c = o.preset_name.empty() ? load_config(o.config_path) : preset(o.preset_name);
  if (mode) c.mode = *mode;
  if (o.seed) c.seed = *o.seed;
  if (o.reps) c.reps = *o.reps;
  if (o.threads) c.threads = *o.threads;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (!o.mappings.empty()) {
    c.mappings.clear();
    std::vector<std::string> bad;
    for (const auto& name : o.mappings) {
      try {
        c.mappings.push_back(parse_mapping(name));
      } catch (const std::exception&) {
        bad.push_back("--mapping: unknown mapping '" + name + "'");
      }
    }
    if (!bad.empty()) throw ConfigError(bad);
  }
  if (auto errors = validate(c); !errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

int report_error(std::string_view kind, const std::string& message, const std::vector<std::string>& details = {}) {
  nlohmann::ordered_json record;
  record["status"] = "error";
  record["kind"] = std::string(kind);
  record["message"] = message;
  if (!details.empty()) record["violations"] = details;
  std::cerr << record.dump() << '\n';
  return kind == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thompson sampling with dynamic episodes for restless bandits"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SourceOptions run_opts, eval_opts, diag_opts, show_opts;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config or preset");
  add_source_options(run, run_opts);
  auto* eval = app.add_subcommand("eval-policy", "Estimate average reward of each mapping on theta*");
  add_source_options(eval, eval_opts);
  auto* diag = app.add_subcommand("diagnostics", "Confidence-set coverage, on-policy error and span probe");
  add_source_options(diag, diag_opts);
  auto* show = app.add_subcommand("show-config", "Print the canonical form of a config or preset");
  add_source_options(show, show_opts);

  std::string slope_csv, slope_out;
  std::vector<std::int64_t> window;
  std::optional<std::string> slope_mapping;
  auto* slope = app.add_subcommand("slope", "Log-log slope of a regret CSV");
  slope->add_option("regret_csv", slope_csv, "regret.csv from a run")->required()->check(CLI::ExistingFile);
  slope->add_option("--window", window, "t_lo t_hi")->expected(2);
  slope->add_option("--mapping", slope_mapping, "Only this mapping");
  slope->add_option("--out", slope_out, "Prefix for the log-log files (default: <csv dir>/loglog)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*slope) {
      std::int64_t lo = window.size() == 2 ? window[0] : 1;
      std::int64_t hi = window.size() == 2 ? window[1] : std::numeric_limits<std::int64_t>::max();
      const std::filesystem::path prefix =
          slope_out.empty() ? std::filesystem::path(slope_csv).parent_path() / "loglog" : std::filesystem::path(slope_out);
      for (const auto& r : emit_slope_report(slope_csv, lo, hi, slope_mapping, prefix)) {
        std::cout << fmt::format("{:<12} slope={:.6f} intercept={:.6f} r2={:.6f} points={} -> {}\n", r.mapping,
                                 r.fit.slope, r.fit.intercept, r.fit.r_squared, r.fit.points, r.loglog_file.string());
      }
      return 0;
    }
    if (*show) {
      std::cout << serialize_config(build_config(show_opts, std::nullopt));
      return 0;
    }
    ExperimentConfig config;
    if (*run) config = build_config(run_opts, std::nullopt);
    if (*eval) config = build_config(eval_opts, Mode::kEvalPolicy);
    if (*diag) config = build_config(diag_opts, Mode::kDiagnostics);
    const auto result = run_experiment(config, &std::cout);
    std::cout << "wrote " << result.resolved.output_dir.string() << "\n";
  } catch (const ConfigError& e) {
    return report_error("config", "invalid configuration", e.violations());
  } catch (const std::exception& e) {
    return report_error("runtime", e.what());
  }
  return 0;
}
