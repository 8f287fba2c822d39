#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "tsde/evaluation.hpp"

namespace tsde::cli {

// Config with every automatic field filled in.
struct ResolvedConfig {
  ExperimentConfig config;
  std::int64_t tmix = 0;  // horizon mixing time
  std::filesystem::path output_dir;
};

ResolvedConfig resolve(const ExperimentConfig& config);

struct TraceRow {
  std::int64_t time;
  int arm;
  double weight_true;
  int episode;
};

// Posterior weight of the true candidate per arm, for one run.
struct TruthWeights {
  std::vector<double> early;  // at T / 10
  std::vector<double> final;  // at T
};

struct MappingSummary {
  PolicyMappingId id;
  AverageRewardEstimate j;  // J for eval-policy, J* otherwise
  std::optional<RegretCurve> regret;
  std::optional<LogLogFit> slope;
  std::string slope_error;
  std::vector<int> episode_counts;
  double episode_bound = 0.0;
  int episode_bound_violations = 0;
  int counter_violations = 0;  // runs where sum of counters != N T
  std::vector<TruthWeights> truth_weights;
  std::vector<TraceRow> trace;  // replication 0

  // Diagnostics mode only.
  int diag_episodes = 0;
  int diag_outside = 0;
  double coverage_bound = 0.0;
  double delta_total_mean = 0.0;
  double delta_bound = 0.0;
  std::vector<SpanEstimate> span;
};

struct ExperimentResult {
  ResolvedConfig resolved;
  std::vector<MappingSummary> mappings;
  std::vector<std::filesystem::path> files;
};

// Runs every configured mapping, writes CSVs and a manifest into the output
// directory and prints a summary table to `summary` when given.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* summary = nullptr);

struct SlopeReport {
  std::string mapping;
  LogLogFit fit;
  std::filesystem::path loglog_file;
};

// Fits log regret against log t on [t_lo, t_hi] for each mapping found in a
// regret CSV (or only `mapping` when given) and writes a two-column file per
// mapping next to `out_prefix`.
std::vector<SlopeReport> emit_slope_report(const std::filesystem::path& regret_csv, std::int64_t t_lo,
                                           std::int64_t t_hi, const std::optional<std::string>& mapping,
                                           const std::filesystem::path& out_prefix);

}  // namespace tsde::cli
