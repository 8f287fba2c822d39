#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsde/learner.hpp"
#include "tsde/policies.hpp"

namespace tsde::cli {

enum class Mode { kBayesian, kFrequentist, kEvalPolicy, kDiagnostics };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);

using GePair = std::pair<double, double>;  // (p01, p11)

struct ExperimentConfig {
  Mode mode = Mode::kFrequentist;
  int K = 4;
  int N = 2;
  std::int64_t T = 10'000;

  // Candidate grid: either a uniform (p01, p11) grid shared by all arms or an
  // explicit per-arm list.
  double grid_min = 0.1;
  double grid_max = 0.9;
  double grid_step = 0.1;
  std::vector<std::vector<GePair>> candidates;

  // Empty means "sample-from-prior".
  std::vector<GePair> theta_star;

  std::vector<PolicyMappingId> mappings = {PolicyMappingId::kBestFixed, PolicyMappingId::kMyopic,
                                           PolicyMappingId::kWhittle};
  int reps = 100;
  int prior_draws = 1;
  std::uint64_t seed = 1;
  std::int64_t tmix_quarter = 0;  // 0: largest quarter mixing time over the grid
  std::int64_t n_cap = 0;         // 0: horizon mixing time
  std::string output_dir;         // empty: $TSDE_OUTPUT_DIR, then "tsde-out"
  std::int64_t snapshot_every = 50;
  std::int64_t curve_stride = 1;
  std::int64_t eval_steps = 100'000;
  int eval_reps = 20;
  std::int64_t burn_in = -1;      // -1: 10 * tmix_quarter
  bool realized_rewards = false;
  double whittle_tol = 1e-6;
  double delta = 0.0;             // diagnostics confidence level; 0: 1 / (tmix T)
  double span_bound = 10.0;       // H used by the bound overlay
  std::int64_t slope_lo = 0;      // 0: T / 4
  std::int64_t slope_hi = 0;      // 0: T
  int threads = 1;

  bool sample_theta_star() const { return theta_star.empty(); }
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Parses a flat JSON document. Unknown keys, type errors and semantic problems
// are collected and thrown together.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical form: sorted keys, every field present.
std::string serialize_config(const ExperimentConfig& config);

// Semantic checks only; returns every violation found.
std::vector<std::string> validate(const ExperimentConfig& config);

ExperimentConfig preset(std::string_view name);

ParamGrid make_grid(const ExperimentConfig& config);
SystemParams make_theta(const std::vector<GePair>& pairs);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace tsde::cli
