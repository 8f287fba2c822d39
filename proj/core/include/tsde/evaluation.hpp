#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tsde/learner.hpp"
#include "tsde/policies.hpp"

namespace tsde {

struct AverageRewardEstimate {
  double mean = 0.0;
  double stderr = 0.0;
  int reps = 0;
};

struct AverageRewardOptions {
  std::int64_t horizon = 100'000;  // T_eval
  std::int64_t burn_in = 0;        // steps excluded from the average
  int reps = 20;
  std::vector<State> init;         // empty: every arm starts in its highest-reward state
  int threads = 1;
};

// Mean over replications of the time-averaged r_theta(xi_t, A_t) on
// t in (burn_in, horizon], with the standard error across replications.
// Replication r uses Rng(derive_seed(seed, r)).
AverageRewardEstimate estimate_policy_reward(const SystemParams& theta, const Policy& policy,
                                             const AverageRewardOptions& options, std::uint64_t seed);
AverageRewardEstimate estimate_average_reward(const SystemParams& theta, const PolicyMapper& mapper,
                                              int num_active, const AverageRewardOptions& options,
                                              std::uint64_t seed);

struct RegretCurve {
  std::vector<std::int64_t> times;
  std::vector<double> values;
  std::vector<double> stderr;
  int reps = 0;
};

// Everything needed to run the learner except theta* and the seed.
struct LearnerSetup {
  ParamGrid grid;
  Posterior prior;
  int num_active = 1;
  std::int64_t horizon = 2;
  std::int64_t tmix_quarter = 1;
  std::vector<State> init;
  std::int64_t snapshot_every = 50;
  std::int64_t curve_stride = 1;     // regret sampled at t = 0, stride, 2 stride, ..., T
  bool realized_rewards = false;     // default uses r_{theta*}(xi_t, A_t)
  bool keep_counter_snapshots = false;
  int threads = 1;
};

// Called once per finished run. Calls are serialized; they arrive in
// replication order only when threads == 1.
using RunObserver = std::function<void(int rep, const RunRecord& run)>;

struct FrequentistResult {
  RegretCurve curve;
  AverageRewardEstimate j_star;
  std::vector<int> episode_counts;
  std::vector<double> mean_cumulative_reward;  // aligned with curve.times
};

// R(t) = J* t - mean_reps sum_{tau <= t} r_tau. J* is estimated with
// derive_seed(seed, kJStarStream) unless supplied; run r uses
// derive_seed(seed, kRunStream, r).
FrequentistResult frequentist_regret(const SystemParams& theta_star, const PolicyMapper& mapper,
                                     const LearnerSetup& setup, int reps, std::uint64_t seed,
                                     const AverageRewardOptions& j_options,
                                     std::optional<AverageRewardEstimate> j_star = std::nullopt,
                                     const RunObserver& observer = {});

struct BayesianResult {
  RegretCurve curve;
  std::vector<std::vector<std::size_t>> draws;  // candidate indices of each theta*
  std::vector<double> j_stars;
  double j_star_mean = 0.0;
  double j_star_stderr = 0.0;
  std::vector<int> episode_counts;
};

// Seed that draw d hands to frequentist_regret; exposed so callers can replay
// a single draw.
std::uint64_t prior_draw_seed(std::uint64_t seed, int draw);
std::vector<std::size_t> draw_theta_star(const Posterior& prior, const ParamGrid& grid, std::uint64_t seed, int draw);

// Averages frequentist regret over theta* ~ prior. With one draw the result is
// exactly that draw's frequentist curve.
BayesianResult bayesian_regret(const PolicyMapper& mapper, const LearnerSetup& setup, int prior_draws,
                               int reps_per_draw, std::uint64_t seed, const AverageRewardOptions& j_options,
                               const RunObserver& observer = {});

inline constexpr std::uint64_t kJStarStream = 2;
inline constexpr std::uint64_t kRunStream = 3;
inline constexpr std::uint64_t kPriorStream = 4;

// ---------------------------------------------------------------------------
// Confidence sets and on-policy error

struct EpisodeDiagnostic {
  int index = 0;
  std::int64_t start = 0;
  std::int64_t length = 0;
  double min_radius = 0.0;
  double max_radius = 0.0;
  bool member = true;   // theta* inside the confidence set
  int violations = 0;   // zetas where the L1 gap exceeds the radius
  double delta_contribution = 0.0;
  double delta_cumulative = 0.0;
};

struct DiagnosticRecord {
  std::vector<EpisodeDiagnostic> episodes;
  double delta_total = 0.0;
  double delta_bound = 0.0;  // 12 sqrt(N tmix T ln(1/delta)) sum_k |S_k|
  double coverage_bound = 0.0;  // sum_k |S_k| * delta * tmix
  // Radii per episode in zeta order (only when requested).
  std::vector<std::vector<double>> radii;
};

// sqrt(8 |S_k| ln(1/delta) / max(1, count)).
double confidence_radius(int num_states, double delta, std::int64_t count);

// Requires a run recorded with counter snapshots. Unvisited zetas use the
// uniform distribution as their empirical estimate.
DiagnosticRecord confidence_diagnostic(const RunRecord& run, const SystemParams& theta_star, double delta,
                                       bool keep_radii = false);

// ---------------------------------------------------------------------------

struct SpanEstimate {
  double beta;
  double span;
  std::size_t iterations;
};

// Discounted value of the policy on the truncated meta-state chain,
// v(x) = beta (r(x) + E v(x')), reported as max - min over states.
std::vector<SpanEstimate> discounted_span_probe(const SystemParams& theta, const Policy& policy,
                                                const std::vector<double>& betas, std::int64_t n_cap,
                                                double tol, std::size_t budget = 100'000);

// 2(H+N) sqrt(sum_S tmix T ln(N T)) + 28 (H+1) sum_S sqrt(N tmix T ln(tmix T)).
double theoretical_bound(double span_bound, int num_active, int total_states, std::int64_t tmix,
                         std::int64_t horizon);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

// Least squares of log(value) against log(time) over times in [t_lo, t_hi].
LogLogFit loglog_fit(const RegretCurve& curve, std::int64_t t_lo, std::int64_t t_hi);
inline double loglog_slope(const RegretCurve& curve, std::int64_t t_lo, std::int64_t t_hi) {
  return loglog_fit(curve, t_lo, t_hi).slope;
}

}  // namespace tsde
