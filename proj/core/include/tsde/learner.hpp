#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsde/environment.hpp"
#include "tsde/markov.hpp"
#include "tsde/policies.hpp"
#include "tsde/rng.hpp"

namespace tsde {

// Finite candidate set per arm; the prior support is their product.
class ParamGrid {
 public:
  explicit ParamGrid(std::vector<std::vector<ArmModel>> candidates);

  // Every arm gets all Gilbert-Elliott pairs (p01, p11) on lo, lo+step, ..., hi.
  static ParamGrid uniform_gilbert_elliott(int num_arms, double lo, double hi, double step);

  int num_arms() const { return static_cast<int>(candidates_.size()); }
  std::size_t size(int arm) const { return candidates_[arm].size(); }
  const ArmModel& candidate(int arm, std::size_t c) const { return candidates_[arm][c]; }
  const std::vector<ArmModel>& candidates(int arm) const { return candidates_[arm]; }

  std::optional<std::size_t> find(int arm, const ArmModel& model) const;
  SystemParams assemble(const std::vector<std::size_t>& choice) const;
  std::vector<int> state_counts() const;
  int total_states() const;

 private:
  std::vector<std::vector<ArmModel>> candidates_;
};

// Product-form posterior: one weight vector per arm.
class Posterior {
 public:
  explicit Posterior(std::vector<std::vector<double>> weights);
  static Posterior uniform(const ParamGrid& grid);
  static Posterior point_mass(const ParamGrid& grid, const std::vector<std::size_t>& atom);

  int num_arms() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& arm(int k) const { return weights_[k]; }
  double weight(int k, std::size_t c) const { return weights_[k][c]; }

  // Bayes rule for one observation of arm k made n steps after it was seen in
  // sigma. Throws MisspecificationError if every candidate gives it
  // probability zero; the posterior is left untouched in that case.
  void update(const ParamGrid& grid, int k, State sigma, std::int64_t n, State observed);

  friend bool operator==(const Posterior&, const Posterior&) = default;

 private:
  std::vector<std::vector<double>> weights_;
};

Posterior posterior_update(const Posterior& post, const ParamGrid& grid, int k, State sigma, std::int64_t n,
                           State observed);

struct SampledParams {
  std::vector<std::size_t> candidate;  // per arm
  SystemParams theta;
};

// Independent categorical draw per arm.
SampledParams sample_params(const Posterior& post, const ParamGrid& grid, Rng& rng);

// Truncated visit counts over zeta = (arm, observed state, elapsed bucket),
// bucket = min(n, tmix). Also keeps the observed-outcome histogram per zeta,
// which the confidence diagnostics read.
class CounterTable {
 public:
  CounterTable(std::vector<int> num_states, std::int64_t tmix);

  std::int64_t tmix() const { return tmix_; }
  std::size_t num_zeta() const { return counts_.size(); }
  std::int64_t bucket(std::int64_t n) const { return n < tmix_ ? n : tmix_; }
  std::size_t zeta(int k, State sigma, std::int64_t n) const;
  int num_states(int k) const { return num_states_[k]; }
  int num_arms() const { return static_cast<int>(num_states_.size()); }

  // Counts one visit; the outcome histogram is updated when `observed` is given.
  void record(int k, State sigma, std::int64_t n, std::optional<State> observed = std::nullopt);

  std::int64_t count(std::size_t zeta) const { return counts_[zeta]; }
  std::int64_t count(int k, State sigma, std::int64_t n) const { return counts_[zeta(k, sigma, n)]; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  // Outcome histogram for zeta; length num_states(k).
  std::span<const std::int64_t> outcomes(int k, State sigma, std::int64_t n) const;
  const std::vector<std::int64_t>& outcome_counts() const { return outcomes_; }
  std::size_t outcome_offset(int k, State sigma, std::int64_t n) const;

  std::int64_t total() const { return total_; }
  std::size_t distinct_visited() const;

 private:
  std::vector<int> num_states_;
  std::int64_t tmix_;
  std::vector<std::size_t> zeta_offset_;     // per arm
  std::vector<std::size_t> outcome_offset_;  // per arm
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> outcomes_;
  std::int64_t total_ = 0;
};

// Functional form; the counter for the observed outcome is not touched.
CounterTable record_visit(const CounterTable& counters, int k, State sigma, std::int64_t n);

struct EpisodeState {
  int index = 1;
  std::int64_t start = 1;        // t_i
  std::int64_t prev_length = 0;  // T_{i-1}
  std::vector<std::int64_t> snapshot;  // counts at t_i
};

// t > t_i + T_{i-1}, or some zeta has more than doubled since t_i.
bool should_terminate(std::int64_t t, const EpisodeState& ep, const CounterTable& counters);

// Upper bound on the number of episodes after T steps:
// 2 sqrt(sum_k |S_k| * tmix * T * ln(N T)).
double episode_count_bound(int total_states, std::int64_t tmix, std::int64_t horizon, int num_active);

struct Pull {
  std::int64_t time;
  int arm;
  State sigma;
  std::int64_t elapsed;
  State observed;
};

struct EpisodeRecord {
  int index;
  std::int64_t start;
  std::int64_t prev_length;
  std::vector<std::size_t> sampled;  // candidate per arm
  std::vector<std::int64_t> counts_at_start;
  std::vector<std::int64_t> outcomes_at_start;
};

struct PosteriorSnapshot {
  std::int64_t time;  // posterior after observing steps 1..time
  std::vector<std::vector<double>> weights;
};

struct RunRecord {
  std::int64_t horizon = 0;
  int num_active = 0;
  std::int64_t tmix = 0;
  std::vector<int> state_counts;
  std::vector<Pull> pulls;             // time-major, ascending arm within a step
  std::vector<double> realized_reward; // index t - 1
  std::vector<double> expected_reward; // r_{theta*}(xi_t, A_t), index t - 1
  std::vector<int> episode_of_time;    // index t - 1
  std::vector<EpisodeRecord> episodes;
  std::vector<PosteriorSnapshot> snapshots;
  std::vector<std::optional<std::size_t>> true_candidate;  // theta* in the grid, per arm
  std::int64_t counter_total = 0;
  std::size_t distinct_zeta = 0;
  bool valid = true;
  std::string error;

  int num_episodes() const { return static_cast<int>(episodes.size()); }
  std::int64_t steps() const { return static_cast<std::int64_t>(realized_reward.size()); }
};

struct TsdeConfig {
  ParamGrid grid;
  Posterior prior;
  SystemParams theta_star;
  std::vector<State> init;  // initial hidden states (known to the learner)
  int num_active = 1;
  std::int64_t horizon = 2;
  std::int64_t tmix_quarter = 1;
  std::uint64_t seed = 0;
  std::int64_t snapshot_every = 50;  // 0 disables periodic snapshots
  bool keep_counter_snapshots = true;
};

// Algorithm loop: sample theta_i at each episode start, play mu(theta_i), and
// close the episode on either termination rule. The environment uses stream
// derive_seed(seed, 0), parameter sampling uses derive_seed(seed, 1).
RunRecord run_tsde(const TsdeConfig& config, const PolicyMapper& mapper);

inline constexpr std::uint64_t kEnvironmentStream = 0;
inline constexpr std::uint64_t kSamplingStream = 1;

}  // namespace tsde
