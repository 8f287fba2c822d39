#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tsde/markov.hpp"
#include "tsde/rng.hpp"

namespace tsde {

// Fully observed statistic: per arm, the last observed state and the number of
// steps since that observation (>= 1).
struct MetaState {
  std::vector<State> last_obs;
  std::vector<std::int64_t> elapsed;

  int num_arms() const { return static_cast<int>(last_obs.size()); }
  friend bool operator==(const MetaState&, const MetaState&) = default;
};

// Per-arm activation flags.
struct Action {
  std::vector<std::uint8_t> active;

  static Action from_arms(int num_arms, const std::vector<int>& arms);
  int num_arms() const { return static_cast<int>(active.size()); }
  int count() const;
  std::vector<int> active_arms() const;
  friend bool operator==(const Action&, const Action&) = default;
};

// True per-arm state plus the action each arm received at the previous step,
// which selects the matrix driving its next transition. Only the environment
// reads this.
struct HiddenState {
  std::vector<State> states;
  std::vector<std::uint8_t> last_active;

  static HiddenState initial(std::vector<State> states);
  friend bool operator==(const HiddenState&, const HiddenState&) = default;
};

struct Observation {
  int arm;
  State state;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepOutcome {
  std::vector<Observation> observations;  // ascending arm order
  double reward = 0.0;
};

struct ResetResult {
  HiddenState hidden;
  MetaState meta;
};

struct StepResult {
  HiddenState hidden;
  StepOutcome outcome;
};

// Hidden state set to `init` and treated as observed at a pull: sigma = init,
// n = 1 for every arm.
ResetResult reset(const SystemParams& theta, const HiddenState& init);

// Advance every arm by one transition (active matrix if the arm was pulled at
// the previous step, passive otherwise), then observe the arms flagged in `a`.
StepResult step(const SystemParams& theta, const HiddenState& hidden, const Action& a,
                int num_active, Rng& rng);

// Active arms: sigma <- observed, n <- 1. Passive arms: n <- n + 1.
MetaState update_meta(const MetaState& xi, const Action& a, const std::vector<Observation>& obs);

// Sum over active arms of the expected reward under the n-step predictive.
double expected_reward(const SystemParams& theta, const MetaState& xi, const Action& a);

void check_action(const Action& a, int num_arms, int num_active);

// Owns the hidden truth for one replication; learners see only MetaState and
// StepOutcome.
class Environment {
 public:
  Environment(SystemParams theta, std::vector<State> init, int num_active);

  const MetaState& meta() const { return meta_; }
  const SystemParams& params() const { return theta_; }
  int num_active() const { return num_active_; }
  int num_arms() const { return static_cast<int>(theta_.size()); }
  std::int64_t time() const { return time_; }

  // Expected reward of `a` under the true parameters at the current meta-state.
  double expected_reward(const Action& a) const { return tsde::expected_reward(theta_, meta_, a); }

  StepOutcome step(const Action& a, Rng& rng);
  // Same as step() but reuses `out`'s storage.
  void step_into(const Action& a, Rng& rng, StepOutcome& out);

 private:
  SystemParams theta_;
  // Row-major copies of each arm's matrices: rows_[k][0] active, [1] passive.
  std::vector<std::array<std::vector<double>, 2>> rows_;
  int num_active_;
  HiddenState hidden_;
  MetaState meta_;
  std::int64_t time_ = 1;
};

}  // namespace tsde
