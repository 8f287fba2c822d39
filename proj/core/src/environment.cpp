#include "tsde/environment.hpp"

#include <string>

#include "tsde/errors.hpp"

namespace tsde {
namespace {

State draw_state(std::span<const double> row, Rng& rng) {
  return static_cast<State>(rng.categorical(row));
}

}  // namespace

Action Action::from_arms(int num_arms, const std::vector<int>& arms) {
  Action a{std::vector<std::uint8_t>(num_arms, 0)};
  for (int k : arms) {
    if (k < 0 || k >= num_arms) throw ContractViolation("arm index out of range");
    a.active[k] = 1;
  }
  return a;
}

int Action::count() const {
  int c = 0;
  for (auto f : active) c += f ? 1 : 0;
  return c;
}

std::vector<int> Action::active_arms() const {
  std::vector<int> arms;
  for (int k = 0; k < num_arms(); ++k)
    if (active[k]) arms.push_back(k);
  return arms;
}

HiddenState HiddenState::initial(std::vector<State> states) {
  HiddenState h{std::move(states), {}};
  h.last_active.assign(h.states.size(), 1);
  return h;
}

void check_action(const Action& a, int num_arms, int num_active) {
  if (a.num_arms() != num_arms) throw ContractViolation("action has wrong arm count");
  if (a.count() != num_active) {
    throw ContractViolation("action activates " + std::to_string(a.count()) + " arms, expected " +
                            std::to_string(num_active));
  }
}

ResetResult reset(const SystemParams& theta, const HiddenState& init) {
  if (init.states.size() != theta.size()) throw ContractViolation("initial state has wrong arm count");
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (init.states[k] < 0 || init.states[k] >= theta[k].num_states()) {
      throw ContractViolation("initial state of arm " + std::to_string(k) + " out of range");
    }
  }
  ResetResult out;
  out.hidden = HiddenState::initial(init.states);
  out.meta.last_obs = init.states;
  out.meta.elapsed.assign(theta.size(), 1);
  return out;
}

StepResult step(const SystemParams& theta, const HiddenState& hidden, const Action& a,
                int num_active, Rng& rng) {
  const int K = static_cast<int>(theta.size());
  check_action(a, K, num_active);
  StepResult out;
  out.hidden.states.resize(K);
  out.hidden.last_active = a.active;
  for (int k = 0; k < K; ++k) {
    const auto& P = hidden.last_active[k] ? theta[k].active() : theta[k].passive();
    const Eigen::RowVectorXd row = P.matrix().row(hidden.states[k]);
    const State next = draw_state({row.data(), static_cast<std::size_t>(row.size())}, rng);
    out.hidden.states[k] = next;
    if (a.active[k]) {
      out.outcome.observations.push_back({k, next});
      out.outcome.reward += theta[k].rewards()[next];
    }
  }
  return out;
}

MetaState update_meta(const MetaState& xi, const Action& a, const std::vector<Observation>& obs) {
  if (a.num_arms() != xi.num_arms()) throw ContractViolation("action has wrong arm count");
  MetaState next = xi;
  std::vector<std::uint8_t> seen(xi.num_arms(), 0);
  for (const auto& o : obs) {
    if (o.arm < 0 || o.arm >= xi.num_arms()) throw ContractViolation("observation arm out of range");
    if (!a.active[o.arm]) throw ContractViolation("observation supplied for a passive arm");
    if (seen[o.arm]) throw ContractViolation("duplicate observation");
    seen[o.arm] = 1;
  }
  for (int k = 0; k < xi.num_arms(); ++k) {
    if (a.active[k] && !seen[k]) throw ContractViolation("missing observation for an active arm");
    if (!a.active[k]) ++next.elapsed[k];
  }
  for (const auto& o : obs) {
    next.last_obs[o.arm] = o.state;
    next.elapsed[o.arm] = 1;
  }
  return next;
}

double expected_reward(const SystemParams& theta, const MetaState& xi, const Action& a) {
  if (a.num_arms() != static_cast<int>(theta.size()) || xi.num_arms() != a.num_arms()) {
    throw ContractViolation("arm count mismatch");
  }
  double r = 0.0;
  for (int k = 0; k < a.num_arms(); ++k)
    if (a.active[k]) r += theta[k].predictive_reward(xi.last_obs[k], xi.elapsed[k]);
  return r;
}

Environment::Environment(SystemParams theta, std::vector<State> init, int num_active)
    : theta_(std::move(theta)), num_active_(num_active) {
  validate_system(theta_);
  if (num_active_ < 1 || num_active_ > static_cast<int>(theta_.size())) {
    throw ContractViolation("number of active arms must lie in [1, K]");
  }
  auto r = tsde::reset(theta_, HiddenState::initial(std::move(init)));
  hidden_ = std::move(r.hidden);
  meta_ = std::move(r.meta);
  rows_.resize(theta_.size());
  for (std::size_t k = 0; k < theta_.size(); ++k) {
    const int S = theta_[k].num_states();
    for (int which = 0; which < 2; ++which) {
      const auto& M = which == 0 ? theta_[k].active().matrix() : theta_[k].passive().matrix();
      auto& flat = rows_[k][which];
      flat.resize(S * S);
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j) flat[i * S + j] = M(i, j);
    }
  }
}

StepOutcome Environment::step(const Action& a, Rng& rng) {
  StepOutcome out;
  step_into(a, rng, out);
  return out;
}

void Environment::step_into(const Action& a, Rng& rng, StepOutcome& out) {
  const int K = num_arms();
  check_action(a, K, num_active_);
  out.observations.clear();
  out.reward = 0.0;
  for (int k = 0; k < K; ++k) {
    const int S = theta_[k].num_states();
    const auto& flat = rows_[k][hidden_.last_active[k] ? 0 : 1];
    const std::span<const double> row(flat.data() + hidden_.states[k] * S, static_cast<std::size_t>(S));
    const State next = draw_state(row, rng);
    hidden_.states[k] = next;
    hidden_.last_active[k] = a.active[k];
    if (a.active[k]) {
      out.observations.push_back({k, next});
      out.reward += theta_[k].rewards()[next];
      meta_.last_obs[k] = next;
      meta_.elapsed[k] = 1;
    } else {
      ++meta_.elapsed[k];
    }
  }
  ++time_;
}

}  // namespace tsde
