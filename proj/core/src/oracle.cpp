#include "tsde/oracle.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "tsde/errors.hpp"

namespace tsde {

JointStateSpace::JointStateSpace(const SystemParams& theta, std::int64_t n_cap, std::size_t budget)
    : n_cap_(n_cap) {
  if (n_cap < 1) throw ContractViolation("n_cap must be >= 1");
  for (const auto& arm : theta) {
    const std::size_t r = static_cast<std::size_t>(arm.num_states()) * static_cast<std::size_t>(n_cap);
    if (size_ > budget / r + 1) {
      throw StateBudgetError("joint meta-state space exceeds budget of " + std::to_string(budget));
    }
    size_ *= r;
    radix_.push_back(r);
    num_states_.push_back(arm.num_states());
  }
  if (size_ > budget) {
    throw StateBudgetError("joint meta-state space has " + std::to_string(size_) + " states, budget " +
                           std::to_string(budget));
  }
}

std::size_t JointStateSpace::encode(const MetaState& xi) const {
  if (xi.num_arms() != num_arms()) throw ContractViolation("meta-state has wrong arm count");
  std::size_t index = 0;
  for (int k = num_arms() - 1; k >= 0; --k) {
    const std::int64_t n = std::min(xi.elapsed[k], n_cap_);
    const std::size_t digit = static_cast<std::size_t>(xi.last_obs[k] * n_cap_ + (n - 1));
    index = index * radix_[k] + digit;
  }
  return index;
}

MetaState JointStateSpace::decode(std::size_t index) const {
  MetaState xi;
  xi.last_obs.resize(num_arms());
  xi.elapsed.resize(num_arms());
  for (int k = 0; k < num_arms(); ++k) {
    const std::size_t digit = index % radix_[k];
    index /= radix_[k];
    xi.last_obs[k] = static_cast<State>(digit / static_cast<std::size_t>(n_cap_));
    xi.elapsed[k] = static_cast<std::int64_t>(digit % static_cast<std::size_t>(n_cap_)) + 1;
  }
  return xi;
}

std::vector<Action> enumerate_actions(int num_arms, int num_active) {
  if (num_active < 1 || num_active > num_arms) throw ContractViolation("need 1 <= N <= K");
  std::vector<Action> out;
  std::vector<int> pick(num_active);
  for (int i = 0; i < num_active; ++i) pick[i] = i;
  while (true) {
    out.push_back(Action::from_arms(num_arms, pick));
    int i = num_active - 1;
    while (i >= 0 && pick[i] == num_arms - num_active + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < num_active; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

JointTransitions build_joint_transitions(const SystemParams& theta, const JointStateSpace& space,
                                         const std::vector<Action>& actions) {
  JointTransitions jt;
  jt.actions = actions;
  const std::size_t A = actions.size();
  jt.offsets.reserve(space.size() * A + 1);
  jt.reward.reserve(space.size() * A);
  jt.offsets.push_back(0);
  const int K = space.num_arms();
  for (std::size_t x = 0; x < space.size(); ++x) {
    const MetaState xi = space.decode(x);
    for (const auto& a : actions) {
      jt.reward.push_back(expected_reward(theta, xi, a));
      MetaState next = xi;
      for (int k = 0; k < K; ++k)
        if (!a.active[k]) next.elapsed[k] = std::min(next.elapsed[k] + 1, space.n_cap());
      const auto arms = a.active_arms();
      // Enumerate joint observations of the active arms.
      auto recurse = [&](auto&& self, std::size_t depth, double prob) -> void {
        if (prob == 0.0) return;
        if (depth == arms.size()) {
          jt.edges.push_back({static_cast<std::uint32_t>(space.encode(next)), prob});
          return;
        }
        const int k = arms[depth];
        const auto row = theta[k].predictive(xi.last_obs[k], xi.elapsed[k]);
        for (std::size_t s = 0; s < row.size(); ++s) {
          next.last_obs[k] = static_cast<State>(s);
          next.elapsed[k] = 1;
          self(self, depth + 1, prob * row[s]);
        }
      };
      recurse(recurse, 0, 1.0);
      jt.offsets.push_back(jt.edges.size());
    }
  }
  return jt;
}

TabularPolicy::TabularPolicy(std::shared_ptr<const JointStateSpace> space, std::vector<Action> actions,
                             std::vector<std::uint32_t> choice, int num_active)
    : space_(std::move(space)), actions_(std::move(actions)), choice_(std::move(choice)),
      num_active_(num_active) {}

void TabularPolicy::act(const MetaState& xi, Action& out) const {
  out = actions_[choice_[space_->encode(xi)]];
}

OracleResult oracle_vi_policy(const SystemParams& theta, int num_active, std::int64_t n_cap, double tol,
                              std::size_t budget, std::size_t max_iterations) {
  validate_system(theta);
  if (theta.size() > 3) throw ContractViolation("oracle value iteration supports at most 3 arms");
  auto space = std::make_shared<const JointStateSpace>(theta, n_cap, budget);
  const auto actions = enumerate_actions(static_cast<int>(theta.size()), num_active);
  const auto jt = build_joint_transitions(theta, *space, actions);
  const std::size_t X = space->size();
  const std::size_t A = actions.size();

  std::vector<double> h(X, 0.0), Th(X, 0.0);
  std::vector<std::uint32_t> choice(X, 0);
  constexpr double kDamping = 0.5;  // aperiodicity transform
  double span = std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 0.0;
  std::size_t it = 0;
  for (; it < max_iterations; ++it) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (std::size_t x = 0; x < X; ++x) {
      double best = -std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t row = x * A + a;
        double q = jt.reward[row];
        for (std::size_t e = jt.offsets[row]; e < jt.offsets[row + 1]; ++e) q += jt.edges[e].prob * h[jt.edges[e].next];
        if (q > best + 1e-12) {
          best = q;
          arg = static_cast<std::uint32_t>(a);
        }
      }
      Th[x] = best;
      choice[x] = arg;
      const double d = best - h[x];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    span = hi - lo;
    if (span < tol) break;
    for (std::size_t x = 0; x < X; ++x) h[x] += kDamping * (Th[x] - h[x]);
    const double ref = h[0];
    for (auto& v : h) v -= ref;
  }
  if (span >= tol) throw ConvergenceError("oracle value iteration did not converge", span);

  OracleResult out;
  out.gain = 0.5 * (lo + hi);
  out.span_residual = span;
  out.iterations = it;
  out.policy = std::make_shared<const TabularPolicy>(space, actions, std::move(choice), num_active);
  return out;
}

}  // namespace tsde
