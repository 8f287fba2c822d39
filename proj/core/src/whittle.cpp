#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "tsde/errors.hpp"
#include "tsde/policies.hpp"

namespace tsde {
namespace {

// Predictive rewards and rows for every belief point (sigma, n <= n_cap).
struct BeliefGrid {
  int num_states;
  std::int64_t n_cap;
  std::vector<double> reward;  // [sigma * n_cap + n - 1]
  std::vector<double> row;     // [(sigma * n_cap + n - 1) * S + s']

  BeliefGrid(const ArmModel& arm, std::int64_t cap) : num_states(arm.num_states()), n_cap(cap) {
    if (cap < 1) throw ContractViolation("n_cap must be >= 1");
    const std::size_t points = static_cast<std::size_t>(num_states * cap);
    reward.resize(points);
    row.resize(points * num_states);
    for (State s = 0; s < num_states; ++s) {
      for (std::int64_t n = 1; n <= cap; ++n) {
        const auto p = arm.predictive(s, n);
        const std::size_t x = point(s, n);
        reward[x] = arm.predictive_reward(s, n);
        std::copy(p.begin(), p.end(), row.begin() + static_cast<std::ptrdiff_t>(x * num_states));
      }
    }
  }

  std::size_t point(State s, std::int64_t n) const {
    return static_cast<std::size_t>(s * n_cap + (n - 1));
  }

  double continuation(std::size_t x, const std::vector<double>& h) const {
    double v = 0.0;
    const double* q = row.data() + x * num_states;
    for (int s = 0; s < num_states; ++s) v += q[s] * h[s];
    return v;
  }
};

struct SweepResult {
  std::vector<double> best;       // W(s, 1) per state
  std::vector<std::int64_t> arg;  // maximizing pull time
  std::vector<double> gap;        // per belief point
};

// Backward pass over n for fixed (subsidy, gain, h). `wait_at_cap_allowed`
// adds the never-pull option, which has zero relative value when the gain
// equals the subsidy.
SweepResult sweep(const BeliefGrid& grid, double subsidy, double gain, const std::vector<double>& h,
                  bool never_pull_option) {
  const int S = grid.num_states;
  const std::int64_t cap = grid.n_cap;
  SweepResult out;
  out.best.resize(S);
  out.arg.resize(S);
  out.gap.resize(static_cast<std::size_t>(S * cap));
  const double wait = subsidy - gain;
  std::vector<double> W(static_cast<std::size_t>(cap + 1));
  std::vector<std::int64_t> W_arg(static_cast<std::size_t>(cap + 1));
  for (State s = 0; s < S; ++s) {
    // act(n): pull now at belief point (s, n).
    auto act = [&](std::int64_t n) {
      const std::size_t x = grid.point(s, n);
      return grid.reward[x] - gain + grid.continuation(x, h);
    };
    const double act_cap = act(cap);
    W[cap] = act_cap;
    W_arg[cap] = cap;
    if (never_pull_option && 0.0 > act_cap) {
      W[cap] = 0.0;
      W_arg[cap] = std::numeric_limits<std::int64_t>::max();
    }
    out.gap[grid.point(s, cap)] = act_cap - (wait + W[cap]);
    for (std::int64_t n = cap - 1; n >= 1; --n) {
      const double a = act(n);
      const double p = wait + W[n + 1];
      out.gap[grid.point(s, n)] = a - p;
      if (a >= p) {
        W[n] = a;
        W_arg[n] = n;
      } else {
        W[n] = p;
        W_arg[n] = W_arg[n + 1];
      }
    }
    out.best[s] = W[1];
    out.arg[s] = W_arg[1];
  }
  return out;
}

}  // namespace

SubsidySolution solve_subsidy_problem(const ArmModel& arm, double subsidy, std::int64_t n_cap,
                                      const SubsidySolverOptions& options) {
  const BeliefGrid grid(arm, n_cap);
  const int S = grid.num_states;

  // Policy iteration over pull times tau_s in 1..n_cap.
  std::vector<std::int64_t> tau(S, 1);
  std::vector<double> h(S, 0.0);
  double gain = 0.0;
  bool stable = false;
  for (int it = 0; it < options.max_policy_iterations; ++it) {
    // h(s) - sum_s' q(s'|s,tau) h(s') + g tau_s = subsidy (tau_s - 1) + r(s, tau_s), h(0) = 0.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(S + 1, S + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(S + 1);
    for (State s = 0; s < S; ++s) {
      const std::size_t x = grid.point(s, tau[s]);
      A(s, s) += 1.0;
      for (int j = 0; j < S; ++j) A(s, j) -= grid.row[x * S + j];
      A(s, S) = static_cast<double>(tau[s]);
      b(s) = subsidy * static_cast<double>(tau[s] - 1) + grid.reward[x];
    }
    A(S, 0) = 1.0;
    const auto lu = A.fullPivLu();
    if (lu.rank() < S + 1) {
      throw ConvergenceError("subsidy policy evaluation is singular (multichain arm)", 0.0);
    }
    const Eigen::VectorXd sol = lu.solve(b);
    for (State s = 0; s < S; ++s) h[s] = sol(s);
    gain = sol(S);

    const auto sw = sweep(grid, subsidy, gain, h, false);
    bool changed = false;
    for (State s = 0; s < S; ++s) {
      const std::size_t x = grid.point(s, tau[s]);
      const double current = subsidy * static_cast<double>(tau[s] - 1) - gain * static_cast<double>(tau[s]) +
                             grid.reward[x] + grid.continuation(x, h);
      if (sw.best[s] > current + 1e-12 && sw.arg[s] != tau[s]) {
        tau[s] = sw.arg[s];
        changed = true;
      }
    }
    if (!changed) {
      stable = true;
      break;
    }
  }
  if (!stable) throw ConvergenceError("subsidy policy iteration did not stabilize", 0.0);

  SubsidySolution out;
  out.subsidy = subsidy;
  out.n_cap = n_cap;
  if (subsidy < gain) {
    out.gain = gain;
    out.relative_value = h;
    out.gap = sweep(grid, subsidy, gain, h, false).gap;
    return out;
  }

  // Resting forever is optimal; relative values solve
  // h(s) = max(0, max_tau [r(s,tau) - subsidy + sum q h]).
  out.gain = subsidy;
  out.passive_forever = true;
  std::fill(h.begin(), h.end(), 0.0);
  double change = 0.0;
  for (int it = 0; it < options.max_value_iterations; ++it) {
    const auto sw = sweep(grid, subsidy, subsidy, h, true);
    change = 0.0;
    for (State s = 0; s < S; ++s) change = std::max(change, std::abs(sw.best[s] - h[s]));
    h = sw.best;
    if (change <= options.value_tolerance) {
      out.relative_value = h;
      out.gap = sweep(grid, subsidy, subsidy, h, true).gap;
      return out;
    }
  }
  throw ConvergenceError("relative value iteration at full subsidy did not converge", change);
}

namespace {

constexpr double kGapZero = 1e-12;

// Bisection state shared across belief points. Every solve narrows all
// brackets that straddle the solved subsidy.
class IndexSearch {
 public:
  IndexSearch(const ArmModel& arm, std::int64_t n_cap, double tol)
      : arm_(arm), n_cap_(n_cap), tol_(tol) {
    if (!(tol > 0.0)) throw ContractViolation("bisection tolerance must be positive");
    const std::size_t points = static_cast<std::size_t>(arm.num_states() * n_cap);
    lo_.assign(points, 0.0);
    hi_.assign(points, 1.0);
  }

  double resolve(std::size_t x) {
    while (hi_[x] - lo_[x] > tol_) apply(solve(0.5 * (lo_[x] + hi_[x])));
    return 0.5 * (lo_[x] + hi_[x]);
  }

 private:
  const std::vector<double>& solve(double subsidy) {
    last_ = subsidy;
    if (auto it = solved_.find(subsidy); it != solved_.end()) return it->second;
    auto sol = solve_subsidy_problem(arm_, subsidy, n_cap_);
    auto [it, _] = solved_.emplace(subsidy, std::move(sol.gap));
    check_monotone(it);
    return it->second;
  }

  void apply(const std::vector<double>& gap) {
    for (std::size_t x = 0; x < gap.size(); ++x) {
      if (last_ <= lo_[x] || last_ >= hi_[x]) continue;
      if (gap[x] > kGapZero) {
        lo_[x] = last_;
      } else if (gap[x] < -kGapZero) {
        hi_[x] = last_;
      } else {
        lo_[x] = hi_[x] = last_;
      }
    }
  }

  // Active at a larger subsidy but passive at a smaller one contradicts
  // indexability.
  void check_monotone(std::map<double, std::vector<double>>::iterator it) {
    auto compare = [&](const std::vector<double>& lower, const std::vector<double>& upper, double lam_lo,
                       double lam_hi) {
      for (std::size_t x = 0; x < lower.size(); ++x) {
        if (upper[x] > 1e-9 && lower[x] < -1e-9) {
          throw IndexabilityError("active set grows with the subsidy between " + std::to_string(lam_lo) +
                                  " and " + std::to_string(lam_hi) + " at belief point " + std::to_string(x));
        }
      }
    };
    if (it != solved_.begin()) {
      auto prev = std::prev(it);
      compare(prev->second, it->second, prev->first, it->first);
    }
    if (auto next = std::next(it); next != solved_.end()) compare(it->second, next->second, it->first, next->first);
  }

  const ArmModel& arm_;
  std::int64_t n_cap_;
  double tol_;
  std::vector<double> lo_, hi_;
  std::map<double, std::vector<double>> solved_;
  double last_ = 0.0;
};

}  // namespace

double whittle_index(const ArmModel& arm, State sigma, std::int64_t n, std::int64_t n_cap, double tol) {
  if (sigma < 0 || sigma >= arm.num_states()) throw ContractViolation("state out of range");
  if (n < 1) throw ContractViolation("elapsed time must be >= 1");
  IndexSearch search(arm, n_cap, tol);
  return search.resolve(static_cast<std::size_t>(sigma * n_cap + (std::min(n, n_cap) - 1)));
}

std::vector<double> whittle_index_table(const ArmModel& arm, std::int64_t n_cap, double tol) {
  IndexSearch search(arm, n_cap, tol);
  std::vector<double> values(static_cast<std::size_t>(arm.num_states() * n_cap));
  for (std::size_t x = 0; x < values.size(); ++x) values[x] = search.resolve(x);
  return values;
}

}  // namespace tsde
