#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tsde {

using State = int;

// Row-stochastic square matrix. Construction rejects entries outside [0,1] and
// rows whose sum is off by more than kRowSumTolerance.
class TransitionMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  explicit TransitionMatrix(Eigen::MatrixXd entries);
  TransitionMatrix(std::initializer_list<std::initializer_list<double>> rows);

  int size() const { return static_cast<int>(entries_.rows()); }
  double operator()(State from, State to) const { return entries_(from, to); }
  const Eigen::MatrixXd& matrix() const { return entries_; }

  friend bool operator==(const TransitionMatrix& a, const TransitionMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Eigen::MatrixXd entries_;
};

class PredictiveTable;

// One arm: active/passive dynamics plus a known reward per state.
class ArmModel {
 public:
  ArmModel(TransitionMatrix active, TransitionMatrix passive, std::vector<double> rewards);

  int num_states() const { return active_.size(); }
  const TransitionMatrix& active() const { return active_; }
  const TransitionMatrix& passive() const { return passive_; }
  const std::vector<double>& rewards() const { return rewards_; }

  // Cached n-step predictive row (see n_step_distribution). `n` may be any
  // positive value; rows past numerical convergence are shared.
  std::span<const double> predictive(State s, std::int64_t n) const;

  // Expected reward of observing the arm n steps after it was seen in s.
  double predictive_reward(State s, std::int64_t n) const;

  // Flat key of all parameters; equal keys mean equal models.
  std::vector<double> key() const;

  friend bool operator==(const ArmModel& a, const ArmModel& b) {
    return a.active_ == b.active_ && a.passive_ == b.passive_ && a.rewards_ == b.rewards_;
  }

 private:
  TransitionMatrix active_;
  TransitionMatrix passive_;
  std::vector<double> rewards_;
  std::shared_ptr<const PredictiveTable> predictive_;
};

// Two-state channel: state 0 = bad, 1 = good. p01 = P(bad -> good),
// p11 = P(good -> good).
struct GilbertElliott {
  double p01;
  double p11;

  TransitionMatrix matrix() const;
  // Same matrix for active and passive, reward r(s) = s.
  ArmModel arm() const;
};

using SystemParams = std::vector<ArmModel>;

void validate_system(const SystemParams& theta);

// True iff the chain is irreducible and aperiodic. Throws MalformedMatrixError
// when the input is not row-stochastic.
bool validate_chain(const Eigen::MatrixXd& P);
inline bool validate_chain(const TransitionMatrix& P) { return validate_chain(P.matrix()); }

// Left fixed point p P = p with sum(p) = 1. Throws ReducibleChainError when the
// chain is not irreducible and aperiodic.
std::vector<double> stationary_distribution(const TransitionMatrix& P);

// Distribution of the arm's state n >= 1 steps after it was observed in s at a
// pull: one active transition, then n - 1 passive transitions. Computed by
// explicit matrix products; ArmModel::predictive is the cached equivalent.
std::vector<double> n_step_distribution(const ArmModel& arm, State s, std::int64_t n);

// Smallest t >= 1 with max_s || e_s P^t - p ||_1 <= epsilon.
int mixing_time(const TransitionMatrix& P, double epsilon);

// ceil(log2 T) * tmix_quarter.
std::int64_t horizon_mixing_time(std::int64_t tmix_quarter, std::int64_t horizon);

// Largest passive mixing time at 1/4 over every arm in every system given.
int max_quarter_mixing_time(std::span<const ArmModel> arms);

}  // namespace tsde
