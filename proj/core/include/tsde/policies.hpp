#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "tsde/environment.hpp"
#include "tsde/markov.hpp"

namespace tsde {

enum class PolicyMappingId { kBestFixed, kMyopic, kWhittle, kOracleVi };

std::string_view to_string(PolicyMappingId id);
PolicyMappingId parse_mapping(std::string_view name);

// Stationary expected reward under the passive chain; ignores (sigma, n).
double best_fixed_index(const ArmModel& arm);

// Expected immediate reward of pulling the arm at belief point (sigma, n).
double myopic_index(const ArmModel& arm, State sigma, std::int64_t n);

// ---------------------------------------------------------------------------
// Single-arm subsidy problem.
//
// Belief points are (sigma, n) with n in 1..n_cap; passive moves n -> n + 1
// (clamped at n_cap) and earns the subsidy, active earns the predictive reward
// and jumps to (observed, 1). Any stationary policy is described, from each
// freshly observed state s, by the first n at which it pulls, so the average
// reward problem reduces to a semi-Markov problem on S with "wait tau steps"
// options. That problem is solved exactly by policy iteration; relative
// values of every belief point are recovered by a backward pass over n.

struct SubsidySolution {
  double subsidy = 0.0;
  double gain = 0.0;
  bool passive_forever = false;          // subsidy >= best pulling gain
  std::vector<double> relative_value;    // per freshly observed state
  std::vector<double> gap;               // Q_active - Q_passive, index sigma * n_cap + (n - 1)
  std::int64_t n_cap = 0;

  double gap_at(State sigma, std::int64_t n) const {
    return gap[static_cast<std::size_t>(sigma * n_cap + (std::min(n, n_cap) - 1))];
  }
};

struct SubsidySolverOptions {
  int max_policy_iterations = 1000;
  int max_value_iterations = 2'000'000;
  double value_tolerance = 1e-13;
};

SubsidySolution solve_subsidy_problem(const ArmModel& arm, double subsidy, std::int64_t n_cap,
                                      const SubsidySolverOptions& options = {});

// Subsidy in [0,1] that makes pulling and resting indifferent at (sigma, n),
// found by bisection to width <= tol. Throws IndexabilityError if the active
// set is not monotone in the subsidy across the probed values.
double whittle_index(const ArmModel& arm, State sigma, std::int64_t n, std::int64_t n_cap, double tol);

// Indices for every belief point at once; one subsidy solve refines every
// point whose bracket contains that subsidy.
std::vector<double> whittle_index_table(const ArmModel& arm, std::int64_t n_cap, double tol);

// ---------------------------------------------------------------------------

class ArmIndex {
 public:
  virtual ~ArmIndex() = default;
  virtual double value(State sigma, std::int64_t n) const = 0;
};

class ConstantIndex final : public ArmIndex {
 public:
  explicit ConstantIndex(double v) : v_(v) {}
  double value(State, std::int64_t) const override { return v_; }

 private:
  double v_;
};

class MyopicIndex final : public ArmIndex {
 public:
  explicit MyopicIndex(ArmModel arm) : arm_(std::move(arm)) {}
  double value(State sigma, std::int64_t n) const override { return arm_.predictive_reward(sigma, n); }

 private:
  ArmModel arm_;
};

// Values for n in 1..n_cap; larger n reads the n_cap entry.
class TabulatedIndex final : public ArmIndex {
 public:
  TabulatedIndex(int num_states, std::int64_t n_cap, std::vector<double> values);
  double value(State sigma, std::int64_t n) const override {
    return values_[static_cast<std::size_t>(sigma * n_cap_ + (std::min(n, n_cap_) - 1))];
  }
  std::int64_t n_cap() const { return n_cap_; }

 private:
  int num_states_;
  std::int64_t n_cap_;
  std::vector<double> values_;
};

// Activate the num_active largest entries; ties go to the lowest arm id.
Action select_action(std::span<const double> indices, int num_active);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual int num_active() const = 0;
  virtual void act(const MetaState& xi, Action& out) const = 0;
  Action act(const MetaState& xi) const {
    Action a;
    act(xi, a);
    return a;
  }
};

class IndexPolicy final : public Policy {
 public:
  IndexPolicy(std::vector<std::shared_ptr<const ArmIndex>> arms, int num_active);

  int num_active() const override { return num_active_; }
  void act(const MetaState& xi, Action& out) const override;
  std::vector<double> indices(const MetaState& xi) const;

 private:
  std::vector<std::shared_ptr<const ArmIndex>> arms_;
  int num_active_;
};

struct MapperOptions {
  std::int64_t n_cap = 64;        // belief truncation for Whittle / oracle
  double whittle_tol = 1e-6;
  double oracle_tol = 1e-9;
  std::size_t oracle_budget = 100'000;
};

// mu: SystemParams -> Policy. Per-arm index objects are memoized by the arm's
// parameters; concurrent callers may race to fill an entry, which is harmless
// because the computation is deterministic.
class PolicyMapper {
 public:
  PolicyMapper(PolicyMappingId id, MapperOptions options);

  PolicyMappingId id() const { return id_; }
  const MapperOptions& options() const { return options_; }

  std::shared_ptr<const Policy> map(const SystemParams& theta, int num_active) const;
  std::shared_ptr<const ArmIndex> arm_index(const ArmModel& arm) const;

 private:
  PolicyMappingId id_;
  MapperOptions options_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<double>, std::shared_ptr<const ArmIndex>> memo_;
};

}  // namespace tsde
