#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "tsde/environment.hpp"
#include "tsde/markov.hpp"
#include "tsde/policies.hpp"

namespace tsde {

// Enumeration of the truncated joint meta-state space: per arm (sigma, n) with
// n clamped to n_cap, flattened in mixed radix with arm 0 fastest.
class JointStateSpace {
 public:
  JointStateSpace(const SystemParams& theta, std::int64_t n_cap, std::size_t budget);

  std::size_t size() const { return size_; }
  std::int64_t n_cap() const { return n_cap_; }
  int num_arms() const { return static_cast<int>(radix_.size()); }

  std::size_t encode(const MetaState& xi) const;
  MetaState decode(std::size_t index) const;

 private:
  std::int64_t n_cap_;
  std::vector<std::size_t> radix_;  // |S_k| * n_cap
  std::vector<int> num_states_;
  std::size_t size_ = 1;
};

// Sparse transition model of the truncated meta-state chain for a fixed list
// of candidate actions: successors of (state, action) with probabilities and
// the expected reward of the action.
struct JointTransitions {
  struct Edge {
    std::uint32_t next;
    double prob;
  };
  std::vector<Action> actions;
  std::vector<std::size_t> offsets;  // (state * actions + a) -> range in edges
  std::vector<Edge> edges;
  std::vector<double> reward;        // state * actions + a

  std::size_t num_actions() const { return actions.size(); }
};

// All size-N subsets in lexicographic order of arm ids.
std::vector<Action> enumerate_actions(int num_arms, int num_active);

JointTransitions build_joint_transitions(const SystemParams& theta, const JointStateSpace& space,
                                         const std::vector<Action>& actions);

// Greedy table over the joint truncated meta-state space; states outside the
// table are clamped to n_cap.
class TabularPolicy final : public Policy {
 public:
  TabularPolicy(std::shared_ptr<const JointStateSpace> space, std::vector<Action> actions,
                std::vector<std::uint32_t> choice, int num_active);

  int num_active() const override { return num_active_; }
  void act(const MetaState& xi, Action& out) const override;

 private:
  std::shared_ptr<const JointStateSpace> space_;
  std::vector<Action> actions_;
  std::vector<std::uint32_t> choice_;
  int num_active_;
};

struct OracleResult {
  std::shared_ptr<const TabularPolicy> policy;
  double gain = 0.0;
  double span_residual = 0.0;
  std::size_t iterations = 0;
};

// Relative value iteration on the truncated joint meta-state MDP. Ground truth
// for small instances only.
OracleResult oracle_vi_policy(const SystemParams& theta, int num_active, std::int64_t n_cap, double tol,
                              std::size_t budget = 100'000, std::size_t max_iterations = 5'000'000);

}  // namespace tsde
