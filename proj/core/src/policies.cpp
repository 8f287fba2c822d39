#include "tsde/policies.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tsde/errors.hpp"
#include "tsde/oracle.hpp"

namespace tsde {

std::string_view to_string(PolicyMappingId id) {
  switch (id) {
    case PolicyMappingId::kBestFixed: return "best-fixed";
    case PolicyMappingId::kMyopic: return "myopic";
    case PolicyMappingId::kWhittle: return "whittle";
    case PolicyMappingId::kOracleVi: return "oracle-vi";
  }
  return "unknown";
}

PolicyMappingId parse_mapping(std::string_view name) {
  if (name == "best-fixed" || name == "fixed") return PolicyMappingId::kBestFixed;
  if (name == "myopic") return PolicyMappingId::kMyopic;
  if (name == "whittle") return PolicyMappingId::kWhittle;
  if (name == "oracle-vi" || name == "oracle") return PolicyMappingId::kOracleVi;
  throw ContractViolation("unknown policy mapping '" + std::string(name) + "'");
}

double best_fixed_index(const ArmModel& arm) {
  const auto p = stationary_distribution(arm.passive());
  double v = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) v += arm.rewards()[s] * p[s];
  return v;
}

double myopic_index(const ArmModel& arm, State sigma, std::int64_t n) {
  return arm.predictive_reward(sigma, n);
}

TabulatedIndex::TabulatedIndex(int num_states, std::int64_t n_cap, std::vector<double> values)
    : num_states_(num_states), n_cap_(n_cap), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(num_states_ * n_cap_)) {
    throw ContractViolation("index table has wrong size");
  }
}

Action select_action(std::span<const double> indices, int num_active) {
  const int K = static_cast<int>(indices.size());
  if (num_active < 0 || num_active > K) throw ContractViolation("cannot activate more arms than exist");
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + num_active, order.end(), [&](int a, int b) {
    if (indices[a] != indices[b]) return indices[a] > indices[b];
    return a < b;
  });
  Action out{std::vector<std::uint8_t>(K, 0)};
  for (int i = 0; i < num_active; ++i) out.active[order[i]] = 1;
  return out;
}

IndexPolicy::IndexPolicy(std::vector<std::shared_ptr<const ArmIndex>> arms, int num_active)
    : arms_(std::move(arms)), num_active_(num_active) {
  if (num_active_ < 1 || num_active_ > static_cast<int>(arms_.size())) {
    throw ContractViolation("number of active arms must lie in [1, K]");
  }
}

std::vector<double> IndexPolicy::indices(const MetaState& xi) const {
  if (xi.num_arms() != static_cast<int>(arms_.size())) throw ContractViolation("meta-state has wrong arm count");
  std::vector<double> out(arms_.size());
  for (std::size_t k = 0; k < arms_.size(); ++k) out[k] = arms_[k]->value(xi.last_obs[k], xi.elapsed[k]);
  return out;
}

void IndexPolicy::act(const MetaState& xi, Action& out) const {
  const int K = static_cast<int>(arms_.size());
  if (xi.num_arms() != K) throw ContractViolation("meta-state has wrong arm count");
  thread_local std::vector<double> idx;
  idx.resize(K);
  for (int k = 0; k < K; ++k) idx[k] = arms_[k]->value(xi.last_obs[k], xi.elapsed[k]);
  out.active.assign(K, 0);
  // N selection passes; strict > keeps the lowest id among ties.
  for (int i = 0; i < num_active_; ++i) {
    int best = -1;
    for (int k = 0; k < K; ++k) {
      if (!out.active[k] && (best < 0 || idx[k] > idx[best])) best = k;
    }
    out.active[best] = 1;
  }
}

PolicyMapper::PolicyMapper(PolicyMappingId id, MapperOptions options) : id_(id), options_(options) {
  if (options_.n_cap < 1) throw ContractViolation("n_cap must be >= 1");
}

std::shared_ptr<const ArmIndex> PolicyMapper::arm_index(const ArmModel& arm) const {
  auto key = arm.key();
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  std::shared_ptr<const ArmIndex> made;
  switch (id_) {
    case PolicyMappingId::kBestFixed:
      made = std::make_shared<ConstantIndex>(best_fixed_index(arm));
      break;
    case PolicyMappingId::kMyopic:
      made = std::make_shared<MyopicIndex>(arm);
      break;
    case PolicyMappingId::kWhittle:
      made = std::make_shared<TabulatedIndex>(arm.num_states(), options_.n_cap,
                                              whittle_index_table(arm, options_.n_cap, options_.whittle_tol));
      break;
    case PolicyMappingId::kOracleVi:
      throw ContractViolation("oracle-vi is not an index policy");
  }
  std::lock_guard lock(mutex_);
  auto [it, inserted] = memo_.emplace(std::move(key), std::move(made));
  return it->second;
}

std::shared_ptr<const Policy> PolicyMapper::map(const SystemParams& theta, int num_active) const {
  if (id_ == PolicyMappingId::kOracleVi) {
    return oracle_vi_policy(theta, num_active, options_.n_cap, options_.oracle_tol, options_.oracle_budget).policy;
  }
  std::vector<std::shared_ptr<const ArmIndex>> arms;
  arms.reserve(theta.size());
  for (const auto& arm : theta) arms.push_back(arm_index(arm));
  return std::make_shared<const IndexPolicy>(std::move(arms), num_active);
}

}  // namespace tsde
