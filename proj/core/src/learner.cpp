#include "tsde/learner.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "tsde/errors.hpp"

namespace tsde {

ParamGrid::ParamGrid(std::vector<std::vector<ArmModel>> candidates) : candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw ContractViolation("parameter grid needs at least one arm");
  for (std::size_t k = 0; k < candidates_.size(); ++k) {
    if (candidates_[k].empty()) throw ContractViolation("arm " + std::to_string(k) + " has no candidates");
    const int S = candidates_[k].front().num_states();
    for (const auto& c : candidates_[k]) {
      if (c.num_states() != S) throw ContractViolation("candidates of one arm must share a state count");
      if (!validate_chain(c.passive())) {
        throw ReducibleChainError("grid candidate for arm " + std::to_string(k) + " has a reducible passive chain");
      }
    }
  }
}

ParamGrid ParamGrid::uniform_gilbert_elliott(int num_arms, double lo, double hi, double step) {
  if (num_arms < 1) throw ContractViolation("need at least one arm");
  if (!(step > 0.0) || lo > hi) throw ContractViolation("invalid grid bounds");
  std::vector<double> values;
  const auto count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) values.push_back(std::round((lo + i * step) * 1e12) / 1e12);
  std::vector<ArmModel> per_arm;
  for (double p01 : values)
    for (double p11 : values) per_arm.push_back(GilbertElliott{p01, p11}.arm());
  return ParamGrid(std::vector<std::vector<ArmModel>>(num_arms, per_arm));
}

std::optional<std::size_t> ParamGrid::find(int arm, const ArmModel& model) const {
  const auto& c = candidates_[arm];
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] == model) return i;
  return std::nullopt;
}

SystemParams ParamGrid::assemble(const std::vector<std::size_t>& choice) const {
  if (choice.size() != candidates_.size()) throw ContractViolation("choice has wrong arm count");
  SystemParams theta;
  theta.reserve(choice.size());
  for (std::size_t k = 0; k < choice.size(); ++k) theta.push_back(candidates_[k].at(choice[k]));
  return theta;
}

std::vector<int> ParamGrid::state_counts() const {
  std::vector<int> out;
  for (const auto& c : candidates_) out.push_back(c.front().num_states());
  return out;
}

int ParamGrid::total_states() const {
  const auto s = state_counts();
  return std::accumulate(s.begin(), s.end(), 0);
}

Posterior::Posterior(std::vector<std::vector<double>> weights) : weights_(std::move(weights)) {
  for (const auto& w : weights_) {
    double sum = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) throw ContractViolation("posterior weights must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ContractViolation("posterior weights must sum to one");
  }
}

Posterior Posterior::uniform(const ParamGrid& grid) {
  std::vector<std::vector<double>> w;
  for (int k = 0; k < grid.num_arms(); ++k) {
    const auto n = grid.size(k);
    w.emplace_back(n, 1.0 / static_cast<double>(n));
  }
  return Posterior(std::move(w));
}

Posterior Posterior::point_mass(const ParamGrid& grid, const std::vector<std::size_t>& atom) {
  if (atom.size() != static_cast<std::size_t>(grid.num_arms())) throw ContractViolation("atom has wrong arm count");
  std::vector<std::vector<double>> w;
  for (int k = 0; k < grid.num_arms(); ++k) {
    w.emplace_back(grid.size(k), 0.0);
    w.back().at(atom[k]) = 1.0;
  }
  return Posterior(std::move(w));
}

void Posterior::update(const ParamGrid& grid, int k, State sigma, std::int64_t n, State observed) {
  if (k < 0 || k >= num_arms()) throw ContractViolation("arm out of range");
  auto& w = weights_[k];
  thread_local std::vector<double> next;
  next.resize(w.size());
  double total = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    next[c] = w[c] == 0.0 ? 0.0 : w[c] * grid.candidate(k, c).predictive(sigma, n)[observed];
    total += next[c];
  }
  if (!(total > 0.0)) {
    throw MisspecificationError("observation of arm " + std::to_string(k) + " has zero likelihood under every candidate");
  }
  for (std::size_t c = 0; c < w.size(); ++c) w[c] = next[c] / total;
}

Posterior posterior_update(const Posterior& post, const ParamGrid& grid, int k, State sigma, std::int64_t n,
                           State observed) {
  Posterior out = post;
  out.update(grid, k, sigma, n, observed);
  return out;
}

SampledParams sample_params(const Posterior& post, const ParamGrid& grid, Rng& rng) {
  if (post.num_arms() != grid.num_arms()) throw ContractViolation("posterior and grid disagree on arm count");
  SampledParams out;
  out.candidate.resize(grid.num_arms());
  for (int k = 0; k < grid.num_arms(); ++k) out.candidate[k] = rng.categorical(post.arm(k));
  out.theta = grid.assemble(out.candidate);
  return out;
}

CounterTable::CounterTable(std::vector<int> num_states, std::int64_t tmix)
    : num_states_(std::move(num_states)), tmix_(tmix) {
  if (tmix_ < 1) throw ContractViolation("tmix must be >= 1");
  std::size_t z = 0, o = 0;
  for (int S : num_states_) {
    zeta_offset_.push_back(z);
    outcome_offset_.push_back(o);
    z += static_cast<std::size_t>(S * tmix_);
    o += static_cast<std::size_t>(S * S * tmix_);
  }
  counts_.assign(z, 0);
  outcomes_.assign(o, 0);
}

std::size_t CounterTable::zeta(int k, State sigma, std::int64_t n) const {
  if (k < 0 || k >= num_arms()) throw ContractViolation("arm out of range");
  if (sigma < 0 || sigma >= num_states_[k]) throw ContractViolation("state out of range");
  if (n < 1) throw ContractViolation("elapsed time must be >= 1");
  return zeta_offset_[k] + static_cast<std::size_t>(sigma * tmix_ + (bucket(n) - 1));
}

std::size_t CounterTable::outcome_offset(int k, State sigma, std::int64_t n) const {
  const std::size_t local = zeta(k, sigma, n) - zeta_offset_[k];
  return outcome_offset_[k] + local * static_cast<std::size_t>(num_states_[k]);
}

void CounterTable::record(int k, State sigma, std::int64_t n, std::optional<State> observed) {
  const std::size_t z = zeta(k, sigma, n);
  if (observed) {
    if (*observed < 0 || *observed >= num_states_[k]) throw ContractViolation("observed state out of range");
    ++outcomes_[outcome_offset(k, sigma, n) + static_cast<std::size_t>(*observed)];
  }
  ++counts_[z];
  ++total_;
}

std::span<const std::int64_t> CounterTable::outcomes(int k, State sigma, std::int64_t n) const {
  return {outcomes_.data() + outcome_offset(k, sigma, n), static_cast<std::size_t>(num_states_[k])};
}

std::size_t CounterTable::distinct_visited() const {
  std::size_t c = 0;
  for (auto v : counts_) c += v > 0 ? 1 : 0;
  return c;
}

CounterTable record_visit(const CounterTable& counters, int k, State sigma, std::int64_t n) {
  CounterTable out = counters;
  out.record(k, sigma, n);
  return out;
}

bool should_terminate(std::int64_t t, const EpisodeState& ep, const CounterTable& counters) {
  if (t > ep.start + ep.prev_length) return true;
  const auto& now = counters.counts();
  if (ep.snapshot.size() != now.size()) throw ContractViolation("counter snapshot has wrong size");
  for (std::size_t z = 0; z < now.size(); ++z)
    if (now[z] > 2 * ep.snapshot[z]) return true;
  return false;
}

double episode_count_bound(int total_states, std::int64_t tmix, std::int64_t horizon, int num_active) {
  const double T = static_cast<double>(horizon);
  return 2.0 * std::sqrt(static_cast<double>(total_states) * static_cast<double>(tmix) * T *
                         std::log(static_cast<double>(num_active) * T));
}

RunRecord run_tsde(const TsdeConfig& config, const PolicyMapper& mapper) {
  const auto& grid = config.grid;
  const int K = grid.num_arms();
  if (static_cast<int>(config.theta_star.size()) != K) throw ContractViolation("theta* has wrong arm count");
  if (config.prior.num_arms() != K) throw ContractViolation("prior has wrong arm count");
  const std::int64_t T = config.horizon;
  const std::int64_t tmix = horizon_mixing_time(config.tmix_quarter, T);

  RunRecord rec;
  rec.horizon = T;
  rec.num_active = config.num_active;
  rec.tmix = tmix;
  rec.state_counts = grid.state_counts();
  for (int k = 0; k < K; ++k) rec.true_candidate.push_back(grid.find(k, config.theta_star[k]));
  rec.realized_reward.reserve(static_cast<std::size_t>(T));
  rec.expected_reward.reserve(static_cast<std::size_t>(T));
  rec.episode_of_time.reserve(static_cast<std::size_t>(T));
  rec.pulls.reserve(static_cast<std::size_t>(T * config.num_active));

  Environment env(config.theta_star, config.init, config.num_active);
  Rng env_rng(derive_seed(config.seed, kEnvironmentStream));
  Rng sample_rng(derive_seed(config.seed, kSamplingStream));
  Posterior post = config.prior;
  CounterTable counters(rec.state_counts, tmix);

  auto snapshot = [&](std::int64_t time) {
    rec.snapshots.push_back({time, {}});
    for (int k = 0; k < K; ++k) rec.snapshots.back().weights.push_back(post.arm(k));
  };

  try {
    snapshot(0);
    std::int64_t t = 1;
    std::int64_t prev_start = 1;  // t_0
    Action action;
    StepOutcome outcome;
    MetaState before;
    for (int i = 1; t <= T; ++i) {
      EpisodeState ep;
      ep.index = i;
      ep.start = t;
      ep.prev_length = t - prev_start;
      ep.snapshot = counters.counts();
      prev_start = t;

      auto sampled = sample_params(post, grid, sample_rng);
      const auto policy = mapper.map(sampled.theta, config.num_active);
      EpisodeRecord er{i, ep.start, ep.prev_length, sampled.candidate, {}, {}};
      if (config.keep_counter_snapshots) {
        er.counts_at_start = counters.counts();
        er.outcomes_at_start = counters.outcome_counts();
      }
      rec.episodes.push_back(std::move(er));

      while (t <= T && !should_terminate(t, ep, counters)) {
        before = env.meta();
        policy->act(before, action);
        rec.expected_reward.push_back(env.expected_reward(action));
        env.step_into(action, env_rng, outcome);
        rec.realized_reward.push_back(outcome.reward);
        rec.episode_of_time.push_back(i);
        for (const auto& o : outcome.observations) {
          const State sigma = before.last_obs[o.arm];
          const std::int64_t n = before.elapsed[o.arm];
          rec.pulls.push_back({t, o.arm, sigma, n, o.state});
          counters.record(o.arm, sigma, n, o.state);
          post.update(grid, o.arm, sigma, n, o.state);
        }
        if (config.snapshot_every > 0 && (t % config.snapshot_every == 0 || t == T)) snapshot(t);
        ++t;
      }
    }
  } catch (const std::exception& e) {
    rec.valid = false;
    rec.error = e.what();
  }
  rec.counter_total = counters.total();
  rec.distinct_zeta = counters.distinct_visited();
  return rec;
}

}  // namespace tsde
