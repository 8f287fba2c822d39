#include "tsde/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "tsde/errors.hpp"
#include "tsde/oracle.hpp"

namespace tsde {
namespace {

std::vector<State> best_reward_states(const SystemParams& theta) {
  std::vector<State> init;
  for (const auto& arm : theta) {
    const auto& r = arm.rewards();
    init.push_back(static_cast<State>(std::max_element(r.begin(), r.end()) - r.begin()));
  }
  return init;
}

// Mean and standard error of the mean.
std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::vector<std::int64_t> curve_times(std::int64_t horizon, std::int64_t stride) {
  if (stride < 1) throw ContractViolation("curve stride must be >= 1");
  std::vector<std::int64_t> times;
  for (std::int64_t t = 0; t <= horizon; t += stride) times.push_back(t);
  if (times.back() != horizon) times.push_back(horizon);
  return times;
}

}  // namespace

AverageRewardEstimate estimate_policy_reward(const SystemParams& theta, const Policy& policy,
                                             const AverageRewardOptions& options, std::uint64_t seed) {
  if (options.reps < 1) throw ContractViolation("need at least one replication");
  if (options.burn_in < 0 || options.burn_in >= options.horizon) {
    throw ContractViolation("burn-in must lie in [0, horizon)");
  }
  const auto init = options.init.empty() ? best_reward_states(theta) : options.init;
  std::vector<double> per_rep(options.reps);
  detail::parallel_for(options.reps, options.threads, [&](int r) {
    Environment env(theta, init, policy.num_active());
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Action a;
    StepOutcome outcome;
    double acc = 0.0;
    for (std::int64_t t = 1; t <= options.horizon; ++t) {
      policy.act(env.meta(), a);
      if (t > options.burn_in) acc += env.expected_reward(a);
      env.step_into(a, rng, outcome);
    }
    per_rep[r] = acc / static_cast<double>(options.horizon - options.burn_in);
  });
  const auto [mean, se] = mean_stderr(per_rep);
  return {mean, se, options.reps};
}

AverageRewardEstimate estimate_average_reward(const SystemParams& theta, const PolicyMapper& mapper,
                                              int num_active, const AverageRewardOptions& options,
                                              std::uint64_t seed) {
  validate_system(theta);
  const auto policy = mapper.map(theta, num_active);
  return estimate_policy_reward(theta, *policy, options, seed);
}

FrequentistResult frequentist_regret(const SystemParams& theta_star, const PolicyMapper& mapper,
                                     const LearnerSetup& setup, int reps, std::uint64_t seed,
                                     const AverageRewardOptions& j_options,
                                     std::optional<AverageRewardEstimate> j_star, const RunObserver& observer) {
  if (reps < 1) throw ContractViolation("need at least one replication");
  FrequentistResult out;
  out.j_star = j_star ? *j_star
                      : estimate_average_reward(theta_star, mapper, setup.num_active, j_options,
                                                derive_seed(seed, kJStarStream));
  const auto times = curve_times(setup.horizon, setup.curve_stride);
  std::vector<std::vector<double>> cumulative(reps);
  out.episode_counts.resize(reps);
  std::mutex observer_mutex;

  detail::parallel_for(reps, setup.threads, [&](int r) {
    TsdeConfig cfg{setup.grid,
                   setup.prior,
                   theta_star,
                   setup.init.empty() ? best_reward_states(theta_star) : setup.init,
                   setup.num_active,
                   setup.horizon,
                   setup.tmix_quarter,
                   derive_seed(seed, kRunStream, static_cast<std::uint64_t>(r)),
                   setup.snapshot_every,
                   setup.keep_counter_snapshots};
    const RunRecord run = run_tsde(cfg, mapper);
    if (!run.valid) throw std::runtime_error("learner run failed: " + run.error);
    const auto& rewards = setup.realized_rewards ? run.realized_reward : run.expected_reward;
    auto& cum = cumulative[r];
    cum.reserve(times.size());
    double acc = 0.0;
    std::size_t next = 0;
    for (std::int64_t t = 0; t <= setup.horizon; ++t) {
      if (t > 0) acc += rewards[static_cast<std::size_t>(t - 1)];
      if (next < times.size() && times[next] == t) {
        cum.push_back(acc);
        ++next;
      }
    }
    out.episode_counts[r] = run.num_episodes();
    if (observer) {
      std::lock_guard lock(observer_mutex);
      observer(r, run);
    }
  });

  out.curve.times = times;
  out.curve.reps = reps;
  out.curve.values.resize(times.size());
  out.curve.stderr.resize(times.size());
  out.mean_cumulative_reward.resize(times.size());
  std::vector<double> column(reps);
  for (std::size_t j = 0; j < times.size(); ++j) {
    for (int r = 0; r < reps; ++r) column[r] = cumulative[r][j];
    const auto [mean, se] = mean_stderr(column);
    out.mean_cumulative_reward[j] = mean;
    out.curve.values[j] = out.j_star.mean * static_cast<double>(times[j]) - mean;
    out.curve.stderr[j] = se;
  }
  return out;
}

std::uint64_t prior_draw_seed(std::uint64_t seed, int draw) {
  return derive_seed(seed, kRunStream + 100, static_cast<std::uint64_t>(draw));
}

std::vector<std::size_t> draw_theta_star(const Posterior& prior, const ParamGrid& grid, std::uint64_t seed,
                                         int draw) {
  Rng rng(derive_seed(seed, kPriorStream, static_cast<std::uint64_t>(draw)));
  return sample_params(prior, grid, rng).candidate;
}

BayesianResult bayesian_regret(const PolicyMapper& mapper, const LearnerSetup& setup, int prior_draws,
                               int reps_per_draw, std::uint64_t seed, const AverageRewardOptions& j_options,
                               const RunObserver& observer) {
  if (prior_draws < 1) throw ContractViolation("need at least one prior draw");
  BayesianResult out;
  out.draws.resize(prior_draws);
  out.j_stars.resize(prior_draws);
  std::vector<FrequentistResult> per_draw(prior_draws);
  LearnerSetup inner = setup;
  inner.threads = 1;
  AverageRewardOptions j_inner = j_options;
  j_inner.threads = 1;
  std::mutex observer_mutex;

  detail::parallel_for(prior_draws, setup.threads, [&](int d) {
    out.draws[d] = draw_theta_star(setup.prior, setup.grid, seed, d);
    const auto theta = setup.grid.assemble(out.draws[d]);
    RunObserver wrapped;
    if (observer) {
      wrapped = [&, d](int r, const RunRecord& run) {
        std::lock_guard lock(observer_mutex);
        observer(d * reps_per_draw + r, run);
      };
    }
    per_draw[d] = frequentist_regret(theta, mapper, prior_draws == 1 ? setup : inner, reps_per_draw,
                                     prior_draw_seed(seed, d), prior_draws == 1 ? j_options : j_inner,
                                     std::nullopt, wrapped);
    out.j_stars[d] = per_draw[d].j_star.mean;
  });

  for (const auto& f : per_draw)
    out.episode_counts.insert(out.episode_counts.end(), f.episode_counts.begin(), f.episode_counts.end());
  std::tie(out.j_star_mean, out.j_star_stderr) = mean_stderr(out.j_stars);
  if (prior_draws == 1) {
    out.curve = per_draw.front().curve;
    out.j_star_stderr = per_draw.front().j_star.stderr;
    return out;
  }
  const auto& times = per_draw.front().curve.times;
  out.curve.times = times;
  out.curve.reps = prior_draws * reps_per_draw;
  out.curve.values.resize(times.size());
  out.curve.stderr.resize(times.size());
  std::vector<double> column(prior_draws);
  for (std::size_t j = 0; j < times.size(); ++j) {
    for (int d = 0; d < prior_draws; ++d) column[d] = per_draw[d].curve.values[j];
    std::tie(out.curve.values[j], out.curve.stderr[j]) = mean_stderr(column);
  }
  return out;
}

double confidence_radius(int num_states, double delta, std::int64_t count) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("delta must lie in (0,1)");
  const double m = static_cast<double>(std::max<std::int64_t>(1, count));
  return std::sqrt(8.0 * num_states * std::log(1.0 / delta) / m);
}

DiagnosticRecord confidence_diagnostic(const RunRecord& run, const SystemParams& theta_star, double delta,
                                       bool keep_radii) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractViolation("delta must lie in (0,1)");
  if (theta_star.size() != run.state_counts.size()) throw ContractViolation("theta* has wrong arm count");
  const int K = static_cast<int>(run.state_counts.size());
  const CounterTable layout(run.state_counts, run.tmix);
  const std::int64_t tmix = run.tmix;

  DiagnosticRecord out;
  int total_states = 0;
  for (int S : run.state_counts) total_states += S;
  out.coverage_bound = total_states * delta * static_cast<double>(tmix);
  out.delta_bound = 12.0 * std::sqrt(run.num_active * static_cast<double>(tmix) * static_cast<double>(run.steps()) *
                                     std::log(1.0 / delta)) *
                    total_states;

  // Empirical distribution per zeta, flattened like the outcome table.
  std::vector<double> empirical(layout.outcome_counts().size());
  std::size_t pull = 0;
  for (std::size_t i = 0; i < run.episodes.size(); ++i) {
    const auto& ep = run.episodes[i];
    if (ep.counts_at_start.size() != layout.num_zeta()) {
      throw ContractViolation("run was recorded without counter snapshots");
    }
    EpisodeDiagnostic diag;
    diag.index = ep.index;
    diag.start = ep.start;
    const std::int64_t end = i + 1 < run.episodes.size() ? run.episodes[i + 1].start : run.steps() + 1;
    diag.length = end - ep.start;
    diag.min_radius = std::numeric_limits<double>::infinity();
    std::vector<double> radii;
    for (int k = 0; k < K; ++k) {
      const int S = run.state_counts[k];
      for (State s = 0; s < S; ++s) {
        for (std::int64_t b = 1; b <= tmix; ++b) {
          const std::size_t z = layout.zeta(k, s, b);
          const std::size_t off = layout.outcome_offset(k, s, b);
          const std::int64_t m = ep.counts_at_start[z];
          const double c = confidence_radius(S, delta, m);
          const auto truth = theta_star[k].predictive(s, b);
          double l1 = 0.0;
          for (int j = 0; j < S; ++j) {
            const double p_hat = m > 0 ? static_cast<double>(ep.outcomes_at_start[off + j]) / static_cast<double>(m)
                                       : 1.0 / S;
            empirical[off + j] = p_hat;
            l1 += std::abs(p_hat - truth[j]);
          }
          if (l1 > c) {
            diag.member = false;
            ++diag.violations;
          }
          diag.min_radius = std::min(diag.min_radius, c);
          diag.max_radius = std::max(diag.max_radius, c);
          if (keep_radii) radii.push_back(c);
        }
      }
    }
    for (; pull < run.pulls.size() && run.pulls[pull].time < end; ++pull) {
      const auto& p = run.pulls[pull];
      const auto truth = theta_star[p.arm].predictive(p.sigma, p.elapsed);
      const std::size_t off = layout.outcome_offset(p.arm, p.sigma, p.elapsed);
      for (std::size_t j = 0; j < truth.size(); ++j) diag.delta_contribution += std::abs(empirical[off + j] - truth[j]);
    }
    out.delta_total += diag.delta_contribution;
    diag.delta_cumulative = out.delta_total;
    out.episodes.push_back(diag);
    if (keep_radii) out.radii.push_back(std::move(radii));
  }
  return out;
}

std::vector<SpanEstimate> discounted_span_probe(const SystemParams& theta, const Policy& policy,
                                                const std::vector<double>& betas, std::int64_t n_cap,
                                                double tol, std::size_t budget) {
  validate_system(theta);
  const JointStateSpace space(theta, n_cap, budget);
  const auto actions = enumerate_actions(static_cast<int>(theta.size()), policy.num_active());
  const auto jt = build_joint_transitions(theta, space, actions);
  const std::size_t X = space.size();
  const std::size_t A = actions.size();

  std::vector<std::size_t> row_of(X);
  Action a;
  for (std::size_t x = 0; x < X; ++x) {
    policy.act(space.decode(x), a);
    const auto it = std::find(actions.begin(), actions.end(), a);
    row_of[x] = x * A + static_cast<std::size_t>(it - actions.begin());
  }

  std::vector<SpanEstimate> out;
  for (double beta : betas) {
    if (!(beta > 0.0 && beta < 1.0)) throw ContractViolation("discount factor must lie in (0,1)");
    std::vector<double> v(X, 0.0), next(X);
    std::size_t it = 0;
    constexpr std::size_t kMaxIterations = 10'000'000;
    for (; it < kMaxIterations; ++it) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t x = 0; x < X; ++x) {
        const std::size_t row = row_of[x];
        double q = jt.reward[row];
        for (std::size_t e = jt.offsets[row]; e < jt.offsets[row + 1]; ++e) q += jt.edges[e].prob * v[jt.edges[e].next];
        next[x] = beta * q;
        const double d = next[x] - v[x];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      v.swap(next);
      // The span seminorm contracts by at least beta per sweep.
      if ((hi - lo) * beta / (1.0 - beta) < tol) break;
    }
    if (it == kMaxIterations) throw ConvergenceError("discounted evaluation did not converge", 0.0);
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    out.push_back({beta, *mx - *mn, it + 1});
  }
  return out;
}

double theoretical_bound(double span_bound, int num_active, int total_states, std::int64_t tmix,
                         std::int64_t horizon) {
  const double H = span_bound, N = num_active, S = total_states;
  const double Tm = static_cast<double>(tmix), T = static_cast<double>(horizon);
  return 2.0 * (H + N) * std::sqrt(S * Tm * T * std::log(N * T)) +
         28.0 * (H + 1.0) * S * std::sqrt(N * Tm * T * std::log(Tm * T));
}

LogLogFit loglog_fit(const RegretCurve& curve, std::int64_t t_lo, std::int64_t t_hi) {
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < curve.times.size(); ++j) {
    const auto t = curve.times[j];
    if (t < t_lo || t > t_hi || t <= 0) continue;
    if (!(curve.values[j] > 0.0)) {
      throw std::domain_error("regret is not positive at t = " + std::to_string(t));
    }
    xs.push_back(std::log(static_cast<double>(t)));
    ys.push_back(std::log(curve.values[j]));
  }
  if (xs.size() < 2) throw ContractViolation("log-log window holds fewer than two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LogLogFit fit;
  fit.points = xs.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace tsde
