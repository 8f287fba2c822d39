#include "experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "tsde/errors.hpp"
#include "tsde/version.hpp"

namespace tsde::cli {
namespace {

namespace fs = std::filesystem;

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, std::string_view header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << header << '\n';
  }

  template <typename... Args>
  void row(const Args&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << fmt::format("{}", fields), first = false), ...);
    out_ << '\n';
  }

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
};

const PosteriorSnapshot* snapshot_at(const RunRecord& run, std::int64_t t) {
  const PosteriorSnapshot* best = nullptr;
  for (const auto& s : run.snapshots) {
    if (s.time <= t) best = &s;
  }
  return best;
}

double truth_weight(const RunRecord& run, const PosteriorSnapshot& snap, int k) {
  const auto& c = run.true_candidate[k];
  return c ? snap.weights[k][*c] : 0.0;
}

std::vector<TraceRow> trace_rows(const RunRecord& run) {
  std::vector<TraceRow> rows;
  for (const auto& snap : run.snapshots) {
    const int episode = snap.time == 0 ? 1 : run.episode_of_time[static_cast<std::size_t>(snap.time - 1)];
    for (int k = 0; k < static_cast<int>(snap.weights.size()); ++k) {
      rows.push_back({snap.time, k, truth_weight(run, snap, k), episode});
    }
  }
  return rows;
}

AverageRewardEstimate summarize(const std::vector<double>& xs) {
  AverageRewardEstimate out;
  out.reps = static_cast<int>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stderr = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return out;
}

struct DiagnosticRow {
  int rep;
  EpisodeDiagnostic episode;
};

void print_summary(std::ostream& os, const ExperimentResult& result) {
  const auto& rc = result.resolved;
  const auto& c = rc.config;
  os << fmt::format("mode={} K={} N={} T={} seed={} tmix={} n_cap={}\n", to_string(c.mode), c.K, c.N, c.T, c.seed,
                    rc.tmix, c.n_cap);
  const bool learning = c.mode == Mode::kBayesian || c.mode == Mode::kFrequentist;
  if (c.mode == Mode::kEvalPolicy) {
    os << fmt::format("{:<12} {:>10} {:>10}\n", "mapping", "J", "stderr");
    for (const auto& m : result.mappings) {
      os << fmt::format("{:<12} {:>10.4f} {:>10.4f}\n", to_string(m.id), m.j.mean, m.j.stderr);
    }
    return;
  }
  if (learning) {
    os << fmt::format("{:<12} {:>9} {:>9} {:>11} {:>9} {:>8} {:>9} {:>9}\n", "mapping", "J*", "stderr", "regret(T)",
                      "stderr", "slope", "episodes", "bound");
  } else {
    os << fmt::format("{:<12} {:>9} {:>9} {:>11} {:>11} {:>9} {:>9}\n", "mapping", "episodes", "bound",
                      "outside", "cov.bound", "delta_T", "bound");
  }
  for (const auto& m : result.mappings) {
    int max_episodes = 0;
    double mean_episodes = 0.0;
    for (int e : m.episode_counts) {
      max_episodes = std::max(max_episodes, e);
      mean_episodes += e;
    }
    mean_episodes /= std::max<std::size_t>(1, m.episode_counts.size());
    if (learning) {
      const auto& curve = *m.regret;
      os << fmt::format("{:<12} {:>9.4f} {:>9.4f} {:>11.2f} {:>9.2f} {:>8} {:>9.1f} {:>9.0f}\n", to_string(m.id),
                        m.j.mean, m.j.stderr, curve.values.back(), curve.stderr.back(),
                        m.slope ? fmt::format("{:.3f}", m.slope->slope) : std::string("n/a"), mean_episodes,
                        m.episode_bound);
    } else {
      const double frac = m.diag_episodes ? static_cast<double>(m.diag_outside) / m.diag_episodes : 0.0;
      os << fmt::format("{:<12} {:>9.1f} {:>9.0f} {:>11.5f} {:>11.5f} {:>9.1f} {:>9.0f}\n", to_string(m.id),
                        mean_episodes, m.episode_bound, frac, m.coverage_bound, m.delta_total_mean, m.delta_bound);
      for (const auto& s : m.span) {
        os << fmt::format("    span probe beta={} span={:.4f}\n", s.beta, s.span);
      }
    }
    if (m.episode_bound_violations > 0) {
      os << fmt::format("    {} run(s) exceeded the episode bound\n", m.episode_bound_violations);
    }
    if (m.counter_violations > 0) {
      os << fmt::format("    {} run(s) broke counter conservation\n", m.counter_violations);
    }
    if (!m.slope_error.empty()) os << "    slope: " << m.slope_error << "\n";
  }
}

}  // namespace

ResolvedConfig resolve(const ExperimentConfig& config) {
  if (auto errors = validate(config); !errors.empty()) throw ConfigError(std::move(errors));
  ResolvedConfig rc;
  rc.config = config;
  auto& c = rc.config;
  const ParamGrid grid = make_grid(c);
  if (c.tmix_quarter == 0) {
    std::vector<ArmModel> arms;
    for (int k = 0; k < grid.num_arms(); ++k) arms.insert(arms.end(), grid.candidates(k).begin(), grid.candidates(k).end());
    for (const auto& arm : make_theta(c.theta_star)) arms.push_back(arm);
    c.tmix_quarter = max_quarter_mixing_time(arms);
  }
  rc.tmix = horizon_mixing_time(c.tmix_quarter, c.T);
  if (c.n_cap == 0) c.n_cap = rc.tmix;
  if (c.burn_in < 0) c.burn_in = std::min<std::int64_t>(10 * c.tmix_quarter, c.eval_steps - 1);
  if (c.delta == 0.0) c.delta = 1.0 / (static_cast<double>(rc.tmix) * static_cast<double>(c.T));
  if (c.slope_hi == 0) c.slope_hi = c.T;
  if (c.slope_lo == 0) c.slope_lo = std::max<std::int64_t>(1, c.T / 4);
  if (!c.output_dir.empty()) {
    rc.output_dir = c.output_dir;
  } else if (const char* env = std::getenv("TSDE_OUTPUT_DIR"); env && *env) {
    rc.output_dir = env;
  } else {
    rc.output_dir = "tsde-out";
  }
  return rc;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* summary) {
  ExperimentResult result;
  result.resolved = resolve(config);
  const auto& rc = result.resolved;
  const auto& c = rc.config;
  fs::create_directories(rc.output_dir);

  const ParamGrid grid = make_grid(c);
  const Posterior prior = Posterior::uniform(grid);
  const std::optional<SystemParams> theta_star =
      c.sample_theta_star() ? std::nullopt : std::optional(make_theta(c.theta_star));
  const double episode_bound = episode_count_bound(grid.total_states(), rc.tmix, c.T, c.N);

  LearnerSetup setup{grid,
                     prior,
                     c.N,
                     c.T,
                     c.tmix_quarter,
                     {},
                     c.snapshot_every,
                     c.curve_stride,
                     c.realized_rewards,
                     c.mode == Mode::kDiagnostics,
                     c.threads};
  AverageRewardOptions j_options{c.eval_steps, c.burn_in, c.eval_reps, {}, c.threads};

  const bool learning = c.mode == Mode::kBayesian || c.mode == Mode::kFrequentist;
  std::map<PolicyMappingId, std::vector<DiagnosticRow>> diagnostic_rows;

  for (auto id : c.mappings) {
    const PolicyMapper mapper(id, MapperOptions{c.n_cap, c.whittle_tol});
    MappingSummary m;
    m.id = id;
    m.episode_bound = episode_bound;

    if (c.mode == Mode::kEvalPolicy) {
      if (theta_star) {
        m.j = estimate_average_reward(*theta_star, mapper, c.N, j_options, derive_seed(c.seed, kJStarStream));
      } else {
        std::vector<double> per_draw(c.prior_draws);
        AverageRewardOptions inner = j_options;
        inner.threads = 1;
        for (int d = 0; d < c.prior_draws; ++d) {
          const auto theta = grid.assemble(draw_theta_star(prior, grid, c.seed, d));
          per_draw[d] = estimate_average_reward(theta, mapper, c.N, c.prior_draws == 1 ? j_options : inner,
                                                derive_seed(prior_draw_seed(c.seed, d), kJStarStream))
                            .mean;
        }
        m.j = summarize(per_draw);
      }
      result.mappings.push_back(std::move(m));
      continue;
    }

    const int runs = c.mode == Mode::kBayesian ? c.prior_draws * c.reps : c.reps;
    m.episode_counts.assign(runs, 0);
    m.truth_weights.assign(runs, {});
    std::vector<std::vector<DiagnosticRow>> per_run_diag(runs);
    std::vector<double> delta_totals(runs, 0.0);
    std::mutex mu;
    const std::int64_t early = c.T / 10;

    const RunObserver observer = [&](int i, const RunRecord& run) {
      m.episode_counts[i] = run.num_episodes();
      TruthWeights tw;
      const auto* e = snapshot_at(run, early);
      const auto* f = snapshot_at(run, c.T);
      for (int k = 0; k < c.K; ++k) {
        tw.early.push_back(e ? truth_weight(run, *e, k) : std::numeric_limits<double>::quiet_NaN());
        tw.final.push_back(f ? truth_weight(run, *f, k) : std::numeric_limits<double>::quiet_NaN());
      }
      m.truth_weights[i] = std::move(tw);
      if (i == 0) m.trace = trace_rows(run);
      if (c.mode == Mode::kDiagnostics) {
        const auto diag = confidence_diagnostic(run, *theta_star, c.delta);
        for (const auto& ep : diag.episodes) per_run_diag[i].push_back({i, ep});
        delta_totals[i] = diag.delta_total;
        std::lock_guard lock(mu);
        m.coverage_bound = diag.coverage_bound;
        m.delta_bound = diag.delta_bound;
      }
      std::lock_guard lock(mu);
      if (run.num_episodes() > episode_bound) ++m.episode_bound_violations;
      if (run.counter_total != static_cast<std::int64_t>(c.N) * c.T) ++m.counter_violations;
    };

    if (c.mode == Mode::kBayesian) {
      auto res = bayesian_regret(mapper, setup, c.prior_draws, c.reps, c.seed, j_options, observer);
      m.j = {res.j_star_mean, res.j_star_stderr, c.prior_draws};
      m.regret = std::move(res.curve);
    } else if (c.mode == Mode::kFrequentist) {
      auto res = frequentist_regret(*theta_star, mapper, setup, c.reps, c.seed, j_options, std::nullopt, observer);
      m.j = res.j_star;
      m.regret = std::move(res.curve);
    } else {
      // Diagnostics never read the regret curve, so J* is not estimated.
      frequentist_regret(*theta_star, mapper, setup, c.reps, c.seed, j_options, AverageRewardEstimate{}, observer);
      for (auto& rows : per_run_diag) {
        for (auto& row : rows) {
          ++m.diag_episodes;
          if (!row.episode.member) ++m.diag_outside;
          diagnostic_rows[id].push_back(row);
        }
      }
      for (double d : delta_totals) m.delta_total_mean += d / runs;
      try {
        const auto policy = mapper.map(*theta_star, c.N);
        m.span = discounted_span_probe(*theta_star, *policy, {0.9, 0.99, 0.999}, c.n_cap, 1e-8, 200'000);
      } catch (const StateBudgetError&) {
        // Joint chain too large to enumerate; the probe is skipped.
      }
    }
    if (learning) {
      try {
        m.slope = loglog_fit(*m.regret, c.slope_lo, c.slope_hi);
      } catch (const std::exception& e) {
        m.slope_error = e.what();
      }
    }
    result.mappings.push_back(std::move(m));
  }

  const fs::path dir = rc.output_dir;
  {
    CsvWriter eval(dir / "eval.csv", "mapping,J_mean,J_stderr");
    for (const auto& m : result.mappings) eval.row(to_string(m.id), m.j.mean, m.j.stderr);
    result.files.push_back(eval.path());
  }
  if (learning) {
    CsvWriter regret(dir / "regret.csv", "time,regret_mean,regret_stderr,mapping");
    const auto& times = result.mappings.front().regret->times;
    for (std::size_t j = 0; j < times.size(); ++j) {
      for (const auto& m : result.mappings) regret.row(times[j], m.regret->values[j], m.regret->stderr[j], to_string(m.id));
    }
    result.files.push_back(regret.path());

    CsvWriter bound(dir / "bound.csv", "time,bound,H");
    for (auto t : times) {
      if (t > 0) bound.row(t, theoretical_bound(c.span_bound, c.N, grid.total_states(), rc.tmix, t), c.span_bound);
    }
    result.files.push_back(bound.path());
  }
  if (c.mode != Mode::kEvalPolicy) {
    for (const auto& m : result.mappings) {
      CsvWriter trace(dir / fmt::format("trace_{}.csv", to_string(m.id)), "time,arm,posterior_weight_true,episode_index");
      for (const auto& r : m.trace) trace.row(r.time, r.arm, r.weight_true, r.episode);
      result.files.push_back(trace.path());
    }
  }
  if (c.mode == Mode::kDiagnostics) {
    CsvWriter diag(dir / "diagnostics.csv",
                   "mapping,rep,episode,start,length,min_radius,max_radius,in_confidence_set,violations,delta_cumulative");
    for (const auto& m : result.mappings) {
      for (const auto& [rep, ep] : diagnostic_rows[m.id]) {
        diag.row(to_string(m.id), rep, ep.index, ep.start, ep.length, ep.min_radius, ep.max_radius,
                 ep.member ? 1 : 0, ep.violations, ep.delta_cumulative);
      }
    }
    result.files.push_back(diag.path());
  }

  ExperimentConfig hashed = c;
  hashed.output_dir.clear();
  const std::string canonical = serialize_config(hashed);
  nlohmann::ordered_json manifest;
  manifest["config_hash"] = fmt::format("{:016x}", fnv1a(canonical));
  manifest["seed"] = c.seed;
  manifest["version"] = std::string(kVersion);
  manifest["mode"] = std::string(to_string(c.mode));
  manifest["files"] = nlohmann::json::array();
  for (const auto& f : result.files) manifest["files"].push_back(f.filename().string());
  manifest["config"] = nlohmann::ordered_json::parse(canonical);
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
  }
  result.files.push_back(dir / "manifest.json");

  if (summary) print_summary(*summary, result);
  return result;
}

std::vector<SlopeReport> emit_slope_report(const fs::path& regret_csv, std::int64_t t_lo, std::int64_t t_hi,
                                           const std::optional<std::string>& mapping, const fs::path& out_prefix) {
  std::ifstream in(regret_csv);
  if (!in) throw std::runtime_error("cannot open '" + regret_csv.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "time,regret_mean,regret_stderr,mapping") {
    throw std::runtime_error("'" + regret_csv.string() + "' is not a regret CSV");
  }
  std::vector<std::string> order;
  std::map<std::string, RegretCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw std::runtime_error("malformed regret row: " + line);
    if (mapping && f[3] != *mapping) continue;
    if (!curves.contains(f[3])) order.push_back(f[3]);
    auto& c = curves[f[3]];
    c.times.push_back(std::stoll(f[0]));
    c.values.push_back(std::stod(f[1]));
    c.stderr.push_back(std::stod(f[2]));
  }
  if (order.empty()) throw std::runtime_error("no regret rows" + (mapping ? " for mapping " + *mapping : std::string()));

  std::vector<SlopeReport> reports;
  for (const auto& name : order) {
    const auto& curve = curves[name];
    SlopeReport r{name, loglog_fit(curve, t_lo, t_hi), {}};
    r.loglog_file = out_prefix.string() + "_" + name + ".csv";
    CsvWriter out(r.loglog_file, "log_t,log_regret");
    for (std::size_t j = 0; j < curve.times.size(); ++j) {
      const auto t = curve.times[j];
      if (t >= t_lo && t <= t_hi && t > 0) out.row(std::log(static_cast<double>(t)), std::log(curve.values[j]));
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace tsde::cli
