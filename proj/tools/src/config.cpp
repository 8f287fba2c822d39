#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "tsde/errors.hpp"

namespace tsde::cli {
namespace {

using nlohmann::json;

constexpr std::string_view kSampleFromPrior = "sample-from-prior";

const std::set<std::string, std::less<>> kKnownKeys = {
    "mode",      "K",           "N",          "T",          "grid_min",     "grid_max",         "grid_step",
    "candidates", "theta_star", "mappings",   "reps",       "prior_draws",  "seed",             "tmix_quarter",
    "n_cap",     "output_dir",  "snapshot_every", "curve_stride", "eval_steps", "eval_reps",     "burn_in",
    "realized_rewards", "whittle_tol", "delta", "span_bound", "slope_window", "threads"};

std::pair<int, int> line_and_column(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  template <typename T>
  void get(const char* key, T& out) {
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      errors.push_back(fmt::format("{}: expected {}, got {}", key, type_name<T>(), doc_.at(key).dump()));
    }
  }

  std::vector<std::string> errors;

 private:
  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
  }

  const json& doc_;
};

bool valid_probability(double p) { return p > 0.0 && p < 1.0; }

std::vector<GePair> read_pairs(const json& j, const std::string& what, std::vector<std::string>& errors) {
  std::vector<GePair> out;
  if (!j.is_array()) {
    errors.push_back(what + ": expected a list of [p01, p11] pairs");
    return out;
  }
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
      errors.push_back(what + ": entry " + item.dump() + " is not a [p01, p11] pair");
      continue;
    }
    out.emplace_back(item[0].get<double>(), item[1].get<double>());
  }
  return out;
}

json pairs_json(const std::vector<GePair>& pairs) {
  json out = json::array();
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kBayesian: return "bayesian";
    case Mode::kFrequentist: return "frequentist";
    case Mode::kEvalPolicy: return "eval-policy";
    case Mode::kDiagnostics: return "diagnostics";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::kBayesian, Mode::kFrequentist, Mode::kEvalPolicy, Mode::kDiagnostics}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError({fmt::format("parse error at line {}, column {}: {}", line, col, e.what())});
  }
  if (!doc.is_object()) throw ConfigError({"top level must be an object of key-value pairs"});

  std::vector<std::string> errors;
  for (const auto& [key, value] : doc.items()) {
    if (!kKnownKeys.contains(key)) errors.push_back("unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  Reader r(doc);
  std::string mode = std::string(to_string(cfg.mode));
  r.get("mode", mode);
  if (auto m = parse_mode(mode)) {
    cfg.mode = *m;
  } else {
    errors.push_back("mode: '" + mode + "' is not one of bayesian, frequentist, eval-policy, diagnostics");
  }
  r.get("K", cfg.K);
  r.get("N", cfg.N);
  r.get("T", cfg.T);
  r.get("grid_min", cfg.grid_min);
  r.get("grid_max", cfg.grid_max);
  r.get("grid_step", cfg.grid_step);
  r.get("reps", cfg.reps);
  r.get("prior_draws", cfg.prior_draws);
  r.get("seed", cfg.seed);
  r.get("tmix_quarter", cfg.tmix_quarter);
  r.get("n_cap", cfg.n_cap);
  r.get("output_dir", cfg.output_dir);
  r.get("snapshot_every", cfg.snapshot_every);
  r.get("curve_stride", cfg.curve_stride);
  r.get("eval_steps", cfg.eval_steps);
  r.get("eval_reps", cfg.eval_reps);
  r.get("burn_in", cfg.burn_in);
  r.get("realized_rewards", cfg.realized_rewards);
  r.get("whittle_tol", cfg.whittle_tol);
  r.get("delta", cfg.delta);
  r.get("span_bound", cfg.span_bound);
  r.get("threads", cfg.threads);
  errors.insert(errors.end(), r.errors.begin(), r.errors.end());

  if (doc.contains("candidates")) {
    const auto& c = doc["candidates"];
    if (!c.is_array()) {
      errors.push_back("candidates: expected one list of [p01, p11] pairs per arm");
    } else {
      for (std::size_t k = 0; k < c.size(); ++k) {
        cfg.candidates.push_back(read_pairs(c[k], fmt::format("candidates[{}]", k), errors));
      }
    }
  }
  if (doc.contains("theta_star")) {
    const auto& t = doc["theta_star"];
    if (t.is_string()) {
      if (t.get<std::string>() != kSampleFromPrior) {
        errors.push_back("theta_star: string value must be \"sample-from-prior\"");
      }
    } else {
      cfg.theta_star = read_pairs(t, "theta_star", errors);
    }
  }
  if (doc.contains("mappings")) {
    const auto& m = doc["mappings"];
    std::vector<std::string> names;
    if (m.is_string()) {
      names.push_back(m.get<std::string>());
    } else if (m.is_array() && std::all_of(m.begin(), m.end(), [](const json& x) { return x.is_string(); })) {
      names = m.get<std::vector<std::string>>();
    } else {
      errors.push_back("mappings: expected a mapping name or a list of names");
    }
    cfg.mappings.clear();
    for (const auto& name : names) {
      try {
        cfg.mappings.push_back(parse_mapping(name));
      } catch (const std::exception&) {
        errors.push_back("mappings: unknown mapping '" + name + "'");
      }
    }
  }
  if (doc.contains("slope_window")) {
    const auto& w = doc["slope_window"];
    if (w.is_array() && w.size() == 2 && w[0].is_number_integer() && w[1].is_number_integer()) {
      cfg.slope_lo = w[0].get<std::int64_t>();
      cfg.slope_hi = w[1].get<std::int64_t>();
    } else {
      errors.push_back("slope_window: expected [t_lo, t_hi]");
    }
  }

  auto semantic = validate(cfg);
  errors.insert(errors.end(), semantic.begin(), semantic.end());
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot open config file '" + path.string() + "'"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  json doc;
  doc["mode"] = std::string(to_string(c.mode));
  doc["K"] = c.K;
  doc["N"] = c.N;
  doc["T"] = c.T;
  doc["grid_min"] = c.grid_min;
  doc["grid_max"] = c.grid_max;
  doc["grid_step"] = c.grid_step;
  doc["candidates"] = json::array();
  for (const auto& arm : c.candidates) doc["candidates"].push_back(pairs_json(arm));
  doc["theta_star"] = c.theta_star.empty() ? json(std::string(kSampleFromPrior)) : pairs_json(c.theta_star);
  doc["mappings"] = json::array();
  for (auto id : c.mappings) doc["mappings"].push_back(std::string(to_string(id)));
  doc["reps"] = c.reps;
  doc["prior_draws"] = c.prior_draws;
  doc["seed"] = c.seed;
  doc["tmix_quarter"] = c.tmix_quarter;
  doc["n_cap"] = c.n_cap;
  doc["output_dir"] = c.output_dir;
  doc["snapshot_every"] = c.snapshot_every;
  doc["curve_stride"] = c.curve_stride;
  doc["eval_steps"] = c.eval_steps;
  doc["eval_reps"] = c.eval_reps;
  doc["burn_in"] = c.burn_in;
  doc["realized_rewards"] = c.realized_rewards;
  doc["whittle_tol"] = c.whittle_tol;
  doc["delta"] = c.delta;
  doc["span_bound"] = c.span_bound;
  doc["slope_window"] = {c.slope_lo, c.slope_hi};
  doc["threads"] = c.threads;
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> v;
  if (c.K < 1) v.push_back(fmt::format("K: must be at least 1, got {}", c.K));
  if (c.N < 1) v.push_back(fmt::format("N: must be at least 1, got {}", c.N));
  if (c.N > c.K) v.push_back(fmt::format("N, K: N = {} exceeds K = {}", c.N, c.K));
  if (c.T < 2) v.push_back(fmt::format("T: must be at least 2, got {}", c.T));

  auto check_pairs = [&](const std::vector<GePair>& pairs, const std::string& what) {
    for (const auto& [a, b] : pairs) {
      if (!valid_probability(a) || !valid_probability(b)) {
        v.push_back(fmt::format("{}: ({}, {}) is not a valid Gilbert-Elliott pair; both entries must lie in (0, 1)",
                                what, a, b));
      }
    }
  };
  if (c.candidates.empty()) {
    if (!valid_probability(c.grid_min) || !valid_probability(c.grid_max) || c.grid_min > c.grid_max) {
      v.push_back(fmt::format("grid_min, grid_max: need 0 < grid_min <= grid_max < 1, got {} and {}", c.grid_min,
                              c.grid_max));
    }
    if (!(c.grid_step > 0.0)) v.push_back(fmt::format("grid_step: must be positive, got {}", c.grid_step));
  } else {
    if (static_cast<int>(c.candidates.size()) != c.K) {
      v.push_back(fmt::format("candidates: {} arm lists given for K = {}", c.candidates.size(), c.K));
    }
    for (std::size_t k = 0; k < c.candidates.size(); ++k) {
      if (c.candidates[k].empty()) v.push_back(fmt::format("candidates[{}]: empty candidate list", k));
      check_pairs(c.candidates[k], fmt::format("candidates[{}]", k));
    }
  }

  if (c.theta_star.empty()) {
    if (c.mode == Mode::kFrequentist || c.mode == Mode::kDiagnostics) {
      v.push_back(fmt::format("theta_star: {} mode requires an explicit theta_star", to_string(c.mode)));
    }
  } else {
    if (static_cast<int>(c.theta_star.size()) != c.K) {
      v.push_back(fmt::format("theta_star: {} pairs given for K = {}", c.theta_star.size(), c.K));
    }
    check_pairs(c.theta_star, "theta_star");
  }

  if (c.mappings.empty()) v.push_back("mappings: at least one mapping is required");
  for (auto id : c.mappings) {
    if (id == PolicyMappingId::kOracleVi && c.K > 3) {
      v.push_back(fmt::format("mappings: oracle-vi supports K <= 3, got K = {}", c.K));
    }
  }
  if (c.reps < 1) v.push_back(fmt::format("reps: must be at least 1, got {}", c.reps));
  if (c.prior_draws < 1) v.push_back(fmt::format("prior_draws: must be at least 1, got {}", c.prior_draws));
  if (c.tmix_quarter < 0) v.push_back("tmix_quarter: must be 0 (auto) or positive");
  if (c.n_cap < 0) v.push_back("n_cap: must be 0 (auto) or positive");
  if (c.snapshot_every < 0) v.push_back("snapshot_every: must be non-negative");
  if (c.curve_stride < 1) v.push_back("curve_stride: must be at least 1");
  if (c.eval_steps < 1) v.push_back("eval_steps: must be at least 1");
  if (c.eval_reps < 1) v.push_back("eval_reps: must be at least 1");
  if (c.burn_in < -1) v.push_back("burn_in: must be -1 (auto) or non-negative");
  if (c.burn_in >= c.eval_steps) v.push_back("burn_in, eval_steps: burn_in must be below eval_steps");
  if (!(c.whittle_tol > 0.0)) v.push_back("whittle_tol: must be positive");
  if (!(c.delta >= 0.0 && c.delta < 1.0)) v.push_back("delta: must be 0 (auto) or lie in (0, 1)");
  if (!(c.span_bound >= 0.0)) v.push_back("span_bound: must be non-negative");
  if (c.slope_lo < 0 || c.slope_hi < 0 || (c.slope_hi > 0 && c.slope_lo > c.slope_hi)) {
    v.push_back("slope_window: need 0 <= t_lo <= t_hi (zeros select the default window)");
  }
  if (c.threads < 1) v.push_back("threads: must be at least 1");
  return v;
}

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "fig2") {
    c.mode = Mode::kBayesian;
    c.K = 8;
    c.N = 3;
    c.T = 2000;
    c.prior_draws = 200;
    c.reps = 1;
    c.eval_steps = 100'000;
    c.eval_reps = 20;
    c.slope_lo = 500;
    c.slope_hi = 2000;
  } else if (name == "fig3") {
    c.mode = Mode::kFrequentist;
    c.K = 4;
    c.N = 2;
    c.T = 10'000;
    c.theta_star = {{0.3, 0.7}, {0.4, 0.6}, {0.5, 0.5}, {0.6, 0.4}};
    c.reps = 100;
    c.eval_steps = 100'000;
    c.eval_reps = 100;
  } else {
    throw ConfigError({"unknown preset '" + std::string(name) + "' (expected fig2 or fig3)"});
  }
  return c;
}

ParamGrid make_grid(const ExperimentConfig& c) {
  if (c.candidates.empty()) return ParamGrid::uniform_gilbert_elliott(c.K, c.grid_min, c.grid_max, c.grid_step);
  std::vector<std::vector<ArmModel>> arms;
  for (const auto& list : c.candidates) arms.push_back(make_theta(list));
  return ParamGrid(std::move(arms));
}

SystemParams make_theta(const std::vector<GePair>& pairs) {
  SystemParams theta;
  for (const auto& [a, b] : pairs) theta.push_back(GilbertElliott{a, b}.arm());
  return theta;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tsde::cli
