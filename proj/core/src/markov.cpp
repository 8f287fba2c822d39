#include "tsde/markov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsde/errors.hpp"

namespace tsde {

namespace {

// P^e for a stochastic P by repeated squaring. Rows are renormalized after each
// product so rounding does not compound across squarings.
Eigen::MatrixXd stochastic_power(const Eigen::MatrixXd& P, std::int64_t e) {
  auto renormalize = [](Eigen::MatrixXd& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) M.row(i) /= M.row(i).sum();
  };
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  Eigen::MatrixXd base = P;
  for (; e > 0; e >>= 1) {
    if (e & 1) {
      power = power * base;
      renormalize(power);
    }
    base = base * base;
    renormalize(base);
  }
  return power;
}

}  // namespace

// Rows e_s A P^(n-1) for n = 1..length(s), extended until successive rows stop
// changing in double precision. Beyond the stored range the last row is reused
// when converged; otherwise the row is recomputed on demand.
class PredictiveTable {
 public:
  static constexpr std::int64_t kMaxRows = 1 << 13;
  static constexpr double kConvergedL1 = 1e-15;

  PredictiveTable(const TransitionMatrix& active, const TransitionMatrix& passive)
      : num_states_(active.size()), passive_(passive.matrix()) {
    rows_.resize(num_states_);
    converged_.resize(num_states_, false);
    for (int s = 0; s < num_states_; ++s) {
      Eigen::RowVectorXd row = active.matrix().row(s);
      auto& store = rows_[s];
      store.insert(store.end(), row.data(), row.data() + num_states_);
      for (std::int64_t n = 2; n <= kMaxRows; ++n) {
        Eigen::RowVectorXd next = row * passive_;
        const double diff = (next - row).lpNorm<1>();
        row = next;
        store.insert(store.end(), row.data(), row.data() + num_states_);
        if (diff <= kConvergedL1) {
          converged_[s] = true;
          break;
        }
      }
    }
  }

  std::span<const double> row(State s, std::int64_t n) const {
    const auto& store = rows_[s];
    const std::int64_t stored = static_cast<std::int64_t>(store.size()) / num_states_;
    if (n <= stored) {
      return {store.data() + (n - 1) * num_states_, static_cast<std::size_t>(num_states_)};
    }
    if (converged_[s]) {
      return {store.data() + (stored - 1) * num_states_, static_cast<std::size_t>(num_states_)};
    }
    // Slow path for chains that have not settled within kMaxRows steps.
    thread_local std::vector<double> scratch;
    Eigen::RowVectorXd last =
        Eigen::Map<const Eigen::RowVectorXd>(store.data() + (stored - 1) * num_states_, num_states_);
    Eigen::RowVectorXd out = last * stochastic_power(passive_, n - stored);
    scratch.assign(out.data(), out.data() + num_states_);
    return {scratch.data(), scratch.size()};
  }

 private:
  int num_states_;
  Eigen::MatrixXd passive_;
  std::vector<std::vector<double>> rows_;
  std::vector<bool> converged_;
};

namespace {

void check_stochastic(const Eigen::MatrixXd& P) {
  if (P.rows() == 0 || P.rows() != P.cols()) {
    throw MalformedMatrixError("transition matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const double v = P(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw MalformedMatrixError("entry (" + std::to_string(i) + "," + std::to_string(j) +
                                   ") outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > TransitionMatrix::kRowSumTolerance) {
      throw MalformedMatrixError("row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

BoolMatrix bool_product(const BoolMatrix& a, const BoolMatrix& b) {
  const Eigen::Index n = a.rows();
  BoolMatrix out = BoolMatrix::Constant(n, n, false);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      if (a(i, k))
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = out(i, j) || b(k, j);
  return out;
}

}  // namespace

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  check_stochastic(entries_);
}

TransitionMatrix::TransitionMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    if (static_cast<Eigen::Index>(r.size()) != n) {
      throw MalformedMatrixError("transition matrix must be square");
    }
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  check_stochastic(m);
  entries_ = std::move(m);
}

ArmModel::ArmModel(TransitionMatrix active, TransitionMatrix passive, std::vector<double> rewards)
    : active_(std::move(active)), passive_(std::move(passive)), rewards_(std::move(rewards)) {
  if (active_.size() != passive_.size()) {
    throw ContractViolation("active and passive matrices must have the same state count");
  }
  if (static_cast<int>(rewards_.size()) != active_.size()) {
    throw ContractViolation("reward table size must match the state count");
  }
  for (double r : rewards_) {
    if (!(r >= 0.0 && r <= 1.0)) throw ContractViolation("rewards must lie in [0,1]");
  }
  predictive_ = std::make_shared<const PredictiveTable>(active_, passive_);
}

std::span<const double> ArmModel::predictive(State s, std::int64_t n) const {
  if (s < 0 || s >= num_states()) throw ContractViolation("state out of range");
  if (n < 1) throw ContractViolation("elapsed time must be >= 1");
  return predictive_->row(s, n);
}

double ArmModel::predictive_reward(State s, std::int64_t n) const {
  const auto row = predictive(s, n);
  double r = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) r += rewards_[j] * row[j];
  return r;
}

std::vector<double> ArmModel::key() const {
  std::vector<double> k;
  const int n = num_states();
  k.reserve(2 * n * n + n + 1);
  k.push_back(n);
  k.insert(k.end(), active_.matrix().data(), active_.matrix().data() + n * n);
  k.insert(k.end(), passive_.matrix().data(), passive_.matrix().data() + n * n);
  k.insert(k.end(), rewards_.begin(), rewards_.end());
  return k;
}

TransitionMatrix GilbertElliott::matrix() const {
  if (!(p01 > 0.0 && p01 < 1.0 && p11 > 0.0 && p11 < 1.0)) {
    throw ContractViolation("Gilbert-Elliott probabilities must lie in (0,1)");
  }
  return TransitionMatrix{{1.0 - p01, p01}, {1.0 - p11, p11}};
}

ArmModel GilbertElliott::arm() const {
  auto P = matrix();
  return ArmModel(P, P, {0.0, 1.0});
}

void validate_system(const SystemParams& theta) {
  if (theta.empty()) throw ContractViolation("system needs at least one arm");
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (!validate_chain(theta[k].passive())) {
      throw ReducibleChainError("passive chain of arm " + std::to_string(k) +
                                " is not irreducible and aperiodic");
    }
  }
}

bool validate_chain(const Eigen::MatrixXd& P) {
  check_stochastic(P);
  // Primitive iff some power is strictly positive; Wielandt bounds the needed
  // exponent by (n-1)^2 + 1 <= n^2, and positivity persists for higher powers.
  const Eigen::Index n = P.rows();
  BoolMatrix pattern = P.array() > 0.0;
  const Eigen::Index target = n * n;
  for (Eigen::Index power = 1; power < target; power *= 2) pattern = bool_product(pattern, pattern);
  return pattern.all();
}

std::vector<double> stationary_distribution(const TransitionMatrix& P) {
  if (!validate_chain(P)) {
    throw ReducibleChainError("stationary distribution requires an irreducible aperiodic chain");
  }
  const int n = P.size();
  Eigen::MatrixXd A = P.matrix().transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd p = A.fullPivLu().solve(b);
  for (int i = 0; i < n; ++i) p(i) = std::max(p(i), 0.0);
  p /= p.sum();
  const double residual = (p.transpose() * P.matrix() - p.transpose()).lpNorm<1>();
  if (residual > 1e-10) throw ConvergenceError("stationary solve inaccurate", residual);
  return {p.data(), p.data() + n};
}

std::vector<double> n_step_distribution(const ArmModel& arm, State s, std::int64_t n) {
  if (n < 1) throw ContractViolation("n_step_distribution requires n >= 1");
  if (s < 0 || s >= arm.num_states()) throw ContractViolation("state out of range");
  const int m = arm.num_states();
  Eigen::RowVectorXd row = arm.active().matrix().row(s) * stochastic_power(arm.passive().matrix(), n - 1);
  return {row.data(), row.data() + m};
}

int mixing_time(const TransitionMatrix& P, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ContractViolation("epsilon must lie in (0,1)");
  const auto p = stationary_distribution(P);
  const Eigen::RowVectorXd target = Eigen::Map<const Eigen::RowVectorXd>(p.data(), P.size());
  constexpr int kMaxSteps = 10'000'000;
  Eigen::MatrixXd M = P.matrix();
  double gap = 0.0;
  for (int t = 1; t <= kMaxSteps; ++t) {
    gap = 0.0;
    for (int s = 0; s < P.size(); ++s) gap = std::max(gap, (M.row(s) - target).lpNorm<1>());
    if (gap <= epsilon) return t;
    M = M * P.matrix();
  }
  throw ConvergenceError("mixing time exceeds step budget", gap);
}

std::int64_t horizon_mixing_time(std::int64_t tmix_quarter, std::int64_t horizon) {
  if (horizon < 2) throw ContractViolation("horizon must be >= 2");
  if (tmix_quarter < 1) throw ContractViolation("quarter mixing time must be >= 1");
  std::int64_t bits = 0;
  while ((std::int64_t{1} << bits) < horizon) ++bits;
  return bits * tmix_quarter;
}

int max_quarter_mixing_time(std::span<const ArmModel> arms) {
  int worst = 1;
  for (const auto& arm : arms) worst = std::max(worst, mixing_time(arm.passive(), 0.25));
  return worst;
}

}  // namespace tsde
