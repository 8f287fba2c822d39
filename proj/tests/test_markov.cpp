#include <gtest/gtest.h>

#include <cmath>

#include "tsde/errors.hpp"
#include "tsde/markov.hpp"
#include "tsde/rng.hpp"

using namespace tsde;

namespace {

// Naive oracle: e_s * A * P^(n-1) by repeated multiplication.
std::vector<double> naive_n_step(const ArmModel& arm, State s, std::int64_t n) {
  Eigen::RowVectorXd v = arm.active().matrix().row(s);
  for (std::int64_t i = 1; i < n; ++i) v = v * arm.passive().matrix();
  return {v.data(), v.data() + v.size()};
}

std::vector<GilbertElliott> random_chains(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GilbertElliott> out;
  for (int i = 0; i < count; ++i) out.push_back({0.01 + 0.98 * rng.uniform(), 0.01 + 0.98 * rng.uniform()});
  return out;
}

}  // namespace

TEST(TransitionMatrix, RejectsRowsThatDoNotSumToOne) {
  EXPECT_THROW((TransitionMatrix{{0.5, 0.4}, {0.5, 0.5}}), MalformedMatrixError);
  EXPECT_THROW((TransitionMatrix{{1.1, -0.1}, {0.5, 0.5}}), MalformedMatrixError);
  EXPECT_NO_THROW((TransitionMatrix{{0.3, 0.7}, {1.0, 0.0}}));
}

TEST(ArmModel, RewardsMustLieInUnitInterval) {
  const TransitionMatrix P{{0.5, 0.5}, {0.5, 0.5}};
  EXPECT_THROW(ArmModel(P, P, {0.0, 1.5}), ContractViolation);
  EXPECT_THROW(ArmModel(P, P, {0.0}), ContractViolation);
  EXPECT_THROW(ArmModel(P, TransitionMatrix{{1.0}}, {0.0, 1.0}), ContractViolation);
}

TEST(GilbertElliott, ProbabilitiesMustBeOpen) {
  EXPECT_THROW((GilbertElliott{0.0, 0.5}.matrix()), ContractViolation);
  EXPECT_THROW((GilbertElliott{0.5, 1.0}.matrix()), ContractViolation);
  const auto arm = GilbertElliott{0.3, 0.7}.arm();
  EXPECT_EQ(arm.active(), arm.passive());
  EXPECT_EQ(arm.rewards(), (std::vector<double>{0.0, 1.0}));
  EXPECT_DOUBLE_EQ(arm.active()(0, 1), 0.3);
  EXPECT_DOUBLE_EQ(arm.active()(1, 1), 0.7);
}

TEST(ValidateChain, SpecExamples) {
  EXPECT_FALSE(validate_chain(TransitionMatrix{{1.0, 0.0}, {0.0, 1.0}}));
  EXPECT_TRUE(validate_chain(GilbertElliott{0.3, 0.7}.matrix()));
  EXPECT_FALSE(validate_chain(TransitionMatrix{{0.0, 1.0}, {1.0, 0.0}}));
}

TEST(ValidateChain, MalformedIsDistinctFromReducible) {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(validate_chain(bad), MalformedMatrixError);
  Eigen::MatrixXd reducible(3, 3);
  reducible << 0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0;
  EXPECT_FALSE(validate_chain(reducible));
  // Periodic with period 3.
  Eigen::MatrixXd cycle(3, 3);
  cycle << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  EXPECT_FALSE(validate_chain(cycle));
  // Irreducible, aperiodic, with zero entries.
  Eigen::MatrixXd sparse(3, 3);
  sparse << 0, 1, 0, 0, 0.5, 0.5, 1, 0, 0;
  EXPECT_TRUE(validate_chain(sparse));
}

TEST(StationaryDistribution, SpecExamples) {
  auto p = stationary_distribution(GilbertElliott{0.3, 0.7}.matrix());
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
  p = stationary_distribution(GilbertElliott{0.5, 0.5}.matrix());
  EXPECT_NEAR(p[1], 0.5, 1e-12);
  p = stationary_distribution(GilbertElliott{0.4, 0.6}.matrix());
  EXPECT_NEAR(p[1], 0.4 / (1 + 0.4 - 0.6), 1e-12);
  p = stationary_distribution(GilbertElliott{0.2, 0.6}.matrix());
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-12);
}

TEST(StationaryDistribution, ReducibleChainThrows) {
  EXPECT_THROW(stationary_distribution(TransitionMatrix{{1.0, 0.0}, {0.0, 1.0}}), ReducibleChainError);
  EXPECT_THROW(stationary_distribution(TransitionMatrix{{0.0, 1.0}, {1.0, 0.0}}), ReducibleChainError);
}

TEST(StationaryDistribution, FixedPointOnRandomChains) {
  for (const auto& ge : random_chains(100, 11)) {
    const auto P = ge.matrix();
    const auto p = stationary_distribution(P);
    Eigen::RowVectorXd v = Eigen::Map<const Eigen::RowVectorXd>(p.data(), 2);
    EXPECT_LE((v * P.matrix() - v).lpNorm<1>(), 1e-10);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    // Two-state closed form as an independent check.
    EXPECT_NEAR(p[1], ge.p01 / (1 + ge.p01 - ge.p11), 1e-10);
  }
}

TEST(NStepDistribution, SpecExamples) {
  const auto arm = GilbertElliott{0.3, 0.7}.arm();
  auto d = n_step_distribution(arm, 1, 1);
  EXPECT_DOUBLE_EQ(d[1], 0.7);
  d = n_step_distribution(arm, 1, 2);
  EXPECT_NEAR(d[1], 0.58, 1e-12);
  d = n_step_distribution(arm, 1, 50);
  EXPECT_NEAR(d[0], 0.5, 1e-9);
  EXPECT_NEAR(d[1], 0.5, 1e-9);
  EXPECT_THROW(n_step_distribution(arm, 1, 0), ContractViolation);
  EXPECT_THROW(n_step_distribution(arm, 2, 1), ContractViolation);
}

TEST(NStepDistribution, OneActiveThenPassive) {
  const TransitionMatrix A{{0.9, 0.1}, {0.2, 0.8}};
  const TransitionMatrix P{{0.6, 0.4}, {0.3, 0.7}};
  const ArmModel arm(A, P, {0.0, 1.0});
  for (State s = 0; s < 2; ++s) {
    for (std::int64_t n = 1; n <= 64; ++n) {
      const auto want = naive_n_step(arm, s, n);
      const auto got = n_step_distribution(arm, s, n);
      const auto cached = arm.predictive(s, n);
      for (int j = 0; j < 2; ++j) {
        EXPECT_NEAR(got[j], want[j], 1e-12) << "s=" << s << " n=" << n;
        EXPECT_NEAR(cached[j], want[j], 1e-12) << "s=" << s << " n=" << n;
      }
    }
  }
}

TEST(NStepDistribution, CachedMatchesOracleOnRandomChains) {
  for (const auto& ge : random_chains(50, 5)) {
    const auto arm = ge.arm();
    for (State s = 0; s < 2; ++s) {
      for (std::int64_t n : {1, 2, 3, 10, 64, 500, 20'000}) {
        const auto want = n_step_distribution(arm, s, n);
        const auto got = arm.predictive(s, n);
        EXPECT_NEAR(got[0], want[0], 1e-12);
        EXPECT_NEAR(got[1], want[1], 1e-12);
        EXPECT_NEAR(got[0] + got[1], 1.0, 1e-12);
      }
    }
  }
}

TEST(MixingTime, SpecExamples) {
  EXPECT_EQ(mixing_time(GilbertElliott{0.5, 0.5}.matrix(), 0.25), 1);
  EXPECT_EQ(mixing_time(GilbertElliott{0.5, 0.5}.matrix(), 1e-6), 1);
  EXPECT_EQ(mixing_time(GilbertElliott{0.3, 0.7}.matrix(), 0.25), 2);
  EXPECT_THROW(mixing_time(GilbertElliott{0.3, 0.7}.matrix(), 0.0), ContractViolation);
  EXPECT_THROW(mixing_time(GilbertElliott{0.3, 0.7}.matrix(), 1.0), ContractViolation);
}

TEST(MixingTime, MatchesTwoStateClosedForm) {
  // For two states the L1 gap from state s after t steps is
  // 2 * max(pi) * |lambda|^t up to the start state, lambda = p11 - p01.
  for (const auto& ge : random_chains(100, 3)) {
    const double lambda = ge.p11 - ge.p01;
    const double pi1 = ge.p01 / (1 + ge.p01 - ge.p11);
    const double c = 2.0 * std::max(pi1, 1.0 - pi1);
    for (double eps : {0.25, 0.1}) {
      int t = 1;
      while (c * std::pow(std::abs(lambda), t) > eps) ++t;
      EXPECT_EQ(mixing_time(ge.matrix(), eps), t) << ge.p01 << "," << ge.p11;
    }
    EXPECT_GE(mixing_time(ge.matrix(), 0.1), mixing_time(ge.matrix(), 0.25));
  }
}

TEST(HorizonMixingTime, SpecExamples) {
  EXPECT_EQ(horizon_mixing_time(1, 2), 1);
  EXPECT_EQ(horizon_mixing_time(2, 2000), 22);
  EXPECT_EQ(horizon_mixing_time(3, 1024), 30);
  EXPECT_EQ(horizon_mixing_time(7, 10'000), 98);
  EXPECT_EQ(horizon_mixing_time(1, 1025), 11);
  EXPECT_THROW(horizon_mixing_time(1, 1), ContractViolation);
}

TEST(MaxQuarterMixingTime, GridOfPresets) {
  std::vector<ArmModel> arms;
  for (int a = 1; a <= 9; ++a)
    for (int b = 1; b <= 9; ++b) arms.push_back(GilbertElliott{a / 10.0, b / 10.0}.arm());
  EXPECT_EQ(max_quarter_mixing_time(arms), 7);
}

TEST(MixingInequality, CloseNessAfterLogFactorTimesQuarterMixing) {
  for (const auto& ge : random_chains(100, 17)) {
    const auto arm = ge.arm();
    const int tq = mixing_time(arm.passive(), 0.25);
    for (double eps : {1.0 / 8, 1.0 / 32}) {
      const auto start = static_cast<std::int64_t>(std::log2(1.0 / eps) * tq) + 1;
      for (State s = 0; s < 2; ++s) {
        for (std::int64_t n = start; n < start + 12; ++n) {
          for (std::int64_t n2 = n + 1; n2 <= start + 12; ++n2) {
            const auto a = n_step_distribution(arm, s, n);
            const auto b = n_step_distribution(arm, s, n2);
            EXPECT_LE(std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]), 2.0 * 2 * eps);
          }
        }
      }
    }
    for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 64}) {
      EXPECT_LE(mixing_time(arm.passive(), eps), static_cast<int>(std::ceil(std::log2(1.0 / eps))) * tq);
    }
  }
}

TEST(Rng, DeriveSeedIsStableAndDecorrelated) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
  EXPECT_NE(derive_seed(1, 2, 0), derive_seed(1, 2, 1));
  Rng a(derive_seed(9, 0)), b(derive_seed(9, 0));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, CategoricalSkipsZeroWeights) {
  Rng rng(3);
  const std::vector<double> w = {0.0, 1.0, 0.0};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(rng.categorical(w), 1u);
  int counts[2] = {0, 0};
  const std::vector<double> w2 = {0.25, 0.75};
  for (int i = 0; i < 100'000; ++i) ++counts[rng.categorical(w2)];
  EXPECT_NEAR(counts[1] / 1e5, 0.75, 3 * std::sqrt(0.75 * 0.25 / 1e5));
}
