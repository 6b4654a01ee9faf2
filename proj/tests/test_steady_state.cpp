#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "opdyn/steady_state.hpp"
#include "support.hpp"

using namespace opdyn;
using opdyn::testing::m2;
using opdyn::testing::random_instance;
using opdyn::testing::v;

namespace {

SimulationResult iterate(const opdyn::testing::Instance& inst, PublicOpinion mode) {
  SimulationOptions opt;
  opt.mode = mode;
  opt.stride = 0;
  opt.stop = {200000, 1e-14};
  return simulate(inst.y0, inst.net, inst.params, opt);
}

}  // namespace

TEST(BuildP, TwoAgentBlocksHaveExpectedRowSums) {
  const auto net = build_network(m2(.5, .5, .5, .5), UniformConformity{});
  const AgentParameters p{v({.5, .5}), v({.3, .8}), std::nullopt};
  const auto sys = build_P(net, p, PublicOpinion::local);
  const Vector rows = sys.full().rowwise().sum();
  EXPECT_NEAR(rows[0], 0.5, 1e-15);
  EXPECT_NEAR(rows[1], 0.5, 1e-15);
  EXPECT_NEAR(rows[2], 1.0, 1e-15);
  EXPECT_NEAR(rows[3], 1.0, 1e-15);
  // P11 = L(Wd + Wo F): entry (0,1) is 0.5 * 0.5 * phi_1.
  EXPECT_NEAR(sys.P11(0, 1), 0.5 * 0.5 * 0.8, 1e-15);
  EXPECT_NEAR(sys.P11(0, 0), 0.25, 1e-15);
}

TEST(BuildP, GlobalModeUsesUniformAverage) {
  const auto inst = random_instance(6, 1);
  const auto sys = build_P(inst.net, inst.params, PublicOpinion::global);
  EXPECT_TRUE(sys.conformity.isApprox(Matrix::Constant(6, 6, 1.0 / 6.0)));
}

TEST(SteadyState, MatchesLongIteration) {
  for (PublicOpinion mode : {PublicOpinion::local, PublicOpinion::global}) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const auto inst = random_instance(2 + seed, 100 + seed);
      const auto sys = solve_steady_state(inst.net, inst.params, mode);
      const auto lim = limits(sys, inst.y0);
      const auto run = iterate(inst, mode);
      ASSERT_TRUE(run.converged);
      EXPECT_LT((run.final_state.y - lim.y_star).lpNorm<Eigen::Infinity>(), 1e-10);
      EXPECT_LT((run.final_state.y_hat - lim.y_hat_star).lpNorm<Eigen::Infinity>(), 1e-10);
    }
  }
}

TEST(SteadyState, OperatorsArePositiveAndStochastic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = random_instance(3 + seed % 20, seed);
    const auto sys = solve_steady_state(inst.net, inst.params, PublicOpinion::local);
    EXPECT_TRUE((sys.R.array() > 0).all());
    EXPECT_TRUE((sys.S.array() > 0).all());
    EXPECT_LT((sys.R.rowwise().sum().array() - 1).abs().maxCoeff(), 1e-12);
    EXPECT_LT((sys.S.rowwise().sum().array() - 1).abs().maxCoeff(), 1e-12);
    EXPECT_LT(sys.rho_P, 1.0);
  }
}

TEST(SteadyState, FullResilienceReducesToFriedkinJohnsen) {
  // phi = 1 means yh = y, leaving y* = (I - L W)^{-1} (I - L) y(0).
  auto inst = random_instance(8, 44);
  inst.params.phi = Vector::Ones(8);
  const auto sys = compute_RS(build_P(inst.net, inst.params, PublicOpinion::local), inst.params,
                              Strictness::relaxed);
  const Matrix lam = inst.params.lambda.asDiagonal();
  const Matrix eye = Matrix::Identity(8, 8);
  const Vector fj =
      (eye - lam * inst.net.influence()).partialPivLu().solve((eye - lam) * inst.y0);
  const auto lim = limits(sys, inst.y0);
  EXPECT_LT((lim.y_star - fj).lpNorm<Eigen::Infinity>(), 1e-13);
  EXPECT_LT((lim.y_hat_star - fj).lpNorm<Eigen::Infinity>(), 1e-13);
  EXPECT_TRUE(sys.S.isApprox(eye));
}

TEST(SteadyState, StrictModeRejectsBoundaryParameters) {
  auto inst = random_instance(5, 3);
  inst.params.lambda[2] = 1.0;
  EXPECT_THROW(solve_steady_state(inst.net, inst.params, PublicOpinion::local),
               AssumptionViolation);
  EXPECT_THROW(compute_RS(build_P(inst.net, inst.params, PublicOpinion::local), inst.params),
               AssumptionViolation);
}

TEST(SteadyState, PeriodicNetworkIsDiagnosed) {
  const auto net = build_network(m2(0, 1, 1, 0), UniformConformity{});
  const AgentParameters p{v({.5, .5}), v({.5, .5}), std::nullopt};
  const auto report = diagnose_assumptions(net, p);
  EXPECT_TRUE(report.strongly_connected);
  EXPECT_FALSE(report.aperiodic);
  EXPECT_FALSE(report.ok());
  EXPECT_THROW(solve_steady_state(net, p, PublicOpinion::local), AssumptionViolation);
}

TEST(SteadyState, SingularSystemIsReported) {
  // Every agent fully susceptible: I - P11 - P12 S is singular.
  auto inst = random_instance(4, 8);
  inst.params.lambda = Vector::Ones(4);
  EXPECT_THROW(compute_RS(build_P(inst.net, inst.params, PublicOpinion::local), inst.params,
                          Strictness::relaxed),
               AssumptionViolation);
}

TEST(SpectralRadius, AgreesWithDenseEigensolver) {
  for (PublicOpinion mode : {PublicOpinion::local, PublicOpinion::global}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto inst = random_instance(2 + seed, seed * 7);
      const Matrix p = build_P(inst.net, inst.params, mode).full();
      Eigen::EigenSolver<Matrix> es(p, false);
      const double dense = es.eigenvalues().cwiseAbs().maxCoeff();
      EXPECT_NEAR(spectral_radius(p), dense, 1e-9 * dense);
    }
  }
}

TEST(SpectralRadius, IsOneWhenFullySusceptible) {
  auto inst = random_instance(10, 5);
  inst.params.lambda = Vector::Ones(10);
  EXPECT_NEAR(spectral_radius(build_P(inst.net, inst.params, PublicOpinion::local).full()), 1.0,
              1e-10);
}

TEST(SpectralRadius, HandlesSignedAndReducibleMatrices) {
  EXPECT_NEAR(spectral_radius(m2(0, -2, 2, 0)), 2.0, 1e-12);
  EXPECT_NEAR(spectral_radius(m2(0.3, 0, 0, 0.7)), 0.7, 1e-9);
  EXPECT_NEAR(spectral_radius(m2(0, 1, 0, 0)), 0.0, 1e-9);
}

TEST(Consensus, SymmetricPairMeetsInTheMiddle) {
  const auto net = build_network(m2(.5, .5, .5, .5), UniformConformity{});
  const AgentParameters p{v({1, 1}), v({.4, .4}), std::nullopt};
  EXPECT_NEAR(consensus_value(net, p, v({1, 0}), PublicOpinion::local), 0.5, 1e-14);
}

TEST(Consensus, MatchesIteratedLimit) {
  for (PublicOpinion mode : {PublicOpinion::local, PublicOpinion::global}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto inst = random_instance(3 + seed, 300 + seed);
      inst.params.lambda = Vector::Ones(inst.y0.size());
      const double alpha = consensus_value(inst.net, inst.params, inst.y0, mode);
      const auto run = iterate(inst, mode);
      ASSERT_TRUE(run.converged);
      EXPECT_LT((run.final_state.y.array() - alpha).abs().maxCoeff(), 1e-9);
      EXPECT_LT((run.final_state.y_hat.array() - alpha).abs().maxCoeff(), 1e-9);
    }
  }
}

TEST(Consensus, RejectsPartialSusceptibility) {
  const auto inst = random_instance(5, 2);
  EXPECT_THROW(consensus_value(inst.net, inst.params, inst.y0, PublicOpinion::local),
               InvalidInput);
}

TEST(Limits, ValidatesInput) {
  const auto inst = random_instance(4, 2);
  const auto sys = build_P(inst.net, inst.params, PublicOpinion::local);
  EXPECT_THROW(limits(sys, inst.y0), InvalidInput);
  const auto done = compute_RS(sys, inst.params);
  EXPECT_THROW(limits(done, Vector::Zero(3)), InvalidInput);
}
