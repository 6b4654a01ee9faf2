#include <gtest/gtest.h>

#include <random>

#include "opdyn/analysis.hpp"
#include "support.hpp"

using namespace opdyn;
using opdyn::testing::m2;
using opdyn::testing::random_instance;
using opdyn::testing::v;

namespace {

Matrix S_for(const opdyn::testing::Instance& inst, PublicOpinion mode) {
  return compute_RS(build_P(inst.net, inst.params, mode), inst.params).S;
}

Matrix random_stochastic(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = u(rng) < 0.3 ? 0.0 : u(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.row(i).sum() == 0.0) a(i, i) = 1.0;
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

}  // namespace

TEST(Disagreement, Basics) {
  EXPECT_DOUBLE_EQ(disagreement(v({0.2, 0.9, 0.5})), 0.7);
  EXPECT_EQ(disagreement(v({0.4, 0.4})), 0.0);
  EXPECT_THROW(disagreement(Vector()), InvalidInput);
}

TEST(Ergodicity, KnownValues) {
  EXPECT_NEAR(ergodicity_coefficient(m2(.5, .5, .25, .75)), 0.25, 1e-15);
  EXPECT_NEAR(ergodicity_coefficient(m2(.3, .7, .3, .7)), 0.0, 1e-15);
  EXPECT_NEAR(ergodicity_coefficient(m2(1, 0, 0, 1)), 1.0, 1e-15);
  EXPECT_THROW(ergodicity_coefficient(m2(.5, .6, .5, .5)), InvalidInput);
}

TEST(Ergodicity, BoundsContraction) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 2 + trial % 7;
    const Matrix a = random_stochastic(n, rng);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = u(rng);
    ASSERT_LE(disagreement(a * x), ergodicity_coefficient(a) * disagreement(x) + 1e-14);
  }
}

TEST(Kappa, ReferenceValues) {
  Vector phi = v({0.1994, 0.5, 0.9437});
  EXPECT_NEAR(kappa(phi), 1.0 - (0.1994 / 0.9437) * (1.0 - 0.9437), 1e-15);
  EXPECT_NEAR(kappa(phi), 0.9881, 1e-4);
  EXPECT_THROW(kappa(v({0.0, 0.5})), InvalidInput);
  EXPECT_THROW(kappa(v({0.5, 1.0})), InvalidInput);
}

TEST(Kappa, BoundsErgodicityOfS) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = random_instance(2 + seed % 25, seed);
    const Matrix s = S_for(inst, PublicOpinion::global);
    EXPECT_LE(ergodicity_coefficient(s), kappa(inst.params.phi) + 1e-12) << "seed " << seed;
  }
}

TEST(Kappa, LowerBoundOnlyInGlobalMode) {
  EXPECT_THROW(private_gap_lower_bound(0.1, v({.5, .5}), PublicOpinion::local), InvalidInput);
  EXPECT_NEAR(private_gap_lower_bound(0.1613, v({0.1994, 0.9437}), PublicOpinion::global), 0.163,
              1e-3);
}

TEST(Inequalities, HoldOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto inst = random_instance(3 + seed % 20, 1000 + seed);
    const auto sys = solve_steady_state(inst.net, inst.params, PublicOpinion::local);
    const auto lim = limits(sys, inst.y0);
    EXPECT_TRUE(check_steady_inequalities(inst.y0, lim.y_star, lim.y_hat_star).all())
        << "seed " << seed;
  }
}

TEST(Inequalities, DetectBrokenChain) {
  const auto r = check_steady_inequalities(v({0, 1}), v({0.2, 0.8}), v({0.1, 0.7}));
  EXPECT_TRUE(r.upper_chain);
  EXPECT_FALSE(r.lower_chain);
  EXPECT_THROW(check_steady_inequalities(v({.5, .5}), v({.5, .5}), v({.5, .5})), InvalidInput);
}

TEST(Sensitivity, MatchesCentralDifferences) {
  for (PublicOpinion mode : {PublicOpinion::local, PublicOpinion::global}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto inst = random_instance(3 + seed, 50 + seed);
      const auto sys = compute_RS(build_P(inst.net, inst.params, mode), inst.params);
      for (std::size_t i = 0; i < inst.params.n(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double h = 1e-6;
        auto shifted = [&](double delta) {
          auto p = inst.params;
          p.phi[idx] += delta;
          return compute_RS(build_P(inst.net, p, mode), p).S;
        };
        const Matrix fd = (shifted(h) - shifted(-h)) / (2 * h);
        const Matrix exact = resilience_sensitivity(sys, inst.params, i);
        EXPECT_LT((fd - exact).cwiseAbs().maxCoeff(), 1e-5 * exact.cwiseAbs().maxCoeff());
      }
    }
  }
}

TEST(Sensitivity, SignPatternAndRowSums) {
  const auto inst = random_instance(12, 77);
  const auto sys = compute_RS(build_P(inst.net, inst.params, PublicOpinion::local), inst.params);
  for (std::size_t i = 0; i < 12; ++i) {
    const Matrix d = resilience_sensitivity(sys, inst.params, i);
    for (Eigen::Index r = 0; r < 12; ++r) {
      for (Eigen::Index c = 0; c < 12; ++c) {
        if (c == static_cast<Eigen::Index>(i)) {
          EXPECT_GT(d(r, c), 0.0);
        } else {
          EXPECT_LT(d(r, c), 0.0);
        }
      }
    }
    EXPECT_LT(d.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_THROW(resilience_sensitivity(sys, inst.params, 12), InvalidInput);
}

TEST(Report, GlobalModeCarriesKappaAndBound) {
  const auto inst = random_instance(10, 9);
  const auto sys = compute_RS(build_P(inst.net, inst.params, PublicOpinion::global), inst.params);
  const auto r = discrepancy_report(inst.y0, sys, inst.params);
  ASSERT_TRUE(r.kappa.has_value());
  ASSERT_TRUE(r.private_gap_lower_bound.has_value());
  EXPECT_LE(*r.private_gap_lower_bound, r.v_y_star);
  EXPECT_LT(r.v_yhat_star, r.v_y_star);
  EXPECT_LT(r.v_y_star, r.v_y0);
  ASSERT_TRUE(r.tau_S.has_value());
  EXPECT_LE(*r.tau_S, *r.kappa);
  EXPECT_TRUE(r.coincident_agents.empty());
  ASSERT_TRUE(r.inequalities.has_value());
  EXPECT_TRUE(r.inequalities->all());
}

TEST(Report, LocalModeOmitsKappaAndConsensusOmitsInequalities) {
  const auto inst = random_instance(6, 9);
  const auto sys = compute_RS(build_P(inst.net, inst.params, PublicOpinion::local), inst.params);
  const auto r = discrepancy_report(Vector::Constant(6, 0.25), sys, inst.params);
  EXPECT_FALSE(r.kappa.has_value());
  EXPECT_FALSE(r.inequalities.has_value());
  EXPECT_EQ(r.coincident_agents.size(), 6u);
}
