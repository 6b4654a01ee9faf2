#include <gtest/gtest.h>

#include <random>

#include "opdyn/io.hpp"
#include "support.hpp"

using namespace opdyn;
using opdyn::testing::random_instance;
using opdyn::testing::v;
using json = nlohmann::json;

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::stod(io::format_double(x)), x);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
}

TEST(NetworkJson, RoundTripPreservesMatrices) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = random_instance(7, seed, MirrorConformity{});
    const json j = json::parse(io::network_to_json(inst.net).dump());
    const auto back = io::network_from_json(j);
    EXPECT_LT((back.influence() - inst.net.influence()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((back.conformity() - inst.net.conformity()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(NetworkJson, RejectsUnknownFieldsAndMismatches) {
  EXPECT_THROW(io::network_from_json(json{{"w", {{1}}}, {"extra", 1}}), InvalidInput);
  EXPECT_THROW(io::network_from_json(json{{"n", 2}, {"w", {{1}}}}), InvalidInput);
  EXPECT_THROW(io::network_from_json(json{{"w", {{1}}}, {"m", {{1}}}}), InvalidInput);
  EXPECT_THROW(io::network_from_json(json{{"w", {{1}}}, {"m_mode", "explicit"}}), InvalidInput);
  EXPECT_THROW(io::network_from_json(json{{"w", {{1, 0}, {1}}}}), InvalidInput);
  const auto net = io::network_from_json(json{{"w", {{1, 1}, {2, 2}}}, {"m_mode", "mirror"}});
  EXPECT_DOUBLE_EQ(net.conformity()(1, 0), 0.5);
}

TEST(EdgeList, ParsesWithHeaderAndBlankLines) {
  const Matrix w = io::edge_list_from_csv("i,j,w\n0,0,1\n0,1,2\n\n1,0,3\r\n1,1,4\n");
  ASSERT_EQ(w.rows(), 2);
  EXPECT_EQ(w(0, 1), 2.0);
  EXPECT_EQ(w(1, 0), 3.0);
}

TEST(EdgeList, DeclaredSizeAddsIsolatedRows) {
  EXPECT_EQ(io::edge_list_from_csv("0,1,1\n1,0,1\n", 3).rows(), 3);
  EXPECT_THROW(io::edge_list_from_csv("0,4,1\n", 3), InvalidInput);
}

TEST(EdgeList, RejectsMalformedInput) {
  EXPECT_THROW(io::edge_list_from_csv(""), InvalidInput);
  EXPECT_THROW(io::edge_list_from_csv("0,1,1\n0,1,2\n"), InvalidInput);
  EXPECT_THROW(io::edge_list_from_csv("0,1,1\nx,1,2\n"), InvalidInput);
  EXPECT_THROW(io::edge_list_from_csv("0,1\n"), InvalidInput);
  EXPECT_THROW(io::edge_list_from_csv("0,-1,1\n"), InvalidInput);
}

TEST(Parameters, ParsesOptionalFields) {
  const auto f = io::parameters_from_json(
      json{{"lambda", {0.1, 0.2}}, {"phi", {0.5, 0.6}}, {"y0", {0, 1}}});
  EXPECT_EQ(f.params.n(), 2u);
  ASSERT_TRUE(f.y0.has_value());
  EXPECT_FALSE(f.params.threshold.has_value());
  EXPECT_THROW(io::parameters_from_json(json{{"lambda", {0.1}}}), InvalidInput);
  EXPECT_THROW(io::parameters_from_json(json{{"lambda", {0.1}}, {"phi", {2.0}}}), InvalidInput);
  EXPECT_THROW(io::parameters_from_json(json{{"lambda", {0.1}}, {"phi", {0.2}}, {"mu", 1}}),
               InvalidInput);
}

TEST(Trajectory, CsvHasOneRowPerAgentAndStep) {
  const std::vector<Snapshot> traj{{0, v({0.25, 1}), v({0.25, 1})}, {1, v({0.5, 0.75}), v({0.5, 0.5})}};
  const std::string csv = io::trajectory_csv(traj);
  EXPECT_EQ(csv, "t,agent,y,y_hat\n0,0,0.25,0.25\n0,1,1,1\n1,0,0.5,0.5\n1,1,0.75,0.5\n");
  const std::string dat = io::series_dat(traj, true);
  EXPECT_EQ(dat, "# t yhat0 yhat1\n0 0.25 1\n1 0.5 0.5\n");
}

TEST(Report, JsonCarriesEveryField) {
  const auto inst = random_instance(5, 3);
  const auto sys = solve_steady_state(inst.net, inst.params, PublicOpinion::global);
  const json j = io::report_to_json(discrepancy_report(inst.y0, sys, inst.params));
  for (const char* key : {"v_y0", "v_y_star", "v_yhat_star", "kappa", "private_gap_lower_bound",
                          "tau_S", "y_star", "y_hat_star", "per_agent_discrepancy",
                          "coincident_agents", "inequalities_hold"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["kappa"].is_number());
  EXPECT_TRUE(j["inequalities_hold"]["upper_chain"].get<bool>());
  const json m = io::matrices_to_json(sys);
  EXPECT_EQ(m["R"].size(), 5u);
  EXPECT_LT(m["rho_P"].get<double>(), 1.0);
}
