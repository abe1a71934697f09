#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "fixtures.hpp"

using namespace fxd;
using namespace fxd::testing;
using nlohmann::json;

namespace {

json reference_json() {
  std::ifstream in(FXD_REFERENCE_CONFIG);
  return json::parse(in);
}

std::string error_of(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST(LoadConfig, ShippedReferenceConfiguration) {
  const auto cfg = load_config(FXD_REFERENCE_CONFIG);
  ASSERT_EQ(cfg.size(), 4u);
  EXPECT_DOUBLE_EQ(cfg.total_demand(), 600.0);
  const auto g = reference_generators();
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(cfg.generators[i], g[i]);
  const auto ref = reference_loss();
  EXPECT_LT((cfg.loss.B() - ref.B()).cwiseAbs().maxCoeff(), 1e-18);
  EXPECT_LT((cfg.loss.B0() - ref.B0()).cwiseAbs().maxCoeff(), 1e-18);
  EXPECT_EQ(cfg.loss.B00(), 4.0);
  EXPECT_EQ(cfg.topology, LocalTopology::path(4));
  EXPECT_EQ(cfg.params.k1, 5.0);
  EXPECT_EQ(cfg.params.k2, 5.0);
  EXPECT_EQ(cfg.params.mu, 0.5);
  EXPECT_EQ(cfg.params.nu, 2.0);
  EXPECT_FALSE(cfg.disturbance.enabled);
}

TEST(LoadConfig, LosslessExample) {
  const auto cfg = load_config(FXD_LOSSLESS_CONFIG);
  EXPECT_EQ(cfg.size(), 2u);
  EXPECT_EQ(cfg.loss, KronLossModel::lossless(2));
}

TEST(LoadConfig, MissingFile) { EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError); }

TEST(ParseConfig, EmptyGeneratorListRejected) {
  auto j = reference_json();
  j["generators"] = json::array();
  EXPECT_FALSE(error_of(j).empty());
}

TEST(ParseConfig, AsymmetricLossMatrixNamesPair) {
  auto j = reference_json();
  j["loss"]["B"][0][1] = 0.0005;
  const auto msg = error_of(j);
  EXPECT_TRUE(contains(msg, "B[0][1]") && contains(msg, "B[1][0]")) << msg;
}

TEST(ParseConfig, SyntaxErrorReportsLineAndColumn) {
  const std::string text = "{\n  \"generators\": [\n    {\"a\": 1,, }\n  ]\n}\n";
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(contains(e.what(), "line 3")) << e.what();
  }
}

TEST(ParseConfig, FieldContextInMessages) {
  auto j = reference_json();
  j["generators"][2]["c"] = "cheap";
  EXPECT_TRUE(contains(error_of(j), "generators[2].c")) << error_of(j);
  j = reference_json();
  j["generators"][1].erase("b");
  EXPECT_TRUE(contains(error_of(j), "generators[1].b")) << error_of(j);
}

TEST(ParseConfig, DimensionMismatches) {
  auto j = reference_json();
  j["loss"]["B0"] = json::array({0.001, 0.001, 0.001});
  EXPECT_FALSE(error_of(j).empty());
  j = reference_json();
  j["topology"]["nodes"] = 5;
  EXPECT_FALSE(error_of(j).empty());
  j = reference_json();
  j["loss"]["B"][3] = json::array({0.0, 0.0, 0.0});
  EXPECT_FALSE(error_of(j).empty());
}

TEST(ParseConfig, SignInvariants) {
  auto j = reference_json();
  j["topology"]["edges"][1]["weight"] = -1.0;
  EXPECT_FALSE(error_of(j).empty());
  j = reference_json();
  j["generators"][0]["c"] = 0.0;
  EXPECT_FALSE(error_of(j).empty());
  j = reference_json();
  j["generators"][0]["p0"] = -5.0;
  EXPECT_FALSE(error_of(j).empty());
  j = reference_json();
  j["loss"]["B"][2][2] = -1e-4;
  EXPECT_FALSE(error_of(j).empty());
  j = reference_json();
  j["params"]["mu"] = 1.5;
  EXPECT_FALSE(error_of(j).empty());
}

TEST(ParseConfig, UnknownKeysRejected) {
  auto j = reference_json();
  j["params"]["gain"] = 3;
  EXPECT_TRUE(contains(error_of(j), "gain")) << error_of(j);
  j = reference_json();
  j["extras"] = json::object();
  EXPECT_FALSE(error_of(j).empty());
}

TEST(ParseConfig, DemandSharesDefaultToInitialPowers) {
  const auto cfg = parse_config(reference_json().dump());
  for (const auto& g : cfg.generators) EXPECT_EQ(g.d0, g.p0);
}

TEST(ParseConfig, ExplicitDemandShares) {
  auto j = reference_json();
  j["generators"][0]["d0"] = 160.0;
  EXPECT_EQ(parse_config(j.dump()).generators[0].d0, 160.0);
}

TEST(ParseConfig, ReproducingInitialisationSubtractsLossShares) {
  auto j = reference_json();
  j["params"]["initialization"] = "reproduce_p0";
  const auto cfg = parse_config(j.dump());
  const Vector p0 = vec({170, 110, 140, 180});
  const Vector shares = generator_losses(reference_loss(), p0);
  for (Eigen::Index i = 0; i < 4; ++i)
    EXPECT_DOUBLE_EQ(cfg.generators[static_cast<std::size_t>(i)].d0, p0[i] - shares[i]);
  const auto s = Simulator(cfg.system(), cfg.params).initial_state();
  EXPECT_LT((s.P - p0).lpNorm<Eigen::Infinity>(), 1e-9);

  j["generators"][0]["d0"] = 150.0;
  EXPECT_FALSE(error_of(j).empty());
}

TEST(ParseConfig, ScientificNotation) {
  const std::string text = "{\"generators\":[{\"a\":1,\"b\":2E0,\"c\":1.5e-1,\"p0\":1e2}],"
                           "\"loss\":{\"B\":[[1.0E-4]],\"B0\":[0],\"B00\":0},"
                           "\"topology\":{\"nodes\":1,\"edges\":[]}}";
  const auto cfg = parse_config(text);
  EXPECT_DOUBLE_EQ(cfg.generators[0].c, 0.15);
  EXPECT_DOUBLE_EQ(cfg.loss.B()(0, 0), 1e-4);
}

TEST(WriteConfig, RoundTripReference) {
  const auto cfg = load_config(FXD_REFERENCE_CONFIG);
  EXPECT_EQ(parse_config(write_config(cfg)), cfg);
}

TEST(WriteConfig, RoundTripRandomConfigs) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 6);
    RunConfig cfg;
    cfg.generators = random_generators(rng, n);
    for (auto& g : cfg.generators) g.d0 = g.p0 * (0.5 + u(rng));
    for (std::size_t i = 0; i < n; ++i) cfg.names.push_back("unit-" + std::to_string(i));
    cfg.loss = random_loss(rng, static_cast<Eigen::Index>(n));
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 0.1 + u(rng)});
    cfg.topology = LocalTopology(n, edges);
    cfg.params.k1 = 1 + u(rng);
    cfg.params.mu = 0.1 + 0.8 * u(rng);
    cfg.params.nu = 1.1 + u(rng);
    cfg.params.dt = 1e-4 * (1 + u(rng));
    cfg.params.stop_on_settle = trial % 2 == 0;
    cfg.disturbance = {trial % 3 == 0, u(rng), rng(), trial % 2 ? DisturbanceSpec::Kind::Sine
                                                                : DisturbanceSpec::Kind::Square};
    cfg.output.stride = 1 + static_cast<std::size_t>(trial);
    cfg.output.trajectory = trial % 4 != 0;
    EXPECT_EQ(parse_config(write_config(cfg)), cfg) << write_config(cfg);
  }
}
