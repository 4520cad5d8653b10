// Values frozen from tests/oracle/fusion_oracle.py (numpy, float64).
#include <gtest/gtest.h>

#include <cmath>

#include "mvg/fusion.hpp"

using namespace mvg;

namespace {

constexpr double kTol = 1e-12;

Matrix mat(std::size_t rows, std::size_t cols, std::initializer_list<double> v) {
  Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.values().begin());
  return m;
}

const Matrix kX = mat(3, 4, {0.5, -1.0, 0.25, 2.0, 1.5, 0.75, -0.5, -1.25, -2.0, 0.5, 1.0, 0.125});
const Matrix kW = mat(4, 4, {0.2, -0.1, 0.0, 0.3, 0.05, 0.4, -0.2, 0.1, -0.3, 0.1, 0.25, 0.0, 0.1, 0.0, 0.15, -0.35});
const std::vector<double> kA = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.2, -0.15};
const std::vector<double> kAInter = {-0.1, 0.35, 0.05, -0.3, 0.2, 0.1, -0.25, 0.4};

const Matrix kXT = mat(2, 4, {0.3, -0.6, 1.2, 0.4, -0.9, 0.2, 0.05, 0.7});
const Matrix kXR = mat(3, 4, {1.1, 0.0, -0.4, 0.6, 0.25, -1.3, 0.8, -0.2, -0.5, 0.45, 0.9, 1.0});

LayerParams cga_layer() {
  LayerParams L;
  L.w_q = mat(4, 4, {0.3, -0.2, 0.1, 0.0, 0.05, 0.25, -0.15, 0.2, -0.1, 0.4, 0.2, -0.3, 0.2, 0.1, -0.05, 0.15});
  L.w_k = mat(4, 4, {-0.25, 0.1, 0.3, 0.05, 0.2, -0.3, 0.1, 0.4, 0.15, 0.05, -0.2, 0.1, 0.0, 0.35, 0.25, -0.1});
  L.w_v = mat(4, 4, {0.4, 0.0, -0.1, 0.2, -0.2, 0.3, 0.05, 0.1, 0.1, -0.25, 0.35, 0.0, 0.05, 0.15, -0.3, 0.25});
  L.alpha = {0.0, std::log(3.0), -1.5, 0.8};
  return L;
}

FusionConfig small_config() {
  FusionConfig cfg;
  cfg.d_node = cfg.d_model = cfg.d_llm = 4;
  return cfg;
}

void expect_values(const Matrix& got, const std::vector<double>& want) {
  ASSERT_EQ(got.values().size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.values()[i], want[i], kTol) << "index " << i;
}

}  // namespace

TEST(FusionOracle, GatOnDirectedPath) {
  Adjacency adj;
  adj.in = {{{0, EdgeKind::Self}}, {{1, EdgeKind::Self}, {0, EdgeKind::Intra}}, {{2, EdgeKind::Self}, {1, EdgeKind::Intra}}};
  expect_values(gat_layer(kX, adj, kW, kA, {}, small_config()),
                {0.17500000000000002, -0.425, 0.5625, -0.6499999999999999, 0.26508975213398256, -0.17274869402484877,
                 0.07000935500089522, 0.12477186835225013, -0.24255298892882043, 0.33611823958197873,
                 -0.0898759031596899, 0.04385247412636417});
}

TEST(FusionOracle, GatPathFromGraph) {
  VideoGraph g;
  g.video_id = "p";
  for (NodeId i = 0; i < 3; ++i) g.nodes.push_back({i, 0, "n", std::nullopt, {}, std::vector<double>(4, 0.0)});
  g.intra_edges = {{0, 1, "a"}, {1, 2, "b"}};
  const auto adj = Adjacency::from_graph(g);
  const auto direct = gat_layer(kX, adj, kW, kA, {}, small_config());
  EXPECT_NEAR(direct(2, 3), 0.04385247412636417, kTol);
  EXPECT_NEAR(direct(1, 0), 0.26508975213398256, kTol);
}

TEST(FusionOracle, GatTwoHeadsWithSeparateInterVector) {
  auto cfg = small_config();
  cfg.gat_heads = 2;
  cfg.separate_edge_types = true;
  Adjacency adj;
  adj.in = {{{0, EdgeKind::Self}, {2, EdgeKind::Inter}},
            {{1, EdgeKind::Self}, {0, EdgeKind::Intra}},
            {{2, EdgeKind::Self}, {1, EdgeKind::Intra}, {0, EdgeKind::Inter}}};
  expect_values(gat_layer(kX, adj, kW, kA, kAInter, cfg),
                {-0.23495754245326178, 0.02778892748569206, 0.4080232401698909, -0.6279318914528415,
                 0.26927733818824184, -0.16102345307292304, 0.08820632901814404, 0.09614492142267583,
                 -0.05226041331391321, 0.03136246937611048, 0.09468663344952896, -0.12631266817672662});
}

TEST(FusionOracle, CrossGraphAttentionOneHead) {
  std::vector<double> want = {0.6378727801889816, 0.350257781784122,  0.5510741357131895, 0.5910070788325651,
                              0.6158407524815115, 0.38058390097053135, 0.5210248725119,   0.6083959326144416};
  want.insert(want.end(), kXR.values().begin(), kXR.values().end());
  expect_values(cross_graph_attention(kXT, kXR, cga_layer(), small_config()), want);
}

TEST(FusionOracle, CrossGraphAttentionTwoHeads) {
  auto cfg = small_config();
  cfg.cga_heads = 2;
  std::vector<double> want = {0.6266283336483061, 0.35961273738777466, 0.5752206369003087, 0.5756267147438363,
                              0.6344353348917037, 0.3544039172409121,  0.537422811118049,  0.5973480418773114};
  want.insert(want.end(), kXR.values().begin(), kXR.values().end());
  expect_values(cross_graph_attention(kXT, kXR, cga_layer(), cfg), want);
}
