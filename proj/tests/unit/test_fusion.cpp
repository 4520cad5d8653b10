#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mvg/error.hpp"
#include "mvg/fusion.hpp"

using namespace mvg;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = dist(rng);
  return m;
}

FusionConfig config(std::size_t d_node, std::size_t d_model, std::size_t d_llm, std::size_t layers) {
  FusionConfig cfg;
  cfg.d_node = d_node;
  cfg.d_model = d_model;
  cfg.d_llm = d_llm;
  cfg.layers = layers;
  return cfg;
}

// A chain graph with one inter-frame pair so every edge kind is exercised.
GraphInput chain_input(const std::string& id, std::size_t nodes, std::size_t d_node, std::mt19937_64& rng) {
  VideoGraph g;
  g.video_id = id;
  for (NodeId i = 0; i < nodes; ++i) {
    Matrix f = random_matrix(1, d_node, rng);
    g.nodes.push_back({i, i / 2, "n", std::nullopt, {}, {f.values().begin(), f.values().end()}});
    if (i > 0) g.intra_edges.push_back({i - 1, i, "p"});
  }
  if (nodes >= 3) g.inter_edges = {{0, 2, 1}, {2, 0, 1}};
  return make_graph_input(g);
}

void expect_matrix_near(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.values().size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], tol) << "index " << i;
}

}  // namespace

TEST(ClassEmbeddings, ZeroAlphaIsOneHalf) {
  const auto ce = class_embeddings(std::vector<double>(4, 0.0));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(ce.target[i], 0.5);
    EXPECT_EQ(ce.related[i], 0.5);
  }
}

TEST(ClassEmbeddings, SumToOneIncludingExtremes) {
  std::vector<double> alpha = {-40.0, -5.0, -1e-9, 0.0, 0.3, 7.5, 40.0};
  const auto ce = class_embeddings(alpha);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    EXPECT_NEAR(ce.target[i] + ce.related[i], 1.0, 1e-15);
    EXPECT_GE(ce.target[i], 0.0);
    EXPECT_LE(ce.target[i], 1.0);
  }
  EXPECT_NEAR(ce.target[4], 1.0 / (1.0 + std::exp(-0.3)), 1e-15);
}

TEST(RmsNorm, AlternatingSigns) {
  const std::vector<double> x = {3, -3, 3, -3}, gain(4, 1.0);
  EXPECT_EQ(rms_norm(x, gain, 0.0), (std::vector<double>{1, -1, 1, -1}));
  const auto y = rms_norm(x, gain, 1e-6);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], i % 2 ? -1.0 : 1.0, 1e-7);
}

TEST(RmsNorm, ZeroVectorStaysZero) {
  const std::vector<double> x(5, 0.0), gain(5, 2.0);
  EXPECT_EQ(rms_norm(x, gain, 1e-6), x);
  EXPECT_EQ(rms_norm(x, gain, 0.0), x);
}

TEST(RmsNorm, UnitRmsOnRandomRows) {
  std::mt19937_64 rng(3);
  const auto m = random_matrix(20, 9, rng, 5.0);
  const auto y = rms_norm_rows(m, std::vector<double>(9, 1.0), 0.0);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double ms = 0.0;
    for (double v : y.row(r)) ms += v * v;
    EXPECT_NEAR(std::sqrt(ms / 9.0), 1.0, 1e-12);
  }
}

TEST(RmsNorm, GainScalesElementwise) {
  const auto y = rms_norm(std::vector<double>{2, 2}, std::vector<double>{0.5, -3}, 0.0);
  EXPECT_EQ(y, (std::vector<double>{0.5, -3}));
}

TEST(Gat, IsolatedNodeWithIdentityWeightKeepsFeatures) {
  std::mt19937_64 rng(5);
  const auto x = random_matrix(3, 4, rng);
  const auto cfg = config(4, 4, 4, 1);
  std::vector<double> attn(8, 0.7);
  AttentionStats stats;
  const auto y = gat_layer(x, Adjacency::self_only(3), Matrix::identity(4), attn, {}, cfg, &stats);
  expect_matrix_near(y, x, 1e-15);
  EXPECT_EQ(stats.rows, 3u);
  EXPECT_LE(stats.max_row_error, 1e-15);
}

TEST(Gat, SymmetricIdenticalNodesGiveIdenticalRows) {
  Matrix x(2, 3);
  for (std::size_t c = 0; c < 3; ++c) x(0, c) = x(1, c) = 0.25 * static_cast<double>(c + 1);
  Adjacency adj;
  adj.in = {{{0, EdgeKind::Self}, {1, EdgeKind::Intra}}, {{1, EdgeKind::Self}, {0, EdgeKind::Intra}}};
  std::mt19937_64 rng(8);
  const auto w = random_matrix(3, 3, rng);
  std::vector<double> attn = {0.1, -0.4, 0.3, 0.9, 0.2, -0.6};
  const auto y = gat_layer(x, adj, w, attn, {}, config(3, 3, 3, 1));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(y(0, c), y(1, c));
}

TEST(Gat, DuplicateParallelEdgesCollapse) {
  VideoGraph g;
  g.video_id = "d";
  for (NodeId i = 0; i < 2; ++i) g.nodes.push_back({i, 0, "n", std::nullopt, {}, {}});
  g.intra_edges = {{0, 1, "holds"}, {0, 1, "carries"}};
  const auto adj = Adjacency::from_graph(g);
  ASSERT_EQ(adj.size(), 2u);
  EXPECT_EQ(adj.in[0].size(), 1u);
  ASSERT_EQ(adj.in[1].size(), 2u);
  EXPECT_EQ(adj.in[1][0].kind, EdgeKind::Self);
  EXPECT_EQ(adj.in[1][1].source, 0u);
}

TEST(Cga, IdenticalValuesAreReturnedVerbatim) {
  std::mt19937_64 rng(13);
  LayerParams layer;
  layer.w_q = random_matrix(4, 4, rng);
  layer.w_k = random_matrix(4, 4, rng);
  layer.w_v = Matrix(4, 4);
  layer.alpha.assign(4, 0.0);
  const auto xt = random_matrix(3, 4, rng), xr = random_matrix(6, 4, rng);
  AttentionStats stats;
  const auto y = cross_graph_attention(xt, xr, layer, config(4, 4, 4, 1), &stats);
  ASSERT_EQ(y.rows(), 9u);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y(r, c), 0.5, 1e-15);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(y(3 + r, c), xr(r, c));
  EXPECT_EQ(stats.rows, 3u);
  EXPECT_LE(stats.max_row_error, 1e-12);
}

TEST(ProjectTokens, LinearInInputs) {
  std::mt19937_64 rng(21);
  const auto w = random_matrix(5, 7, rng);
  std::vector<double> bias(7);
  for (auto& b : bias) b = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto a = random_matrix(2, 5, rng), b = random_matrix(2, 5, rng);
  Matrix mix(2, 5);
  for (std::size_t i = 0; i < mix.values().size(); ++i) mix.values()[i] = 2.0 * a.values()[i] - 0.5 * b.values()[i];
  const auto pa = project_tokens(a, w, bias), pb = project_tokens(b, w, bias), pm = project_tokens(mix, w, bias);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 7; ++c)
      EXPECT_NEAR(pm(r, c) - bias[c], 2.0 * (pa(r, c) - bias[c]) - 0.5 * (pb(r, c) - bias[c]), 1e-12);
}

TEST(ProjectTokens, ZeroInputAndBasisProbe) {
  std::mt19937_64 rng(22);
  const auto w = random_matrix(4, 6, rng);
  const std::vector<double> bias = {1, 2, 3, 4, 5, 6};
  const auto zero = project_tokens(Matrix(1, 4), w, bias);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(zero(0, c), bias[c]);
  const auto probe = project_tokens(Matrix::identity(4), w, bias);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(probe(r, c), w(r, c) + bias[c], 1e-15);
  EXPECT_THROW(project_tokens(Matrix(1, 3), w, bias), Error);
}

TEST(GfmForward, OutputShapesFollowNodeCounts) {
  std::mt19937_64 rng(30);
  const auto cfg = config(6, 8, 11, 2);
  const auto params = FusionParams::initialize(cfg, 4);
  const auto target = chain_input("t", 7, 6, rng);
  std::vector<GraphInput> related;
  for (int i = 0; i < 3; ++i) related.push_back(chain_input("r" + std::to_string(i), 5, 6, rng));
  const auto out = gfm_forward(target, related, params, cfg);
  ASSERT_EQ(out.graph_tokens.size(), 4u);
  EXPECT_EQ(out.graph_tokens[0].owner, "t");
  EXPECT_EQ(out.graph_tokens[0].values.rows(), 7u);
  for (std::size_t i = 1; i < 4; ++i) {
    EXPECT_EQ(out.graph_tokens[i].owner, related[i - 1].video_id);
    EXPECT_EQ(out.graph_tokens[i].values.rows(), 5u);
    EXPECT_EQ(out.graph_tokens[i].values.cols(), 11u);
  }
  EXPECT_LE(out.attention.max_row_error, 1e-12);
}

TEST(GfmForward, ZeroLayersIsProjectionOfLift) {
  std::mt19937_64 rng(31);
  const auto cfg = config(5, 3, 4, 0);
  const auto params = FusionParams::initialize(cfg, 9);
  EXPECT_TRUE(params.layers.empty());
  const auto target = chain_input("t", 4, 5, rng);
  const auto out = gfm_forward(target, {chain_input("r", 3, 5, rng)}, params, cfg);
  const auto lifted = project_tokens(target.features, params.lift_weight, params.lift_bias);
  expect_matrix_near(out.graph_tokens[0].values, project_tokens(lifted, params.proj_weight, params.proj_bias), 1e-14);
}

TEST(GfmForward, OneLayerWithoutRelatedComposesTheBlocks) {
  std::mt19937_64 rng(32);
  auto cfg = config(4, 4, 6, 1);
  auto params = FusionParams::initialize(cfg, 10);
  params.layers[0].alpha = {0.4, -0.2, 1.0, 0.0};
  params.layers[0].gain_gat = {1.0, 0.5, 2.0, 1.5};
  const auto target = chain_input("t", 5, 4, rng);
  const auto& L = params.layers[0];

  Matrix x = project_tokens(target.features, params.lift_weight, params.lift_bias);
  const auto g = gat_layer(rms_norm_rows(x, L.gain_gat, cfg.rms_eps), target.adjacency, L.gat_weight, L.gat_attn,
                           L.gat_attn_inter, cfg);
  for (std::size_t i = 0; i < x.values().size(); ++i) x.values()[i] += g.values()[i];
  const auto c = cross_graph_attention(rms_norm_rows(x, L.gain_cga, cfg.rms_eps), Matrix(0, 4), L, cfg);
  ASSERT_EQ(c.rows(), x.rows());
  for (std::size_t i = 0; i < x.values().size(); ++i) x.values()[i] += c.values()[i];
  const auto expected = project_tokens(x, params.proj_weight, params.proj_bias);

  const auto out = gfm_forward(target, {}, params, cfg);
  ASSERT_EQ(out.graph_tokens.size(), 1u);
  expect_matrix_near(out.graph_tokens[0].values, expected, 1e-12);
}

TEST(GfmForward, RelatedOrderDoesNotChangeTargetTokens) {
  std::mt19937_64 rng(33);
  const auto cfg = config(4, 4, 5, 2);
  const auto params = FusionParams::initialize(cfg, 12);
  const auto target = chain_input("t", 4, 4, rng);
  std::vector<GraphInput> related = {chain_input("a", 3, 4, rng), chain_input("b", 5, 4, rng),
                                     chain_input("c", 2, 4, rng)};
  const auto base = gfm_forward(target, related, params, cfg);
  std::swap(related[0], related[2]);
  const auto swapped = gfm_forward(target, related, params, cfg);
  expect_matrix_near(swapped.graph_tokens[0].values, base.graph_tokens[0].values, 1e-12);
  EXPECT_EQ(swapped.graph_tokens[1].owner, "c");
}

TEST(FusionParams, LayerTensorCensusHasNoFeedForward) {
  auto cfg = config(3, 4, 5, 2);
  auto params = FusionParams::initialize(cfg, 1);
  std::set<std::string> layer0;
  for (const auto& t : tensors(std::as_const(params)))
    if (t.name.starts_with("layers.0.")) layer0.insert(t.name.substr(9));
  EXPECT_EQ(layer0, (std::set<std::string>{"gat.weight", "gat.attn", "cga.w_q", "cga.w_k", "cga.w_v", "cga.alpha",
                                           "norm.gat_gain", "norm.cga_gain"}));
  cfg.separate_edge_types = true;
  params = FusionParams::initialize(cfg, 1);
  std::size_t inter = 0;
  for (const auto& t : tensors(std::as_const(params))) inter += t.name.ends_with("gat.attn_inter");
  EXPECT_EQ(inter, 2u);
}

TEST(FusionParams, InitializationDefaults) {
  const auto cfg = config(4, 4, 3, 1);
  const auto p = FusionParams::initialize(cfg, 2);
  EXPECT_EQ(p.lift_weight, Matrix::identity(4));
  EXPECT_EQ(p.layers[0].alpha, std::vector<double>(4, 0.0));
  EXPECT_EQ(p.layers[0].gain_cga, std::vector<double>(4, 1.0));
  EXPECT_EQ(p.proj_bias, std::vector<double>(3, 0.0));
  const double bound = 1.0 / std::sqrt(4.0);
  for (double v : p.proj_weight.values()) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(encode_checkpoint(p), encode_checkpoint(FusionParams::initialize(cfg, 2)));
  EXPECT_NE(encode_checkpoint(p), encode_checkpoint(FusionParams::initialize(cfg, 3)));
}

TEST(FusionConfig, RejectsIndivisibleHeads) {
  auto cfg = config(4, 6, 4, 1);
  cfg.cga_heads = 4;
  EXPECT_THROW(cfg.check(), Error);
  cfg.cga_heads = 3;
  EXPECT_NO_THROW(cfg.check());
}

TEST(Gradients, LinearModelMatchesClosedForm) {
  std::mt19937_64 rng(40);
  const auto cfg = config(3, 4, 2, 0);
  auto params = FusionParams::initialize(cfg, 5);
  params.proj_bias = {0.3, -0.1};
  const auto target = chain_input("t", 3, 3, rng);
  const auto grad = gfm_gradients(target, {}, params, cfg);
  const auto y = gfm_forward(target, {}, params, cfg).graph_tokens[0].values;
  double loss = 0.0;
  for (double v : y.values()) loss += v * v;
  EXPECT_NEAR(grad.loss, loss, 1e-12);
  for (std::size_t c = 0; c < 2; ++c) {
    double db = 0.0;
    for (std::size_t r = 0; r < y.rows(); ++r) db += 2.0 * y(r, c);
    EXPECT_NEAR(grad.gradients.proj_bias[c], db, 1e-12);
  }
  const auto h = project_tokens(target.features, params.lift_weight, params.lift_bias);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double dw = 0.0;
      for (std::size_t r = 0; r < y.rows(); ++r) dw += 2.0 * h(r, i) * y(r, c);
      EXPECT_NEAR(grad.gradients.proj_weight(i, c), dw, 1e-12);
    }
}

TEST(Gradients, MatchCentralDifferencesOnSmallModel) {
  std::mt19937_64 rng(41);
  auto cfg = config(3, 4, 3, 2);
  cfg.separate_edge_types = true;
  cfg.cga_heads = 2;
  auto params = FusionParams::initialize(cfg, 6);
  for (auto& t : tensors(params))
    if (t.name.ends_with("alpha") || t.name.ends_with("bias"))
      for (auto& v : t.values) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  const auto target = chain_input("t", 4, 3, rng);
  const std::vector<GraphInput> related = {chain_input("a", 3, 3, rng), chain_input("b", 2, 3, rng)};
  const auto grad = gfm_gradients(target, related, params, cfg);
  const auto analytic = tensors(std::as_const(grad.gradients));
  auto views = tensors(params);
  const double h = 1e-6;
  for (std::size_t t = 0; t < views.size(); ++t) {
    for (std::size_t k = 0; k < views[t].values.size(); k += 3) {
      double& v = views[t].values[k];
      const double saved = v;
      v = saved + h;
      const double up = gfm_gradients(target, related, params, cfg).loss;
      v = saved - h;
      const double down = gfm_gradients(target, related, params, cfg).loss;
      v = saved;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic[t].values[k];
      EXPECT_LE(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}), 1e-4) << views[t].name << "[" << k << "]";
    }
  }
}

TEST(Gradients, AlphaGradientWithZeroInputs) {
  auto cfg = config(2, 2, 2, 1);
  auto params = FusionParams::initialize(cfg, 7);
  GraphInput target{"t", Adjacency::self_only(2), Matrix(2, 2)};
  GraphInput related{"r", Adjacency::self_only(1), Matrix(1, 2)};
  const auto grad = gfm_gradients(target, {related}, params, cfg);
  auto& alpha = params.layers[0].alpha;
  for (std::size_t k = 0; k < 2; ++k) {
    const double saved = alpha[k];
    alpha[k] = saved + 1e-6;
    const double up = gfm_gradients(target, {related}, params, cfg).loss;
    alpha[k] = saved - 1e-6;
    const double down = gfm_gradients(target, {related}, params, cfg).loss;
    alpha[k] = saved;
    EXPECT_NEAR(grad.gradients.layers[0].alpha[k], (up - down) / 2e-6, 1e-6);
  }
}

TEST(Checkpoint, FileRoundTripAndErrors) {
  const auto cfg = config(3, 4, 2, 1);
  const auto params = FusionParams::initialize(cfg, 8);
  const auto path = testing::TempDir() + "mvg_fusion_ckpt.gfmp";
  save_checkpoint(path, params);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(params));
  EXPECT_EQ(back.shape_config(FusionConfig{}).d_llm, 2u);
  EXPECT_EQ(back.shape_config(FusionConfig{}).layers, 1u);
  try {
    load_checkpoint(path + ".missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
  auto broken = params;
  broken.layers[0].alpha.pop_back();
  try {
    decode_checkpoint(encode_checkpoint(broken), "bad.gfmp");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
    EXPECT_EQ(e.file(), "bad.gfmp");
  }
}
