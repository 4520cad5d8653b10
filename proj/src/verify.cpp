#include "mvg/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "binary_io.hpp"
#include "mvg/error.hpp"
#include "mvg/formats.hpp"
#include "mvg/pipeline.hpp"
#include "mvg/reference.hpp"
#include "rng.hpp"

namespace mvg {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::Rng;

namespace {

constexpr double kClassEmbeddingTol = 1e-15;
constexpr double kPermutationTol = 1e-9;
constexpr double kOracleTol = 1e-10;
constexpr double kGradientStep = 1e-5;
constexpr double kGradientTol = 1e-4;
// Relative error is |a - f| / max(|a|, |f|, floor).
constexpr double kGradientFloor = 1e-6;
constexpr double kAttentionTol = 1e-9;
constexpr double kRetrievalTol = 1e-12;
constexpr double kContextLengthTol = 0.10;

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- random fusion instances ------------------------------------------------

VideoGraph random_graph(Rng& rng, const std::string& id, std::size_t n, std::size_t dim) {
  VideoGraph g;
  g.video_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    GraphNode node;
    node.node_id = static_cast<NodeId>(i);
    node.keyframe = static_cast<Keyframe>(i / 2);
    node.label = "n" + std::to_string(i);
    node.feature.resize(dim);
    for (auto& x : node.feature) x = rng.symmetric();
    g.nodes.push_back(std::move(node));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && rng.chance(0.3)) g.intra_edges.push_back({NodeId(i), NodeId(j), "p"});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.chance(0.2)) {
        g.inter_edges.push_back({NodeId(i), NodeId(j), 1});
        g.inter_edges.push_back({NodeId(j), NodeId(i), 1});
      }
  return g;
}

std::vector<reference::Edge> reference_edges(const VideoGraph& g) {
  std::vector<reference::Edge> out;
  for (const auto& e : g.intra_edges) out.push_back({e.src, e.dst, false});
  for (const auto& e : g.inter_edges) out.push_back({e.src, e.dst, true});
  return out;
}

std::size_t random_divisor(Rng& rng, std::size_t d) {
  std::vector<std::size_t> divs;
  for (std::size_t h = 1; h <= 4; ++h)
    if (d % h == 0) divs.push_back(h);
  return rng.pick(divs);
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (auto& x : m.values()) x = scale * rng.symmetric();
  return m;
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.symmetric();
  return v;
}

FusionParams random_params(Rng& rng, const FusionConfig& c) {
  FusionParams p = FusionParams::initialize(c, rng.below(1u << 30));
  for (auto& t : tensors(p))
    for (auto& v : t.values) v += 0.3 * rng.symmetric();
  return p;
}

struct FusionInstance {
  FusionConfig config;
  GraphInput target;
  std::vector<GraphInput> related;
  FusionParams params;
};

FusionInstance random_instance(Rng& rng, std::size_t related_count, std::size_t max_nodes, bool tiny) {
  FusionInstance in;
  in.config.d_node = tiny ? 3 : std::vector<std::size_t>{3, 5, 8}[rng.below(3)];
  in.config.d_model = tiny ? 4 : std::vector<std::size_t>{4, 6, 8}[rng.below(3)];
  in.config.d_llm = tiny ? 3 : std::vector<std::size_t>{3, 6}[rng.below(2)];
  in.config.layers = 2;
  in.config.gat_heads = random_divisor(rng, in.config.d_model);
  in.config.cga_heads = random_divisor(rng, in.config.d_model);
  in.config.separate_edge_types = rng.chance(0.5);
  in.target = make_graph_input(random_graph(rng, "t", 1 + rng.below(max_nodes), in.config.d_node));
  for (std::size_t r = 0; r < related_count; ++r)
    in.related.push_back(make_graph_input(random_graph(rng, "r" + std::to_string(r), 1 + rng.below(max_nodes),
                                                       in.config.d_node)));
  in.params = random_params(rng, in.config);
  return in;
}

// ---- criteria -----------------------------------------------------------------

Outcome context_length_accounting() {
  const AccountingConfig acc;
  const std::string question = "What is the person in the target video doing, and in what order?";
  const PromptVideo target{"target", std::nullopt, "", ""};
  std::vector<PromptVideo> related;
  for (int i = 0; i < 5; ++i) related.push_back({"related_" + std::to_string(i), std::nullopt, "", ""});

  AssemblyOptions single_opts;
  const auto single = assemble_prompt(acc.video_tokens(), target, {}, question, PromptTemplate::bundled(), single_opts);

  AssemblyOptions naive_opts;
  naive_opts.style = PromptStyle::Naive;
  const auto naive = assemble_prompt(acc.video_tokens(), target, related, question, PromptTemplate::bundled(), naive_opts);

  // Node counts typical of the generated corpus; their sum exceeds the cap.
  const std::size_t nodes[] = {41, 37, 44, 35, 39, 42};
  PromptVideo gtarget{"target", nodes[0], "", ""};
  std::vector<PromptVideo> grelated;
  for (int i = 0; i < 5; ++i) grelated.push_back({"related_" + std::to_string(i), nodes[i + 1], "", ""});
  const auto structured = assemble_prompt(acc.video_tokens(), gtarget, grelated, question);

  Outcome o;
  auto check = [&](const char* label, const AssembledPrompt& p, double expected) {
    const auto r = count_tokens(p, acc);
    if (!(r.totals == p.totals)) {
      o.passed = false;
      o.detail += std::string(label) + " totals disagree; ";
    }
    const double rel = std::abs(static_cast<double>(r.totals.total) - expected) / expected;
    if (rel > kContextLengthTol) o.passed = false;
    o.detail += std::string(label) + "=" + std::to_string(r.totals.total) + " (" + fmt("%.1f", expected / 1000.0) +
                "K, " + fmt("%+.1f%%", 100.0 * (static_cast<double>(r.totals.total) - expected) / expected) + ") ";
  };
  check("single", single, 2100.0);
  check("naive", naive, 12500.0);
  check("structured", structured, 2300.0);
  if (count_tokens(structured, acc).totals.graph != 200) {
    o.passed = false;
    o.detail += "graph cap not applied; ";
  }
  return o;
}

Outcome class_embedding_sum(Rng& rng) {
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto alpha = random_vector(rng, 1 + rng.below(64), 10.0);
    const auto ce = class_embeddings(alpha);
    for (std::size_t c = 0; c < alpha.size(); ++c) worst = std::max(worst, std::abs(ce.target[c] + ce.related[c] - 1.0));
  }
  const double zero[] = {0.0};
  const double ln3[] = {std::log(3.0)};
  const double s0 = class_embeddings(zero).target[0];
  const double s3 = class_embeddings(ln3).target[0];
  Outcome o;
  o.passed = worst <= kClassEmbeddingTol && s0 == 0.5 && s3 == 0.75;
  o.detail = "max |ce_tar + ce_rel - 1| = " + fmt("%.3g", worst) + ", sigma(0) = " + fmt("%.17g", s0) +
             ", sigma(ln 3) = " + fmt("%.17g", s3);
  return o;
}

Outcome permutation_invariance(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    FusionInstance in = random_instance(rng, 2 + rng.below(4), 6, false);
    const auto base = gfm_forward(in.target, in.related, in.params, in.config);
    std::vector<std::size_t> order(in.related.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    if (std::is_sorted(order.begin(), order.end())) std::reverse(order.begin(), order.end());
    std::vector<GraphInput> permuted;
    for (auto i : order) permuted.push_back(in.related[i]);
    const auto moved = gfm_forward(in.target, permuted, in.params, in.config);
    worst = std::max(worst, max_abs_diff(base.graph_tokens[0].values, moved.graph_tokens[0].values));
  }
  return {worst < kPermutationTol, "100 instances, max-abs target change " + fmt("%.3g", worst)};
}

Outcome pass_through(Rng& rng) {
  std::size_t rows = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = std::vector<std::size_t>{2, 4, 6, 8, 12, 16}[rng.below(6)];
    FusionConfig cfg;
    cfg.d_model = d;
    cfg.cga_heads = random_divisor(rng, d);
    LayerParams layer;
    layer.w_q = random_matrix(rng, d, d);
    layer.w_k = random_matrix(rng, d, d);
    layer.w_v = random_matrix(rng, d, d);
    layer.alpha = random_vector(rng, d, 3.0);
    const Matrix xt = random_matrix(rng, 1 + rng.below(10), d);
    const Matrix xr = random_matrix(rng, rng.below(11), d);
    const Matrix out = cross_graph_attention(xt, xr, layer, cfg);
    if (!(out.slice_rows(xt.rows(), xr.rows()) == xr))
      return {false, "instance " + std::to_string(t) + ": related rows changed"};
    rows += xr.rows();
  }
  return {true, "200 instances, " + std::to_string(rows) + " related rows bitwise equal"};
}

Outcome oracle_equivalence(Rng& rng) {
  double gat_worst = 0.0, cga_worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = std::vector<std::size_t>{2, 4, 6, 8, 12, 16}[rng.below(6)];
    FusionConfig cfg;
    cfg.d_model = d;
    cfg.gat_heads = random_divisor(rng, d);
    cfg.cga_heads = random_divisor(rng, d);
    const bool separate = rng.chance(0.5);

    const VideoGraph g = random_graph(rng, "g", 1 + rng.below(10), d);
    const Matrix x = random_matrix(rng, g.nodes.size(), d);
    const Matrix w = random_matrix(rng, d, d);
    const auto a = random_vector(rng, 2 * d);
    const auto a_inter = separate ? random_vector(rng, 2 * d) : std::vector<double>{};
    const Matrix fast = gat_layer(x, Adjacency::from_graph(g), w, a, a_inter, cfg);
    const Matrix slow = reference::gat(x, reference_edges(g), w, a, a_inter, cfg.gat_heads, cfg.leaky_slope);
    gat_worst = std::max(gat_worst, max_abs_diff(fast, slow));

    LayerParams layer;
    layer.w_q = random_matrix(rng, d, d);
    layer.w_k = random_matrix(rng, d, d);
    layer.w_v = random_matrix(rng, d, d);
    layer.alpha = random_vector(rng, d, 3.0);
    const Matrix xt = random_matrix(rng, 1 + rng.below(10), d);
    const Matrix xr = random_matrix(rng, rng.below(10), d);
    const Matrix cfast = cross_graph_attention(xt, xr, layer, cfg);
    const Matrix cslow = reference::cga(xt, xr, layer.w_q, layer.w_k, layer.w_v, layer.alpha, cfg.cga_heads);
    cga_worst = std::max(cga_worst, max_abs_diff(cfast, cslow));
  }
  return {gat_worst <= kOracleTol && cga_worst <= kOracleTol,
          "200 instances, GAT max-abs " + fmt("%.3g", gat_worst) + ", CGA max-abs " + fmt("%.3g", cga_worst)};
}

Outcome gradient_check(Rng& rng, bool inject_fault) {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (int t = 0; t < 20; ++t) {
    FusionInstance in = random_instance(rng, 1 + rng.below(3), 4, true);
    GradientResult g = gfm_gradients(in.target, in.related, in.params, in.config);
    if (inject_fault) {
      auto views = tensors(g.gradients);
      views.back().values[0] = views.back().values[0] * 1.01 + 1e-3;
    }
    FusionParams probe = in.params;
    auto loss = [&] {
      const auto r = gfm_forward(in.target, in.related, probe, in.config);
      double s = 0.0;
      for (double v : r.graph_tokens[0].values.values()) s += v * v;
      return s;
    };
    auto pv = tensors(probe);
    const auto gv = tensors(std::as_const(g.gradients));
    for (std::size_t k = 0; k < pv.size(); ++k) {
      for (std::size_t e = 0; e < pv[k].values.size(); ++e) {
        const double fd = reference::central_difference(loss, pv[k].values[e], kGradientStep);
        const double an = gv[k].values[e];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), kGradientFloor});
        if (rel > worst) {
          worst = rel;
          worst_name = pv[k].name + "[" + std::to_string(e) + "]";
        }
        ++checked;
      }
    }
  }
  return {worst < kGradientTol, "20 instances, " + std::to_string(checked) + " entries, max relative error " +
                                    fmt("%.3g", worst) + " at " + worst_name};
}

// ---- structuring scenarios -----------------------------------------------------

using NodeRow = std::tuple<NodeId, Keyframe, std::string, std::optional<TrackId>>;
using IntraRow = std::tuple<NodeId, NodeId, std::string>;
using InterRow = std::tuple<NodeId, NodeId, TrackId>;

std::string compare_graph(const VideoGraph& g, const std::vector<NodeRow>& nodes, std::vector<IntraRow> intra,
                          std::vector<InterRow> inter) {
  std::vector<NodeRow> got_nodes;
  for (const auto& n : g.nodes) got_nodes.emplace_back(n.node_id, n.keyframe, n.label, n.track_id);
  std::vector<IntraRow> got_intra;
  for (const auto& e : g.intra_edges) got_intra.emplace_back(e.src, e.dst, e.predicate);
  std::vector<InterRow> got_inter;
  for (const auto& e : g.inter_edges) got_inter.emplace_back(e.src, e.dst, e.track_id);
  std::sort(got_intra.begin(), got_intra.end());
  std::sort(intra.begin(), intra.end());
  std::sort(got_inter.begin(), got_inter.end());
  std::sort(inter.begin(), inter.end());
  if (got_nodes != nodes) return g.video_id + ": node set differs";
  if (got_intra != intra) return g.video_id + ": intra-edge set differs";
  if (got_inter != inter) return g.video_id + ": inter-edge set differs";
  for (const auto& e : g.inter_edges)
    if (std::find(g.inter_edges.begin(), g.inter_edges.end(), InterEdge{e.dst, e.src, e.track_id}) ==
        g.inter_edges.end())
      return g.video_id + ": inter edges not closed under reversal";
  if (!validate_graph(g).ok()) return g.video_id + ": validator rejects graph";
  return {};
}

BoundingBox box(double x, double y, double w, double h, Keyframe kf) { return {x, y, w, h, kf}; }

std::string three_keyframe_scenario() {
  const std::vector<Triplet> triplets = {
      {"man", "holds", "cup", 4},  {"man", "cuts", "lime", 4},    {"man", "drinks", "cup", 14},
      {"woman", "takes", "cup", 24}, {"woman", "greets", "man", 24}, {"man", "drops", "lime", 14},
  };
  const auto man4 = box(10, 10, 50, 100, 4), cup4 = box(70, 60, 20, 20, 4), lime4 = box(100, 60, 15, 15, 4);
  const auto man14 = box(12, 10, 50, 100, 14), cup14 = box(72, 58, 20, 20, 14);
  const auto woman24 = box(200, 10, 50, 100, 24), cup24 = box(180, 60, 20, 20, 24), man24 = box(14, 12, 50, 100, 24);
  GroundingSet groundings = {
      {{0, Role::Subject}, man4},    {{0, Role::Object}, cup4},    {{1, Role::Subject}, man4},
      {{1, Role::Object}, lime4},    {{2, Role::Subject}, man14},  {{2, Role::Object}, cup14},
      {{3, Role::Subject}, woman24}, {{3, Role::Object}, cup24},   {{4, Role::Subject}, woman24},
      {{4, Role::Object}, man24},    {{5, Role::Subject}, man14},
  };
  const std::vector<Tracklet> tracks = {
      {1, {{4, man4}, {14, man14}, {24, man24}}},
      {2, {{4, cup4}, {14, box(73, 58, 20, 20, 14)}, {24, cup24}}},
  };
  const auto grounded = ground_triplets(triplets, groundings);
  if (grounded.size() != 5) return "grounding filter kept " + std::to_string(grounded.size()) + " of 6 triplets";
  SyntheticFeatureSource features(11, 8);
  GraphBuildOptions opts;
  opts.node_dim = 8;
  const auto g = build_video_graph(
      "three_keyframes", {4, 14, 24}, grounded, tracks,
      [&](Keyframe kf, const BoundingBox& b) { return features.feature(kf, b); }, opts);
  return compare_graph(g,
                       {{0, 4, "man", 1},
                        {1, 4, "cup", 2},
                        {2, 4, "lime", std::nullopt},
                        {3, 14, "man", 1},
                        {4, 14, "cup", 2},
                        {5, 24, "woman", std::nullopt},
                        {6, 24, "cup", 2},
                        {7, 24, "man", 1}},
                       {{0, 1, "holds"}, {0, 2, "cuts"}, {3, 4, "drinks"}, {5, 6, "takes"}, {5, 7, "greets"}},
                       {{0, 3, 1}, {3, 0, 1}, {3, 7, 1}, {7, 3, 1}, {1, 4, 2}, {4, 1, 2}, {4, 6, 2}, {6, 4, 2}});
}

std::string two_scene_scenario() {
  VideoBundle b;
  b.video_id = "two_scenes";
  FrameDescriptors d{Matrix(20, 4)};
  for (std::size_t f = 0; f < 20; ++f)
    for (std::size_t c = 0; c < 4; ++c) d.values(f, c) = f < 10 ? 0.2 : 0.8;
  b.descriptors = d;
  b.captions = std::vector<CaptionLine>{{4, "The girl kicks the ball and throws the frisbee."},
                                        {14, "The girl chases the dog. The dog holds the stick."}};
  const auto girl4 = box(10, 10, 40, 90, 4), ball4 = box(60, 80, 20, 20, 4);
  const auto girl14 = box(14, 10, 40, 90, 14), dog14 = box(100, 70, 50, 40, 14), stick14 = box(120, 60, 30, 8, 14);
  b.groundings = {{{0, Role::Subject}, girl4}, {{0, Role::Object}, ball4}, {{1, Role::Subject}, girl4},
                  {{2, Role::Subject}, girl14}, {{2, Role::Object}, dog14},  {{3, Role::Subject}, dog14},
                  {{3, Role::Object}, stick14}};
  b.tracklets = {{7, {{4, girl4}, {14, girl14}}}, {9, {{14, dog14}}}};
  b.features = std::make_shared<SyntheticFeatureSource>(5, 8);
  StructuringOptions opts;
  opts.graph.node_dim = 8;

  const auto r = structure_video_detailed(b, opts);
  if (r.keyframes != std::vector<Keyframe>{4, 14}) return "two_scenes: keyframes differ";
  if (r.triplets.size() != 4) return "two_scenes: parsed " + std::to_string(r.triplets.size()) + " triplets";
  if (r.grounded.size() != 3) return "two_scenes: grounding filter kept " + std::to_string(r.grounded.size());
  for (const auto& gt : r.grounded)
    if (gt.subject_box.w <= 0 || gt.object_box.w <= 0) return "two_scenes: retained triplet not fully grounded";
  auto msg = compare_graph(r.graph,
                           {{0, 4, "girl", 7}, {1, 4, "ball", std::nullopt}, {2, 14, "girl", 7}, {3, 14, "dog", 9},
                            {4, 14, "stick", std::nullopt}},
                           {{0, 1, "kicks"}, {2, 3, "chases"}, {3, 4, "holds"}}, {{0, 2, 7}, {2, 0, 7}});
  if (!msg.empty()) return msg;

  VideoBundle precomputed = b;
  precomputed.descriptors.reset();
  precomputed.scenes = r.scenes;
  const auto again = structure_video(precomputed, opts);
  if (graph_to_json(again, "f") != graph_to_json(r.graph, "f")) return "two_scenes: precomputed-scene path differs";
  return {};
}

Outcome structuring_correctness() {
  for (auto* scenario : {&three_keyframe_scenario, &two_scene_scenario}) {
    const std::string msg = scenario();
    if (!msg.empty()) return {false, msg};
  }
  return {true, "2 scenarios: nodes, intra and inter edge sets match; grounding and reversal closure hold"};
}

Outcome scene_detection() {
  auto make = [](std::size_t frames, const std::function<double(std::size_t)>& value) {
    FrameDescriptors d{Matrix(frames, 3)};
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t c = 0; c < 3; ++c) d.values(f, c) = value(f);
    return d;
  };
  const auto constant = detect_scenes(make(30, [](std::size_t) { return 0.5; }));
  const auto jump = detect_scenes(make(25, [](std::size_t f) { return f < 12 ? 0.1 : 0.9; }));
  const auto alternating = detect_scenes(make(20, [](std::size_t f) { return f % 2 ? 1.0 : 0.0; }));
  Outcome o;
  if (constant != std::vector<Scene>{{0, 29, 14}}) o = {false, "constant video: wrong scenes; "};
  if (jump != std::vector<Scene>{{0, 11, 5}, {12, 24, 18}}) o = {false, o.detail + "single jump: wrong scenes; "};
  if (alternating != std::vector<Scene>{{0, 7, 3}, {8, 15, 11}, {16, 19, 17}})
    o = {false, o.detail + "alternating trace: min-length guard broken; "};
  if (o.passed) o.detail = "constant -> 1 scene, jump -> keyframes 5/18, alternating -> cuts at 8/16";
  return o;
}

Outcome retrieval_exactness(Rng& rng) {
  std::vector<VideoVector> entries;
  const std::size_t dim = 32;
  for (std::size_t i = 0; i < 500; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "v%04zu", i);
    entries.push_back(VideoVector::make(id, random_vector(rng, dim)));
  }
  const auto index = RetrievalIndex::build(entries);
  for (int q = 0; q < 1000; ++q) {
    const auto query = random_vector(rng, dim);
    const std::size_t n = 1 + rng.below(20);
    std::set<std::string> exclude;
    if (rng.chance(0.3)) exclude.insert(entries[rng.below(entries.size())].video_id);
    SimilarityBand band;
    if (rng.chance(0.3)) {
      band.min = -0.2;
      band.max = 0.4;
    }
    const auto fast = index.query_top_n(query, n, exclude, band);
    const auto slow = reference::top_n(entries, query, n, exclude, band);
    auto same = [&](const std::vector<RetrievalHit>& a, const std::vector<RetrievalHit>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].video_id != b[i].video_id || std::abs(a[i].similarity - b[i].similarity) > kRetrievalTol) return false;
      return true;
    };
    if (!same(fast, slow)) return {false, "query " + std::to_string(q) + ": index and brute force disagree"};
    for (int s = 0; s < 3; ++s) {
      const double scale = std::pow(10.0, 6.0 * rng.uniform() - 3.0);
      auto scaled = query;
      for (auto& x : scaled) x *= scale;
      if (!same(index.query_top_n(scaled, n, exclude, band), fast))
        return {false, "query " + std::to_string(q) + ": scaling by " + fmt("%.3g", scale) + " changed the result"};
    }
  }
  return {true, "1000 queries over 500 entries match brute force; 3000 scaled queries unchanged"};
}

// ---- corpus-backed criteria ------------------------------------------------------

class Workspace {
 public:
  explicit Workspace(const VerifyOptions& options) : keep_(options.keep_work_dir), seed_(options.seed) {
    if (!options.work_dir.empty()) {
      root_ = options.work_dir;
      fs::create_directories(root_);
    } else {
      std::string tmpl = (fs::temp_directory_path() / "mvg-verify-XXXXXX").string();
      if (!mkdtemp(tmpl.data())) throw Error(ErrorCode::IoError, "cannot create a temporary directory");
      root_ = tmpl;
      owned_ = true;
    }
  }
  ~Workspace() {
    if (owned_ && !keep_) {
      std::error_code ec;
      fs::remove_all(root_, ec);
    }
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const fs::path& root() const { return root_; }

  const fs::path& corpus() {
    if (!corpus_ready_) {
      CorpusOptions co;
      co.seed = seed_;
      co.videos = 20;
      fs::remove_all(root_ / "corpus");
      generate_corpus(root_ / "corpus", co);
      corpus_ready_ = true;
    }
    return corpus_path_ = root_ / "corpus";
  }

  PipelineConfig config(const std::string& out) {
    PipelineConfig c;
    c.corpus_dir = corpus();
    c.output_dir = root_ / out;
    c.params_seed = seed_;
    fs::remove_all(c.output_dir);
    return c;
  }

 private:
  fs::path root_;
  fs::path corpus_path_;
  bool owned_ = false;
  bool keep_ = false;
  bool corpus_ready_ = false;
  std::uint64_t seed_;
};

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), dir).generic_string()] = detail::read_file(entry.path().string());
  return files;
}

Outcome attention_normalization(Workspace& ws) {
  const auto run = run_pipeline(ws.config("attention_run"));
  AttentionStats stats = run.fusion.attention;

  // Every corpus video as a target, at a reduced model width.
  FusionConfig narrow;
  narrow.d_model = 32;
  narrow.d_llm = 32;
  const FusionParams params = FusionParams::initialize(narrow, 3);
  const auto manifest = read_manifest(ws.corpus());
  const auto index = RetrievalIndex::build(read_vector_store((ws.corpus() / "vectors.vvec").string()));
  std::map<std::string, GraphInput> inputs;
  for (const auto& v : manifest.videos)
    inputs.emplace(v.video_id, make_graph_input(structure_video(load_video_bundle(ws.corpus(), v.video_id))));
  for (const auto& v : manifest.videos) {
    std::vector<GraphInput> related;
    for (const auto& hit : index.query_top_n(index.find(v.video_id)->vector, 5, {v.video_id}))
      related.push_back(inputs.at(hit.video_id));
    stats.merge(gfm_forward(inputs.at(v.video_id), related, params, narrow).attention);
  }
  return {stats.rows > 0 && stats.max_row_error <= kAttentionTol,
          std::to_string(stats.rows) + " attention rows, max |row sum - 1| = " + fmt("%.3g", stats.max_row_error)};
}

Outcome end_to_end_determinism(Workspace& ws, double& pipeline_seconds) {
  CorpusOptions co;
  co.seed = ws.config("scratch").params_seed;
  co.videos = 20;
  fs::remove_all(ws.root() / "corpus_again");
  generate_corpus(ws.root() / "corpus_again", co);
  if (snapshot(ws.corpus()) != snapshot(ws.root() / "corpus_again")) return {false, "corpus generation is not deterministic"};

  const auto start = std::chrono::steady_clock::now();
  const auto a_cfg = ws.config("run_a");
  const auto b_cfg = ws.config("run_b");
  const auto a = run_pipeline(a_cfg);
  run_pipeline(b_cfg);
  pipeline_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto sa = snapshot(a_cfg.output_dir);
  const auto sb = snapshot(b_cfg.output_dir);
  if (sa != sb) return {false, "artifacts differ between runs"};
  std::size_t graph_files = 0;
  for (const auto& [name, bytes] : sa)
    if (name.ends_with(".graph.json")) ++graph_files;
  return {true, std::to_string(sa.size()) + " artifacts byte-identical (" + std::to_string(graph_files) +
                    " graphs, prompt total " + std::to_string(a.prompt.totals.total) + " tokens), two runs in " +
                    fmt("%.2f", pipeline_seconds) + " s"};
}

}  // namespace

const std::vector<CriterionInfo>& verification_criteria() {
  static const std::vector<CriterionInfo> all = {
      {1, "context-lengths", "context lengths 2.1K / 12.5K / 2.3K within 10%", 1.0},
      {2, "class-embedding-sum", "ce_tar + ce_rel = 1 and exact sigmoid probes", 1.0},
      {3, "permutation-invariance", "related order does not change target tokens", 30.0},
      {4, "related-pass-through", "related rows of CGA output equal inputs bitwise", 0.0},
      {5, "oracle-equivalence", "GAT and CGA match dense reference implementations", 30.0},
      {6, "gradient-check", "reverse-mode gradients match central differences", 120.0},
      {7, "attention-normalization", "attention rows sum to 1 over a corpus run", 0.0},
      {8, "structuring-correctness", "hand-enumerated graphs match exactly", 0.0},
      {9, "scene-detection", "constant, single-jump and alternating traces", 0.0},
      {10, "retrieval-exactness", "index equals brute force and is scale invariant", 0.0},
      {11, "end-to-end-determinism", "two pipeline runs give identical artifacts", 60.0},
  };
  return all;
}

std::vector<CriterionResult> run_verification(const VerifyOptions& options) {
  for (const auto& key : options.only) {
    const auto& all = verification_criteria();
    if (std::none_of(all.begin(), all.end(),
                     [&](const CriterionInfo& c) { return c.name == key || std::to_string(c.id) == key; }))
      throw Error(ErrorCode::InvalidArgument, "unknown criterion '" + key + "'");
  }
  std::optional<Workspace> workspace;
  auto ws = [&]() -> Workspace& {
    if (!workspace) workspace.emplace(options);
    return *workspace;
  };

  std::vector<CriterionResult> results;
  for (const auto& info : verification_criteria()) {
    if (!options.only.empty() && !options.only.contains(info.name) && !options.only.contains(std::to_string(info.id)))
      continue;
    Rng rng(detail::Fnv1a().str("verify").u64(options.seed).u64(static_cast<std::uint64_t>(info.id)).value());
    CriterionResult r;
    r.info = info;
    double timed = -1.0;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      switch (info.id) {
        case 1: o = context_length_accounting(); break;
        case 2: o = class_embedding_sum(rng); break;
        case 3: o = permutation_invariance(rng); break;
        case 4: o = pass_through(rng); break;
        case 5: o = oracle_equivalence(rng); break;
        case 6: o = gradient_check(rng, options.inject_gradient_fault); break;
        case 7: o = attention_normalization(ws()); break;
        case 8: o = structuring_correctness(); break;
        case 9: o = scene_detection(); break;
        case 10: o = retrieval_exactness(rng); break;
        case 11: o = end_to_end_determinism(ws(), timed); break;
        default: o = {false, "no implementation"};
      }
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double charged = timed >= 0.0 ? timed : r.seconds;
    r.passed = o.passed;
    r.detail = o.detail;
    if (info.time_limit_seconds > 0.0 && charged > info.time_limit_seconds) {
      r.passed = false;
      r.detail += "; over time limit " + fmt("%.0f", info.time_limit_seconds) + " s";
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_result(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "[%s] %2d %-24s %8.3fs  ", r.passed ? "PASS" : "FAIL", r.info.id,
                r.info.name.c_str(), r.seconds);
  return head + r.detail;
}

json verification_to_json(const std::vector<CriterionResult>& results) {
  json list = json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    list.push_back({{"id", r.info.id},
                    {"name", r.info.name},
                    {"passed", r.passed},
                    {"seconds", r.seconds},
                    {"detail", r.detail}});
  }
  return json{{"passed", all}, {"criteria", std::move(list)}};
}

}  // namespace mvg
