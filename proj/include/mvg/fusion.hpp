#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvg/graph.hpp"
#include "mvg/matrix.hpp"

namespace mvg {

struct FusionConfig {
  std::size_t d_node = 1024;
  std::size_t d_model = 1024;
  std::size_t d_llm = 4096;
  std::size_t layers = 2;
  std::size_t gat_heads = 1;
  std::size_t cga_heads = 1;
  // Inter-frame neighbours score with their own attention vector when set.
  bool separate_edge_types = false;
  double leaky_slope = 0.2;
  double rms_eps = 1e-6;

  void check() const;
};

// Class embeddings marking target vs related tokens: ce_target = sigmoid(alpha),
// ce_related = 1 - ce_target, elementwise.
struct ClassEmbeddings {
  std::vector<double> target;
  std::vector<double> related;
};

ClassEmbeddings class_embeddings(std::span<const double> alpha);

std::vector<double> rms_norm(std::span<const double> x, std::span<const double> gain, double eps);
Matrix rms_norm_rows(const Matrix& x, std::span<const double> gain, double eps);

enum class EdgeKind : std::uint8_t { Self, Intra, Inter };

struct Neighbor {
  std::uint32_t source = 0;
  EdgeKind kind = EdgeKind::Self;
};

// In-neighbourhoods used by graph attention. Row i attends over in[i], which
// always starts with its implicit self-loop. Duplicate sources (parallel
// predicates) collapse to one entry.
struct Adjacency {
  std::vector<std::vector<Neighbor>> in;

  std::size_t size() const { return in.size(); }
  static Adjacency self_only(std::size_t n);
  static Adjacency from_graph(const VideoGraph& graph);
};

struct LayerParams {
  Matrix gat_weight;                    // d_model x d_model
  std::vector<double> gat_attn;         // 2 * d_model: [source-side | neighbour-side]
  std::vector<double> gat_attn_inter;   // 2 * d_model, empty unless separate_edge_types
  Matrix w_q, w_k, w_v;                 // d_model x d_model
  std::vector<double> alpha;            // d_model
  std::vector<double> gain_gat;         // d_model
  std::vector<double> gain_cga;         // d_model
};

struct FusionParams {
  Matrix lift_weight;             // d_node x d_model
  std::vector<double> lift_bias;  // d_model
  std::vector<LayerParams> layers;
  Matrix proj_weight;             // d_model x d_llm
  std::vector<double> proj_bias;  // d_llm

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, alpha = 0, unit gains,
  // zero biases; the lift is the identity when d_node == d_model.
  static FusionParams initialize(const FusionConfig& config, std::uint64_t seed);
  static FusionParams zeros_like(const FusionParams& other);

  FusionConfig shape_config(const FusionConfig& base) const;
};

struct TensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

struct ConstTensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> values;
};

// Every parameter tensor in a fixed order with stable dotted names.
std::vector<TensorView> tensors(FusionParams& params);
std::vector<ConstTensorView> tensors(const FusionParams& params);

// Largest |row sum - 1| seen over recorded attention rows.
struct AttentionStats {
  double max_row_error = 0.0;
  std::size_t rows = 0;

  void record(std::span<const double> weights);
  void merge(const AttentionStats& other);
};

Matrix gat_layer(const Matrix& tokens, const Adjacency& adjacency, const Matrix& weight,
                 std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config,
                 AttentionStats* stats = nullptr);

// Target rows attend over [target; related] keys and values with class
// embeddings added. Returns [O_target; x_related] with related rows copied.
Matrix cross_graph_attention(const Matrix& x_target, const Matrix& x_related, const LayerParams& layer,
                             const FusionConfig& config, AttentionStats* stats = nullptr);

Matrix project_tokens(const Matrix& features, const Matrix& weight, std::span<const double> bias);

struct GraphInput {
  std::string video_id;
  Adjacency adjacency;
  Matrix features;  // one row per node in node order, d_node columns
};

GraphInput make_graph_input(const VideoGraph& graph);

struct TokenMatrix {
  std::string owner;
  Matrix values;
};

struct FusionResult {
  std::vector<TokenMatrix> graph_tokens;  // target first, then related in input order
  AttentionStats attention;
};

// Lift, then per layer: X += GAT(RMSNorm(X)) for every graph, then
// X_tar += CGA(RMSNorm(X_tar), RMSNorm(X_rel)) with related rows carried
// forward unchanged, and finally the projection to d_llm.
FusionResult gfm_forward(const GraphInput& target, const std::vector<GraphInput>& related,
                         const FusionParams& params, const FusionConfig& config);

struct GradientResult {
  double loss = 0.0;  // sum of squares of the target graph tokens
  FusionParams gradients;
};

GradientResult gfm_gradients(const GraphInput& target, const std::vector<GraphInput>& related,
                             const FusionParams& params, const FusionConfig& config);

// "GFMP" | version | records of (name length, name, rank, dims, f32 payload) to EOF.
std::string encode_checkpoint(const FusionParams& params);
FusionParams decode_checkpoint(std::string bytes, const std::string& source = "<memory>");
void save_checkpoint(const std::string& path, const FusionParams& params);
FusionParams load_checkpoint(const std::string& path);

// "GTOK" | version | count | count x (id length, id, rows, cols, f32 payload)
std::string encode_graph_tokens(const std::vector<TokenMatrix>& tokens);
std::vector<TokenMatrix> decode_graph_tokens(std::string bytes, const std::string& source = "<memory>");

}  // namespace mvg
