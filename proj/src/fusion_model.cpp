#include <cmath>

#include "fusion_internal.hpp"
#include "mvg/error.hpp"

namespace mvg {

GraphInput make_graph_input(const VideoGraph& graph) {
  GraphInput in;
  in.video_id = graph.video_id;
  in.adjacency = Adjacency::from_graph(graph);
  const std::size_t dim = graph.nodes.empty() ? 0 : graph.nodes.front().feature.size();
  in.features = Matrix(graph.nodes.size(), dim);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& f = graph.nodes[i].feature;
    if (f.size() != dim) throw Error(ErrorCode::FeatureDimensionMismatch, graph.video_id + ": ragged node features");
    std::copy(f.begin(), f.end(), in.features.row(i).begin());
  }
  return in;
}

namespace {

struct GraphTape {
  detail::RmsNormCache gat_norm;
  detail::GatCache gat;
  detail::RmsNormCache cga_norm;
};

struct LayerTape {
  std::vector<GraphTape> graphs;  // target first
  detail::CgaCache cga;
};

struct Tape {
  std::vector<Matrix> lifted_inputs;  // features per graph
  std::vector<LayerTape> layers;
  std::vector<Matrix> final_states;
};

void check_inputs(const std::vector<const GraphInput*>& graphs, const FusionParams& params,
                  const FusionConfig& config) {
  config.check();
  for (const GraphInput* g : graphs) {
    if (g->features.rows() != g->adjacency.size())
      throw Error(ErrorCode::ShapeMismatch, g->video_id + ": feature rows differ from node count");
    if (g->features.rows() > 0 && g->features.cols() != params.lift_weight.rows())
      throw Error(ErrorCode::ShapeMismatch, g->video_id + ": node features have " +
                                                std::to_string(g->features.cols()) + " columns, lift expects " +
                                                std::to_string(params.lift_weight.rows()));
  }
  const std::size_t d = params.lift_weight.cols();
  if (params.lift_bias.size() != d || params.proj_weight.rows() != d || params.proj_bias.size() != params.proj_weight.cols())
    throw Error(ErrorCode::ShapeMismatch, "fusion parameters have inconsistent lift/projection shapes");
}

std::vector<Matrix> run_forward(const std::vector<const GraphInput*>& graphs, const FusionParams& params,
                                const FusionConfig& config, AttentionStats* stats, Tape* tape) {
  check_inputs(graphs, params, config);
  const std::size_t d = params.lift_weight.cols();
  const std::size_t count = graphs.size();

  std::vector<Matrix> x(count);
  for (std::size_t g = 0; g < count; ++g) {
    const Matrix& f = graphs[g]->features;
    x[g] = f.rows() > 0 ? matmul(f, params.lift_weight) : Matrix(0, d);
    add_row_vector(x[g], params.lift_bias);
    if (tape) tape->lifted_inputs.push_back(f.rows() > 0 ? f : Matrix(0, params.lift_weight.rows()));
  }

  for (const LayerParams& layer : params.layers) {
    LayerTape* lt = nullptr;
    if (tape) {
      tape->layers.emplace_back();
      lt = &tape->layers.back();
      lt->graphs.resize(count);
    }
    // Graph attention within each video.
    std::vector<Matrix> z(count);
    for (std::size_t g = 0; g < count; ++g) {
      GraphTape* gt = lt ? &lt->graphs[g] : nullptr;
      Matrix h = detail::rms_norm_forward(x[g], layer.gain_gat, config.rms_eps, gt ? &gt->gat_norm : nullptr);
      Matrix upd = detail::gat_forward(h, graphs[g]->adjacency, layer.gat_weight, layer.gat_attn,
                                       layer.gat_attn_inter, config, stats, gt ? &gt->gat : nullptr);
      add_in_place(x[g], upd);
      z[g] = detail::rms_norm_forward(x[g], layer.gain_cga, config.rms_eps, gt ? &gt->cga_norm : nullptr);
    }
    // Cross-graph attention: only target rows are updated.
    Matrix z_related(0, d);
    for (std::size_t g = 1; g < count; ++g) z_related.append_rows(z[g]);
    Matrix o = detail::cga_forward(z[0], z_related, layer, config, stats, lt ? &lt->cga : nullptr);
    add_in_place(x[0], o);
  }

  if (tape) tape->final_states = x;
  std::vector<Matrix> out(count);
  for (std::size_t g = 0; g < count; ++g) out[g] = project_tokens(x[g], params.proj_weight, params.proj_bias);
  return out;
}

std::vector<const GraphInput*> gather(const GraphInput& target, const std::vector<GraphInput>& related) {
  std::vector<const GraphInput*> graphs{&target};
  for (const auto& r : related) graphs.push_back(&r);
  return graphs;
}

}  // namespace

FusionResult gfm_forward(const GraphInput& target, const std::vector<GraphInput>& related,
                         const FusionParams& params, const FusionConfig& config) {
  const auto graphs = gather(target, related);
  FusionResult result;
  auto tokens = run_forward(graphs, params, config, &result.attention, nullptr);
  for (std::size_t g = 0; g < graphs.size(); ++g) result.graph_tokens.push_back({graphs[g]->video_id, std::move(tokens[g])});
  return result;
}

GradientResult gfm_gradients(const GraphInput& target, const std::vector<GraphInput>& related,
                             const FusionParams& params, const FusionConfig& config) {
  const auto graphs = gather(target, related);
  const std::size_t count = graphs.size();
  const std::size_t d = params.lift_weight.cols();
  Tape tape;
  auto tokens = run_forward(graphs, params, config, nullptr, &tape);

  GradientResult result;
  result.gradients = FusionParams::zeros_like(params);
  FusionParams& grad = result.gradients;

  // loss = sum of squares of the target graph tokens
  Matrix dtok = tokens[0];
  for (double& v : dtok.values()) {
    result.loss += v * v;
    v *= 2.0;
  }
  add_in_place(grad.proj_weight, matmul_tn(tape.final_states[0], dtok));
  const auto db = column_sums(dtok);
  for (std::size_t c = 0; c < db.size(); ++c) grad.proj_bias[c] += db[c];

  std::vector<Matrix> dx(count);
  dx[0] = matmul_nt(dtok, params.proj_weight);
  for (std::size_t g = 1; g < count; ++g) dx[g] = Matrix(graphs[g]->features.rows(), d);

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    LayerParams& lg = grad.layers[l];
    const LayerTape& lt = tape.layers[l];

    // The target residual feeds both the carried state and the attention output.
    auto cga = detail::cga_backward(dx[0], layer, config, lt.cga, lg);
    std::size_t offset = 0;
    for (std::size_t g = 0; g < count; ++g) {
      const Matrix* dz = &cga.d_target;
      Matrix slice;
      if (g > 0) {
        const std::size_t rows = graphs[g]->features.rows();
        slice = cga.d_related.slice_rows(offset, rows);
        offset += rows;
        dz = &slice;
      }
      add_in_place(dx[g], detail::rms_norm_backward(*dz, layer.gain_cga, lt.graphs[g].cga_norm, lg.gain_cga));
    }

    for (std::size_t g = 0; g < count; ++g) {
      const GraphTape& gt = lt.graphs[g];
      detail::GatGrads gg{lg.gat_weight, lg.gat_attn, lg.gat_attn_inter};
      Matrix dh = detail::gat_backward(dx[g], graphs[g]->adjacency, layer.gat_weight, layer.gat_attn,
                                       layer.gat_attn_inter, config, gt.gat, gg);
      add_in_place(dx[g], detail::rms_norm_backward(dh, layer.gain_gat, gt.gat_norm, lg.gain_gat));
    }
  }

  for (std::size_t g = 0; g < count; ++g) {
    if (graphs[g]->features.rows() == 0) continue;
    add_in_place(grad.lift_weight, matmul_tn(tape.lifted_inputs[g], dx[g]));
    const auto s = column_sums(dx[g]);
    for (std::size_t c = 0; c < d; ++c) grad.lift_bias[c] += s[c];
  }
  return result;
}

}  // namespace mvg
