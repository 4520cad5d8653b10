#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "fusion_internal.hpp"
#include "mvg/error.hpp"

namespace mvg {

ClassEmbeddings class_embeddings(std::span<const double> alpha) {
  ClassEmbeddings ce;
  ce.target.resize(alpha.size());
  ce.related.resize(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    ce.target[i] = 1.0 / (1.0 + std::exp(-alpha[i]));
    ce.related[i] = 1.0 - ce.target[i];
  }
  return ce;
}

std::vector<double> rms_norm(std::span<const double> x, std::span<const double> gain, double eps) {
  if (x.size() != gain.size()) throw Error(ErrorCode::ShapeMismatch, "rms_norm: gain length differs from input");
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(std::max<std::size_t>(x.size(), 1));
  const double denom = std::sqrt(ms + eps);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = denom > 0.0 ? gain[i] * x[i] / denom : 0.0;
  return y;
}

Matrix rms_norm_rows(const Matrix& x, std::span<const double> gain, double eps) {
  return detail::rms_norm_forward(x, gain, eps, nullptr);
}

Adjacency Adjacency::self_only(std::size_t n) {
  Adjacency a;
  a.in.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.in[i].push_back({static_cast<std::uint32_t>(i), EdgeKind::Self});
  return a;
}

Adjacency Adjacency::from_graph(const VideoGraph& graph) {
  std::map<NodeId, std::uint32_t> row_of;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i)
    row_of.emplace(graph.nodes[i].node_id, static_cast<std::uint32_t>(i));
  auto row = [&](NodeId id) {
    auto it = row_of.find(id);
    if (it == row_of.end()) throw Error(ErrorCode::ShapeMismatch, "edge references unknown node " + std::to_string(id));
    return it->second;
  };

  Adjacency a = self_only(graph.nodes.size());
  auto add = [&](std::uint32_t dst, std::uint32_t src, EdgeKind kind) {
    auto& list = a.in[dst];
    if (std::none_of(list.begin(), list.end(), [&](const Neighbor& n) { return n.source == src; }))
      list.push_back({src, kind});
  };
  for (const auto& e : graph.intra_edges) add(row(e.dst), row(e.src), EdgeKind::Intra);
  for (const auto& e : graph.inter_edges) add(row(e.dst), row(e.src), EdgeKind::Inter);
  return a;
}

void AttentionStats::record(std::span<const double> weights) {
  double s = 0.0;
  for (double w : weights) s += w;
  max_row_error = std::max(max_row_error, std::abs(s - 1.0));
  ++rows;
}

void AttentionStats::merge(const AttentionStats& other) {
  max_row_error = std::max(max_row_error, other.max_row_error);
  rows += other.rows;
}

Matrix gat_layer(const Matrix& tokens, const Adjacency& adjacency, const Matrix& weight,
                 std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config,
                 AttentionStats* stats) {
  return detail::gat_forward(tokens, adjacency, weight, attn, attn_inter, config, stats, nullptr);
}

Matrix cross_graph_attention(const Matrix& x_target, const Matrix& x_related, const LayerParams& layer,
                             const FusionConfig& config, AttentionStats* stats) {
  Matrix out = detail::cga_forward(x_target, x_related, layer, config, stats, nullptr);
  out.append_rows(x_related);
  return out;
}

Matrix project_tokens(const Matrix& features, const Matrix& weight, std::span<const double> bias) {
  if (features.cols() != weight.rows())
    throw Error(ErrorCode::ShapeMismatch, "project_tokens: input has " + std::to_string(features.cols()) +
                                              " columns, projection expects " + std::to_string(weight.rows()));
  if (bias.size() != weight.cols()) throw Error(ErrorCode::ShapeMismatch, "project_tokens: bias length differs");
  Matrix out = matmul(features, weight);
  add_row_vector(out, bias);
  return out;
}

namespace detail {

Matrix rms_norm_forward(const Matrix& x, std::span<const double> gain, double eps, RmsNormCache* cache) {
  if (gain.size() != x.cols()) throw Error(ErrorCode::ShapeMismatch, "rms_norm: gain length differs from width");
  Matrix y(x.rows(), x.cols());
  if (cache) {
    cache->normalized = Matrix(x.rows(), x.cols());
    cache->inv_rms.assign(x.rows(), 0.0);
  }
  const double width = static_cast<double>(std::max<std::size_t>(x.cols(), 1));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double ms = 0.0;
    for (double v : in) ms += v * v;
    const double denom = std::sqrt(ms / width + eps);
    const double inv = denom > 0.0 ? 1.0 / denom : 0.0;
    auto out = y.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) {
      const double n = in[c] * inv;
      out[c] = gain[c] * n;
      if (cache) cache->normalized(r, c) = n;
    }
    if (cache) cache->inv_rms[r] = inv;
  }
  return y;
}

Matrix rms_norm_backward(const Matrix& dy, std::span<const double> gain, const RmsNormCache& cache,
                         std::span<double> dgain) {
  Matrix dx(dy.rows(), dy.cols());
  const double width = static_cast<double>(std::max<std::size_t>(dy.cols(), 1));
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto g = dy.row(r);
    auto n = cache.normalized.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      dgain[c] += g[c] * n[c];
      dot += g[c] * gain[c] * n[c];
    }
    const double mean = dot / width;
    auto out = dx.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) out[c] = (g[c] * gain[c] - n[c] * mean) * cache.inv_rms[r];
  }
  return dx;
}

namespace {

double leaky(double e, double slope) { return e > 0.0 ? e : slope * e; }

std::span<const double> attn_for(EdgeKind kind, std::span<const double> attn, std::span<const double> attn_inter) {
  return (kind == EdgeKind::Inter && !attn_inter.empty()) ? attn_inter : attn;
}

void softmax_in_place(std::vector<double>& v) {
  if (v.empty()) return;
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (auto& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (auto& x : v) x /= s;
}

void check_gat_shapes(const Matrix& tokens, const Adjacency& adjacency, const Matrix& weight,
                      std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config) {
  const std::size_t d = tokens.cols();
  if (adjacency.size() != tokens.rows())
    throw Error(ErrorCode::ShapeMismatch, "gat_layer: adjacency has " + std::to_string(adjacency.size()) +
                                              " nodes, tokens have " + std::to_string(tokens.rows()) + " rows");
  if (weight.rows() != d || weight.cols() != d) throw Error(ErrorCode::ShapeMismatch, "gat_layer: weight must be d x d");
  if (attn.size() != 2 * d) throw Error(ErrorCode::ShapeMismatch, "gat_layer: attention vector must have 2d entries");
  if (!attn_inter.empty() && attn_inter.size() != 2 * d)
    throw Error(ErrorCode::ShapeMismatch, "gat_layer: inter attention vector must have 2d entries");
  if (config.gat_heads == 0 || d % config.gat_heads != 0)
    throw Error(ErrorCode::ShapeMismatch, "gat_layer: head count must divide width");
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    const auto& list = adjacency.in[i];
    if (list.empty() || list.front().source != i || list.front().kind != EdgeKind::Self)
      throw Error(ErrorCode::ShapeMismatch, "gat_layer: node " + std::to_string(i) + " lacks its self-loop");
    for (const auto& nb : list)
      if (nb.source >= tokens.rows()) throw Error(ErrorCode::ShapeMismatch, "gat_layer: neighbour out of range");
  }
}

}  // namespace

Matrix gat_forward(const Matrix& tokens, const Adjacency& adjacency, const Matrix& weight,
                   std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config,
                   AttentionStats* stats, GatCache* cache) {
  check_gat_shapes(tokens, adjacency, weight, attn, attn_inter, config);
  const std::size_t n = tokens.rows();
  const std::size_t d = tokens.cols();
  const std::size_t heads = config.gat_heads;
  const std::size_t dh = d / heads;

  Matrix wh = matmul(tokens, weight);
  Matrix out(n, d);
  if (cache) {
    cache->input = tokens;
    cache->scores.assign(heads, std::vector<std::vector<double>>(n));
    cache->weights.assign(heads, std::vector<std::vector<double>>(n));
  }

  // Per-node halves of the score, one per attention vector in use.
  auto half = [&](std::span<const double> a, std::size_t node, std::size_t h, bool neighbour_side) {
    const std::size_t off = (neighbour_side ? d : 0) + h * dh;
    auto row = wh.row(node);
    double s = 0.0;
    for (std::size_t c = 0; c < dh; ++c) s += a[off + c] * row[h * dh + c];
    return s;
  };

  std::vector<double> scores;
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& list = adjacency.in[i];
      scores.resize(list.size());
      for (std::size_t k = 0; k < list.size(); ++k) {
        auto a = attn_for(list[k].kind, attn, attn_inter);
        scores[k] = half(a, i, h, false) + half(a, list[k].source, h, true);
      }
      std::vector<double> weights(scores.size());
      for (std::size_t k = 0; k < scores.size(); ++k) weights[k] = leaky(scores[k], config.leaky_slope);
      softmax_in_place(weights);
      if (stats) stats->record(weights);

      auto orow = out.row(i);
      for (std::size_t k = 0; k < list.size(); ++k) {
        auto src = wh.row(list[k].source);
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) orow[c] += weights[k] * src[c];
      }
      if (cache) {
        cache->scores[h][i] = scores;
        cache->weights[h][i] = std::move(weights);
      }
    }
  }
  if (cache) cache->wh = std::move(wh);
  return out;
}

Matrix gat_backward(const Matrix& dout, const Adjacency& adjacency, const Matrix& weight,
                    std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config,
                    const GatCache& cache, GatGrads grads) {
  const std::size_t n = dout.rows();
  const std::size_t d = dout.cols();
  const std::size_t heads = config.gat_heads;
  const std::size_t dh = d / heads;
  const Matrix& wh = cache.wh;
  Matrix dwh(n, d);

  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    const std::size_t c1 = c0 + dh;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& list = adjacency.in[i];
      const auto& w = cache.weights[h][i];
      const auto& e = cache.scores[h][i];
      auto g = dout.row(i);

      std::vector<double> dw(list.size());
      double weighted = 0.0;
      for (std::size_t k = 0; k < list.size(); ++k) {
        auto src = wh.row(list[k].source);
        auto dsrc = dwh.row(list[k].source);
        double dot = 0.0;
        for (std::size_t c = c0; c < c1; ++c) {
          dsrc[c] += w[k] * g[c];
          dot += g[c] * src[c];
        }
        dw[k] = dot;
        weighted += w[k] * dot;
      }
      for (std::size_t k = 0; k < list.size(); ++k) {
        const double dl = w[k] * (dw[k] - weighted);
        const double de = dl * (e[k] > 0.0 ? 1.0 : config.leaky_slope);
        const bool inter = list[k].kind == EdgeKind::Inter && !attn_inter.empty();
        auto a = inter ? attn_inter : attn;
        auto da = inter ? grads.attn_inter : grads.attn;
        const std::size_t j = list[k].source;
        auto row_i = wh.row(i);
        auto row_j = wh.row(j);
        auto drow_i = dwh.row(i);
        auto drow_j = dwh.row(j);
        for (std::size_t c = c0; c < c1; ++c) {
          da[c] += de * row_i[c];
          drow_i[c] += de * a[c];
          da[d + c] += de * row_j[c];
          drow_j[c] += de * a[d + c];
        }
      }
    }
  }
  add_in_place(grads.weight, matmul_tn(cache.input, dwh));
  return matmul_nt(dwh, weight);
}

Matrix cga_forward(const Matrix& x_target, const Matrix& x_related, const LayerParams& layer,
                   const FusionConfig& config, AttentionStats* stats, CgaCache* cache) {
  const std::size_t d = layer.w_q.rows();
  if (x_target.cols() != d && x_target.rows() > 0)
    throw Error(ErrorCode::ShapeMismatch, "cross_graph_attention: target width differs from d_model");
  if (x_related.rows() > 0 && x_related.cols() != d)
    throw Error(ErrorCode::ShapeMismatch, "cross_graph_attention: related width differs from d_model");
  if (layer.alpha.size() != d) throw Error(ErrorCode::ShapeMismatch, "cross_graph_attention: alpha length differs");
  const std::size_t heads = config.cga_heads;
  if (heads == 0 || d % heads != 0) throw Error(ErrorCode::ShapeMismatch, "cross_graph_attention: head count must divide width");
  const std::size_t dh = d / heads;
  const std::size_t nt = x_target.rows();
  const std::size_t nr = x_related.rows();
  const std::size_t m = nt + nr;

  Matrix z_target = nt > 0 ? x_target : Matrix(0, d);
  Matrix z_all = z_target;
  if (nr > 0) z_all.append_rows(x_related);

  ClassEmbeddings ce = class_embeddings(layer.alpha);
  Matrix q = matmul(z_target, layer.w_q);
  add_row_vector(q, ce.target);
  Matrix k = matmul(z_all, layer.w_k);
  Matrix v = matmul(z_all, layer.w_v);
  for (std::size_t r = 0; r < m; ++r) {
    const auto& add = r < nt ? ce.target : ce.related;
    auto kr = k.row(r);
    auto vr = v.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      kr[c] += add[c];
      vr[c] += add[c];
    }
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(nt, d);
  std::vector<Matrix> probs;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    Matrix p(nt, m);
    for (std::size_t i = 0; i < nt; ++i) {
      auto qi = q.row(i);
      auto pi = p.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        auto kj = k.row(j);
        double s = 0.0;
        for (std::size_t c = c0; c < c0 + dh; ++c) s += qi[c] * kj[c];
        pi[j] = s * scale;
        mx = std::max(mx, pi[j]);
      }
      double sum = 0.0;
      for (auto& x : pi) {
        x = std::exp(x - mx);
        sum += x;
      }
      for (auto& x : pi) x /= sum;
      if (stats) stats->record(pi);
      auto oi = out.row(i);
      for (std::size_t j = 0; j < m; ++j) {
        auto vj = v.row(j);
        for (std::size_t c = c0; c < c0 + dh; ++c) oi[c] += pi[j] * vj[c];
      }
    }
    probs.push_back(std::move(p));
  }

  if (cache) {
    cache->z_target = std::move(z_target);
    cache->z_all = std::move(z_all);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->ce = std::move(ce);
  }
  return out;
}

CgaBackward cga_backward(const Matrix& d_out, const LayerParams& layer, const FusionConfig& config,
                         const CgaCache& cache, LayerParams& grads) {
  const std::size_t d = layer.w_q.rows();
  const std::size_t heads = config.cga_heads;
  const std::size_t dh = d / heads;
  const std::size_t nt = cache.q.rows();
  const std::size_t m = cache.k.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dq(nt, d), dk(m, d), dv(m, d);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    const std::size_t c1 = c0 + dh;
    const Matrix& p = cache.probs[h];
    for (std::size_t i = 0; i < nt; ++i) {
      auto pi = p.row(i);
      auto gi = d_out.row(i);
      std::vector<double> dp(m);
      double weighted = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        auto vj = cache.v.row(j);
        auto dvj = dv.row(j);
        double s = 0.0;
        for (std::size_t c = c0; c < c1; ++c) {
          s += gi[c] * vj[c];
          dvj[c] += pi[j] * gi[c];
        }
        dp[j] = s;
        weighted += pi[j] * s;
      }
      auto qi = cache.q.row(i);
      auto dqi = dq.row(i);
      for (std::size_t j = 0; j < m; ++j) {
        const double ds = pi[j] * (dp[j] - weighted) * scale;
        auto kj = cache.k.row(j);
        auto dkj = dk.row(j);
        for (std::size_t c = c0; c < c1; ++c) {
          dqi[c] += ds * kj[c];
          dkj[c] += ds * qi[c];
        }
      }
    }
  }

  // Class embeddings enter additively: target rows of Q, K, V and related rows of K, V.
  std::vector<double> dce_t(d, 0.0), dce_r(d, 0.0);
  for (std::size_t r = 0; r < nt; ++r)
    for (std::size_t c = 0; c < d; ++c) dce_t[c] += dq(r, c);
  for (std::size_t r = 0; r < m; ++r) {
    auto& acc = r < nt ? dce_t : dce_r;
    for (std::size_t c = 0; c < d; ++c) acc[c] += dk(r, c) + dv(r, c);
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double s = cache.ce.target[c];
    grads.alpha[c] += (dce_t[c] - dce_r[c]) * s * (1.0 - s);
  }

  add_in_place(grads.w_q, matmul_tn(cache.z_target, dq));
  add_in_place(grads.w_k, matmul_tn(cache.z_all, dk));
  add_in_place(grads.w_v, matmul_tn(cache.z_all, dv));

  Matrix dz = matmul_nt(dk, layer.w_k);
  add_in_place(dz, matmul_nt(dv, layer.w_v));
  Matrix dzq = matmul_nt(dq, layer.w_q);
  for (std::size_t r = 0; r < nt; ++r)
    for (std::size_t c = 0; c < d; ++c) dz(r, c) += dzq(r, c);

  return {dz.slice_rows(0, nt), dz.slice_rows(nt, m - nt)};
}

}  // namespace detail
}  // namespace mvg
