#pragma once

// Forward caches shared by the fusion forward pass and its reverse-mode
// gradient. Not part of the public interface.

#include <vector>

#include "mvg/fusion.hpp"

namespace mvg::detail {

struct RmsNormCache {
  Matrix normalized;            // x / rms(x), before the gain
  std::vector<double> inv_rms;  // per row
};

Matrix rms_norm_forward(const Matrix& x, std::span<const double> gain, double eps, RmsNormCache* cache);
// Returns dL/dx and accumulates dL/dgain.
Matrix rms_norm_backward(const Matrix& dy, std::span<const double> gain, const RmsNormCache& cache,
                         std::span<double> dgain);

struct GatCache {
  Matrix input;  // normalized tokens fed to the layer
  Matrix wh;     // input * W
  // Per head, per node, per neighbour: pre-activation score and weight.
  std::vector<std::vector<std::vector<double>>> scores;
  std::vector<std::vector<std::vector<double>>> weights;
};

Matrix gat_forward(const Matrix& tokens, const Adjacency& adjacency, const Matrix& weight,
                   std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config,
                   AttentionStats* stats, GatCache* cache);

struct GatGrads {
  Matrix& weight;
  std::span<double> attn;
  std::span<double> attn_inter;
};

Matrix gat_backward(const Matrix& dout, const Adjacency& adjacency, const Matrix& weight,
                    std::span<const double> attn, std::span<const double> attn_inter, const FusionConfig& config,
                    const GatCache& cache, GatGrads grads);

struct CgaCache {
  Matrix z_target;
  Matrix z_all;  // [target; related]
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head: target rows x all rows
  ClassEmbeddings ce;
};

// Returns O_target only (target rows x d_model).
Matrix cga_forward(const Matrix& x_target, const Matrix& x_related, const LayerParams& layer,
                   const FusionConfig& config, AttentionStats* stats, CgaCache* cache);

struct CgaBackward {
  Matrix d_target;
  Matrix d_related;
};

CgaBackward cga_backward(const Matrix& d_out, const LayerParams& layer, const FusionConfig& config,
                         const CgaCache& cache, LayerParams& grads);

}  // namespace mvg::detail
