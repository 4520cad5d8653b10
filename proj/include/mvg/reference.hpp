#pragma once

// Straightforward dense implementations used as test oracles. They share
// no code with the optimized paths beyond the Matrix container.

#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mvg/fusion.hpp"
#include "mvg/retrieval.hpp"

namespace mvg::reference {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  bool inter = false;
};

// Dense masked attention over an explicit edge list plus self-loops. An
// intra edge wins over an inter edge between the same pair.
Matrix gat(const Matrix& x, const std::vector<Edge>& edges, const Matrix& weight, std::span<const double> attn,
           std::span<const double> attn_inter, std::size_t heads, double slope);

// Returns [O_target; x_related].
Matrix cga(const Matrix& x_target, const Matrix& x_related, const Matrix& w_q, const Matrix& w_k, const Matrix& w_v,
           std::span<const double> alpha, std::size_t heads);

// Full scan and full sort.
std::vector<RetrievalHit> top_n(const std::vector<VideoVector>& entries, std::span<const double> query, std::size_t n,
                                const std::set<std::string>& exclude = {}, const SimilarityBand& band = {});

// (f(x + h) - f(x - h)) / 2h, restoring x afterwards.
double central_difference(const std::function<double()>& f, double& x, double h);

}  // namespace mvg::reference
