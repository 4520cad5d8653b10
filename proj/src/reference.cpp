#include "mvg/reference.hpp"

#include <algorithm>
#include <cmath>

namespace mvg::reference {

namespace {

using Dense = std::vector<std::vector<double>>;

Dense to_dense(const Matrix& m) {
  Dense d(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) d[r][c] = m(r, c);
  return d;
}

Dense product(const Dense& a, const Dense& b, std::size_t inner, std::size_t cols) {
  Dense out(a.size(), std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += a[i][k] * b[k][j];
      out[i][j] = s;
    }
  return out;
}

}  // namespace

Matrix gat(const Matrix& x, const std::vector<Edge>& edges, const Matrix& weight, std::span<const double> attn,
           std::span<const double> attn_inter, std::size_t heads, double slope) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t dh = d / heads;
  // mask[i][j]: 0 none, 1 intra or self, 2 inter (row i attends to column j)
  std::vector<std::vector<int>> mask(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i) mask[i][i] = 1;
  for (const auto& e : edges)
    if (e.inter && mask[e.dst][e.src] == 0) mask[e.dst][e.src] = 2;
  for (const auto& e : edges)
    if (!e.inter) mask[e.dst][e.src] = 1;

  const Dense h = product(to_dense(x), to_dense(weight), d, d);
  Matrix out(n, d);
  for (std::size_t head = 0; head < heads; ++head) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logits(n, 0.0);
      double denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (mask[i][j] == 0) continue;
        std::span<const double> a = (mask[i][j] == 2 && !attn_inter.empty()) ? attn_inter : attn;
        double e = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          e += a[head * dh + c] * h[i][head * dh + c];
          e += a[d + head * dh + c] * h[j][head * dh + c];
        }
        e = std::max(e, slope * e);
        logits[j] = std::exp(e);
        denom += logits[j];
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (mask[i][j] == 0) continue;
        for (std::size_t c = head * dh; c < (head + 1) * dh; ++c) out(i, c) += logits[j] / denom * h[j][c];
      }
    }
  }
  return out;
}

Matrix cga(const Matrix& x_target, const Matrix& x_related, const Matrix& w_q, const Matrix& w_k, const Matrix& w_v,
           std::span<const double> alpha, std::size_t heads) {
  const std::size_t nt = x_target.rows();
  const std::size_t nr = x_related.rows();
  const std::size_t d = w_q.rows();
  const std::size_t dh = d / heads;

  std::vector<double> ce_t(d), ce_r(d);
  for (std::size_t c = 0; c < d; ++c) {
    ce_t[c] = std::exp(alpha[c]) / (1.0 + std::exp(alpha[c]));
    if (!std::isfinite(ce_t[c])) ce_t[c] = 1.0;
    ce_r[c] = 1.0 - ce_t[c];
  }

  Dense all = to_dense(x_target);
  for (const auto& row : to_dense(x_related)) all.push_back(row);
  const Dense q = product(to_dense(x_target), to_dense(w_q), d, d);
  const Dense k = product(all, to_dense(w_k), d, d);
  const Dense v = product(all, to_dense(w_v), d, d);

  Matrix out(nt + nr, d);
  for (std::size_t head = 0; head < heads; ++head) {
    for (std::size_t i = 0; i < nt; ++i) {
      std::vector<double> s(nt + nr);
      for (std::size_t j = 0; j < nt + nr; ++j) {
        const auto& ce_k = j < nt ? ce_t : ce_r;
        double dot = 0.0;
        for (std::size_t c = head * dh; c < (head + 1) * dh; ++c) dot += (q[i][c] + ce_t[c]) * (k[j][c] + ce_k[c]);
        s[j] = dot / std::sqrt(static_cast<double>(dh));
      }
      const double top = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (auto& x : s) z += (x = std::exp(x - top));
      for (std::size_t j = 0; j < nt + nr; ++j) {
        const auto& ce_v = j < nt ? ce_t : ce_r;
        for (std::size_t c = head * dh; c < (head + 1) * dh; ++c) out(i, c) += s[j] / z * (v[j][c] + ce_v[c]);
      }
    }
  }
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < d; ++c) out(nt + r, c) = x_related(r, c);
  return out;
}

std::vector<RetrievalHit> top_n(const std::vector<VideoVector>& entries, std::span<const double> query, std::size_t n,
                                const std::set<std::string>& exclude, const SimilarityBand& band) {
  double qq = 0.0;
  for (double x : query) qq += x * x;
  std::vector<RetrievalHit> all;
  for (const auto& e : entries) {
    if (exclude.count(e.video_id)) continue;
    double dot = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
      dot += query[i] * e.vector[i];
      ee += e.vector[i] * e.vector[i];
    }
    const double sim = dot / (std::sqrt(qq) * std::sqrt(ee));
    if (sim >= band.min && sim <= band.max) all.push_back({e.video_id, sim});
  }
  std::sort(all.begin(), all.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.video_id < b.video_id);
  });
  if (all.size() > n) all.resize(n);
  return all;
}

double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace mvg::reference
