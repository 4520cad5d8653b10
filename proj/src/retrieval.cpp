#include "mvg/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "binary_io.hpp"
#include "mvg/error.hpp"

namespace mvg {

namespace {

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Ranking order: higher similarity first, then ascending id.
bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.video_id < b.video_id;
}

}  // namespace

VideoVector VideoVector::make(std::string video_id, std::vector<double> vector) {
  VideoVector v{std::move(video_id), std::move(vector), 0.0};
  v.norm = l2(v.vector);
  if (!(v.norm > 0.0) || !std::isfinite(v.norm))
    throw Error(ErrorCode::ZeroVector, "video '" + v.video_id + "' has a zero or non-finite vector");
  return v;
}

RetrievalIndex RetrievalIndex::build(std::vector<VideoVector> entries) {
  RetrievalIndex index;
  std::unordered_set<std::string> seen;
  for (auto& e : entries) {
    if (!seen.insert(e.video_id).second) throw Error(ErrorCode::DuplicateId, "duplicate video id '" + e.video_id + "'");
    if (index.dim_ == 0) index.dim_ = e.vector.size();
    if (e.vector.size() != index.dim_)
      throw Error(ErrorCode::DimensionMismatch, "video '" + e.video_id + "' has dimension " +
                                                    std::to_string(e.vector.size()) + ", expected " +
                                                    std::to_string(index.dim_));
    e.norm = l2(e.vector);
    if (!(e.norm > 0.0) || !std::isfinite(e.norm))
      throw Error(ErrorCode::ZeroVector, "video '" + e.video_id + "' has a zero or non-finite vector");
  }
  index.entries_ = std::move(entries);
  return index;
}

const VideoVector* RetrievalIndex::find(const std::string& video_id) const {
  for (const auto& e : entries_)
    if (e.video_id == video_id) return &e;
  return nullptr;
}

std::vector<RetrievalHit> RetrievalIndex::query_top_n(std::span<const double> query, std::size_t n,
                                                      const std::set<std::string>& exclude,
                                                      const SimilarityBand& band) const {
  if (!entries_.empty() && query.size() != dim_)
    throw Error(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.size()) + ", index has " +
                                                  std::to_string(dim_));
  const double qn = l2(query);
  if (!(qn > 0.0)) throw Error(ErrorCode::ZeroVector, "query vector is zero");
  if (n == 0) return {};

  // Bounded heap whose top is the worst hit kept so far.
  auto worse = [](const RetrievalHit& a, const RetrievalHit& b) { return ranks_before(a, b); };
  std::priority_queue<RetrievalHit, std::vector<RetrievalHit>, decltype(worse)> heap(worse);
  for (const auto& e : entries_) {
    if (exclude.contains(e.video_id)) continue;
    double dot = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) dot += query[i] * e.vector[i];
    RetrievalHit hit{e.video_id, dot / (qn * e.norm)};
    if (hit.similarity < band.min || hit.similarity > band.max) continue;
    if (heap.size() < n) {
      heap.push(std::move(hit));
    } else if (ranks_before(hit, heap.top())) {
      heap.pop();
      heap.push(std::move(hit));
    }
  }
  std::vector<RetrievalHit> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string encode_vector_store(const std::vector<VideoVector>& entries, std::size_t dim) {
  detail::BinaryWriter w;
  w.magic("VVEC");
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.vector.size() != dim) throw Error(ErrorCode::DimensionMismatch, "vector store entry '" + e.video_id + "' has wrong dimension");
    w.u32(static_cast<std::uint32_t>(e.video_id.size()));
    w.bytes(e.video_id);
    for (double v : e.vector) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<VideoVector> decode_vector_store(std::string bytes, const std::string& source) {
  detail::BinaryReader r(std::move(bytes), source);
  r.expect_magic("VVEC");
  const std::uint32_t dim = r.u32("dimension");
  const std::uint32_t count = r.u32("entry count");
  std::vector<VideoVector> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32("id length");
    if (len == 0 || len > 4096) r.fail("implausible id length " + std::to_string(len));
    VideoVector v;
    v.video_id = r.bytes(len, "video id");
    v.vector.resize(dim);
    for (auto& x : v.vector) x = r.f32("vector value");
    v.norm = l2(v.vector);
    out.push_back(std::move(v));
  }
  if (!r.at_end()) r.fail("trailing bytes after " + std::to_string(count) + " entries");
  return out;
}

void write_vector_store(const std::string& path, const std::vector<VideoVector>& entries, std::size_t dim) {
  detail::write_file(path, encode_vector_store(entries, dim));
}

std::vector<VideoVector> read_vector_store(const std::string& path) {
  return decode_vector_store(detail::read_file(path), path);
}

}  // namespace mvg
