#pragma once

#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace mvg {

struct VideoVector {
  std::string video_id;
  std::vector<double> vector;
  double norm = 0.0;

  // Computes the cached norm; throws ZeroVector for an all-zero vector.
  static VideoVector make(std::string video_id, std::vector<double> vector);
};

struct RetrievalHit {
  std::string video_id;
  double similarity = 0.0;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

// Keeps hits whose similarity lies in [min, max].
struct SimilarityBand {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

// Exact cosine-similarity index over a fixed set of videos.
class RetrievalIndex {
 public:
  static RetrievalIndex build(std::vector<VideoVector> entries);

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<VideoVector>& entries() const { return entries_; }
  const VideoVector* find(const std::string& video_id) const;

  // Top-n by cosine similarity, descending, ties by ascending video id.
  std::vector<RetrievalHit> query_top_n(std::span<const double> query, std::size_t n,
                                        const std::set<std::string>& exclude = {},
                                        const SimilarityBand& band = {}) const;

 private:
  std::vector<VideoVector> entries_;
  std::size_t dim_ = 0;
};

// "VVEC" | u32 dim | u32 count | count x (u32 id length, id bytes, f32[dim])
std::string encode_vector_store(const std::vector<VideoVector>& entries, std::size_t dim);
std::vector<VideoVector> decode_vector_store(std::string bytes, const std::string& source = "<memory>");
void write_vector_store(const std::string& path, const std::vector<VideoVector>& entries, std::size_t dim);
std::vector<VideoVector> read_vector_store(const std::string& path);

}  // namespace mvg
