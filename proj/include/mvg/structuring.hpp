#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvg/caption_parser.hpp"
#include "mvg/graph.hpp"
#include "mvg/matrix.hpp"

namespace mvg {

// Per-frame content descriptors, one row per frame (e.g. a color histogram).
struct FrameDescriptors {
  Matrix values;  // frames x dim
};

struct Scene {
  std::uint32_t start = 0;
  std::uint32_t end = 0;  // inclusive
  std::uint32_t keyframe = 0;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct SceneDetectorConfig {
  double threshold = 0.15;      // mean absolute difference on unit-scaled descriptors
  std::uint32_t min_scene_len = 8;
};

// Cuts before frame t when mean |d_t - d_{t-1}| exceeds the threshold and the
// open scene already spans at least min_scene_len frames.
std::vector<Scene> detect_scenes(const FrameDescriptors& descriptors, const SceneDetectorConfig& config = {});

std::vector<Keyframe> select_keyframes(const std::vector<Scene>& scenes);

class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> feature(Keyframe keyframe, const BoundingBox& box) const = 0;
};

// Deterministic stand-in for a crop encoder. The key (seed, keyframe, box
// coordinates as f32 bits) is hashed with FNV-1a, the hash seeds a
// mt19937_64 stream, each 64-bit draw maps to [-1, 1) through its top 53
// bits, and the vector is scaled to unit L2 norm.
class SyntheticFeatureSource final : public FeatureSource {
 public:
  SyntheticFeatureSource(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  std::vector<double> feature(Keyframe keyframe, const BoundingBox& box) const override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

struct FeatureRecord {
  Keyframe keyframe = 0;
  BoundingBox box;
  std::vector<float> values;
};

// Lookup table over a feature file; keys compare box coordinates as f32.
class FileFeatureSource final : public FeatureSource {
 public:
  FileFeatureSource(std::vector<FeatureRecord> records, std::size_t dim, std::string origin = "<memory>");
  static FileFeatureSource load(const std::string& path);

  std::size_t dim() const override { return dim_; }
  std::vector<double> feature(Keyframe keyframe, const BoundingBox& box) const override;
  const std::vector<FeatureRecord>& records() const { return records_; }

 private:
  using Key = std::tuple<Keyframe, float, float, float, float>;
  std::vector<FeatureRecord> records_;
  std::map<Key, std::size_t> index_;
  std::size_t dim_;
  std::string origin_;
};

std::vector<double> extract_node_features(Keyframe keyframe, const BoundingBox& box, const FeatureSource& source);

// Everything needed to structure one video. Exactly one of descriptors /
// scenes and one of captions / triplets must be supplied.
struct VideoBundle {
  std::string video_id;
  std::optional<FrameDescriptors> descriptors;
  std::optional<std::vector<Scene>> scenes;
  std::optional<std::vector<CaptionLine>> captions;
  std::optional<std::vector<Triplet>> triplets;
  GroundingSet groundings;
  std::vector<Tracklet> tracklets;
  std::shared_ptr<const FeatureSource> features;
};

struct StructuringOptions {
  SceneDetectorConfig scenes;
  GraphBuildOptions graph;
  const Lexicon* lexicon = nullptr;  // bundled lexicon when null
};

struct StructuringResult {
  std::vector<Scene> scenes;
  std::vector<Keyframe> keyframes;
  std::vector<Triplet> triplets;          // before grounding filter
  std::vector<GroundedTriplet> grounded;  // after grounding filter
  VideoGraph graph;
};

// Scene detection, keyframes, triplet parsing, grounding filter, and graph
// establishment, in that order. Throws ValidationFailed when the graph
// breaks an invariant.
StructuringResult structure_video_detailed(const VideoBundle& bundle, const StructuringOptions& options = {});
VideoGraph structure_video(const VideoBundle& bundle, const StructuringOptions& options = {});

}  // namespace mvg
