#include "mvg/structuring.hpp"

#include <cmath>
#include <random>

#include "hashing.hpp"
#include "mvg/error.hpp"
#include "mvg/formats.hpp"

namespace mvg {

std::vector<Scene> detect_scenes(const FrameDescriptors& descriptors, const SceneDetectorConfig& config) {
  const Matrix& d = descriptors.values;
  if (d.rows() == 0) throw Error(ErrorCode::EmptyInput, "detect_scenes: no frames");
  if (d.cols() == 0) throw Error(ErrorCode::EmptyInput, "detect_scenes: descriptors have dimension 0");
  if (!(config.threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "detect_scenes: threshold must be > 0");
  if (config.min_scene_len < 1) throw Error(ErrorCode::InvalidArgument, "detect_scenes: min_scene_len must be >= 1");
  for (double v : d.values())
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "detect_scenes: non-finite descriptor value");

  std::vector<Scene> scenes;
  std::uint32_t start = 0;
  const auto frames = static_cast<std::uint32_t>(d.rows());
  for (std::uint32_t t = 1; t < frames; ++t) {
    auto cur = d.row(t);
    auto prev = d.row(t - 1);
    double l1 = 0.0;
    for (std::size_t c = 0; c < cur.size(); ++c) l1 += std::abs(cur[c] - prev[c]);
    const double score = l1 / static_cast<double>(cur.size());
    if (score > config.threshold && t - start >= config.min_scene_len) {
      scenes.push_back({start, t - 1, (start + t - 1) / 2});
      start = t;
    }
  }
  scenes.push_back({start, frames - 1, (start + frames - 1) / 2});
  return scenes;
}

std::vector<Keyframe> select_keyframes(const std::vector<Scene>& scenes) {
  std::vector<Keyframe> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back((s.start + s.end) / 2);
  return out;
}

std::vector<double> SyntheticFeatureSource::feature(Keyframe keyframe, const BoundingBox& box) const {
  detail::Fnv1a h;
  h.u64(seed_).u64(keyframe);
  h.f32(static_cast<float>(box.x)).f32(static_cast<float>(box.y));
  h.f32(static_cast<float>(box.w)).f32(static_cast<float>(box.h));
  std::mt19937_64 rng(h.value());
  std::vector<double> v(dim_);
  double norm2 = 0.0;
  for (auto& x : v) {
    x = detail::unit_interval_signed(rng());
    norm2 += x * x;
  }
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  for (auto& x : v) x *= inv;
  return v;
}

FileFeatureSource::FileFeatureSource(std::vector<FeatureRecord> records, std::size_t dim, std::string origin)
    : records_(std::move(records)), dim_(dim), origin_(std::move(origin)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.values.size() != dim_)
      throw Error(ErrorCode::FeatureDimensionMismatch, "feature row " + std::to_string(i) + " has wrong dimension",
                  origin_);
    index_.emplace(Key{r.keyframe, static_cast<float>(r.box.x), static_cast<float>(r.box.y),
                       static_cast<float>(r.box.w), static_cast<float>(r.box.h)},
                   i);
  }
}

FileFeatureSource FileFeatureSource::load(const std::string& path) {
  auto file = read_feature_file(path);
  return FileFeatureSource(std::move(file.records), file.dim, path);
}

std::vector<double> FileFeatureSource::feature(Keyframe keyframe, const BoundingBox& box) const {
  auto it = index_.find(Key{keyframe, static_cast<float>(box.x), static_cast<float>(box.y),
                            static_cast<float>(box.w), static_cast<float>(box.h)});
  if (it == index_.end())
    throw Error(ErrorCode::MissingFeature,
                "no feature for keyframe " + std::to_string(keyframe) + " box [" + std::to_string(box.x) + ", " +
                    std::to_string(box.y) + ", " + std::to_string(box.w) + ", " + std::to_string(box.h) + "]",
                origin_);
  const auto& vals = records_[it->second].values;
  return {vals.begin(), vals.end()};
}

std::vector<double> extract_node_features(Keyframe keyframe, const BoundingBox& box, const FeatureSource& source) {
  return source.feature(keyframe, box);
}

StructuringResult structure_video_detailed(const VideoBundle& bundle, const StructuringOptions& options) {
  StructuringResult r;
  if (bundle.scenes) {
    r.scenes = *bundle.scenes;
  } else if (bundle.descriptors) {
    r.scenes = detect_scenes(*bundle.descriptors, options.scenes);
  } else {
    throw Error(ErrorCode::InvalidArgument, bundle.video_id + ": bundle has neither scenes nor descriptors");
  }
  r.keyframes = select_keyframes(r.scenes);

  const Lexicon& lex = options.lexicon ? *options.lexicon : Lexicon::bundled();
  if (bundle.triplets) {
    r.triplets = *bundle.triplets;
  } else if (bundle.captions) {
    r.triplets = parse_captions(*bundle.captions, lex);
  } else {
    throw Error(ErrorCode::InvalidArgument, bundle.video_id + ": bundle has neither triplets nor captions");
  }

  r.grounded = ground_triplets(r.triplets, bundle.groundings);
  if (!r.grounded.empty() && !bundle.features)
    throw Error(ErrorCode::InvalidArgument, bundle.video_id + ": bundle has no feature source");

  const FeatureSource* source = bundle.features.get();
  FeatureLookup lookup = [source](Keyframe kf, const BoundingBox& box) {
    return extract_node_features(kf, box, *source);
  };
  r.graph = build_video_graph(bundle.video_id, r.keyframes, r.grounded, bundle.tracklets, lookup, options.graph);

  auto report = validate_graph(r.graph, options.graph.node_dim);
  if (!report.ok())
    throw Error(ErrorCode::ValidationFailed,
                bundle.video_id + ": graph validation failed: " + report.violations.front().message);
  return r;
}

VideoGraph structure_video(const VideoBundle& bundle, const StructuringOptions& options) {
  return structure_video_detailed(bundle, options).graph;
}

}  // namespace mvg
