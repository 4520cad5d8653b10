#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mvg {

using Keyframe = std::uint32_t;
using NodeId = std::uint32_t;
using TrackId = std::int64_t;

inline constexpr std::size_t kDefaultNodeDim = 1024;

struct Triplet {
  std::string subject;
  std::string predicate;
  std::string object;
  Keyframe source_keyframe = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  Keyframe frame = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Intersection over union of two boxes; frames are not compared.
double iou(const BoundingBox& a, const BoundingBox& b);

struct TrackOccurrence {
  Keyframe keyframe = 0;
  BoundingBox box;
};

struct Tracklet {
  TrackId track_id = 0;
  std::vector<TrackOccurrence> occurrences;  // strictly increasing keyframe
};

enum class Role { Subject, Object };

// Groundings are keyed by (triplet index, role), never by label text.
using GroundingKey = std::pair<std::size_t, Role>;
using GroundingSet = std::map<GroundingKey, BoundingBox>;

struct GroundedTriplet {
  Triplet triplet;
  BoundingBox subject_box;
  BoundingBox object_box;
};

struct GraphNode {
  NodeId node_id = 0;
  Keyframe keyframe = 0;
  std::string label;
  std::optional<TrackId> track_id;
  BoundingBox box;
  std::vector<double> feature;
};

struct IntraEdge {
  NodeId src = 0;
  NodeId dst = 0;
  std::string predicate;

  friend bool operator==(const IntraEdge&, const IntraEdge&) = default;
};

struct InterEdge {
  NodeId src = 0;
  NodeId dst = 0;
  TrackId track_id = 0;

  friend bool operator==(const InterEdge&, const InterEdge&) = default;
  friend auto operator<=>(const InterEdge&, const InterEdge&) = default;
};

// Spatio-temporal graph of one video. Nodes are stored in node_id order,
// which is also keyframe order. Self-loops are never stored.
struct VideoGraph {
  std::string video_id;
  std::vector<GraphNode> nodes;
  std::vector<IntraEdge> intra_edges;
  std::vector<InterEdge> inter_edges;

  const GraphNode* find_node(NodeId id) const;
};

// Yields the d_node feature vector for a grounded region on a keyframe.
using FeatureLookup = std::function<std::vector<double>(Keyframe, const BoundingBox&)>;

struct GraphBuildOptions {
  std::size_t node_dim = kDefaultNodeDim;
  // Minimum IoU between a node's box and a tracklet occurrence on the same
  // keyframe for the node to inherit that track id.
  double track_iou_threshold = 0.5;
};

std::vector<Triplet> filter_ungrounded(const std::vector<Triplet>& triplets,
                                       const GroundingSet& groundings);

// filter_ungrounded plus attaching both role boxes to each kept triplet.
std::vector<GroundedTriplet> ground_triplets(const std::vector<Triplet>& triplets,
                                             const GroundingSet& groundings);

VideoGraph build_video_graph(const std::string& video_id, const std::vector<Keyframe>& keyframes,
                             const std::vector<GroundedTriplet>& grounded,
                             const std::vector<Tracklet>& tracklets,
                             const FeatureLookup& features,
                             const GraphBuildOptions& options = {});

// Links nodes of the same track on consecutive occurrences of that track,
// inserting both directions. Existing inter edges are replaced.
VideoGraph add_inter_frame_edges(VideoGraph graph, const std::vector<Tracklet>& tracklets);

enum class ViolationKind {
  DuplicateNodeId,
  FeatureDimension,
  NonFiniteFeature,
  EmptyLabel,
  DanglingEdge,
  SelfLoop,
  IntraCrossesKeyframes,
  EmptyPredicate,
  InterSameKeyframe,
  InterTrackMismatch,
  MissingReverseEdge,
  NodeOrder,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind kind) const;
};

// expected_dim of 0 only checks that all features share one dimension.
ValidationReport validate_graph(const VideoGraph& graph, std::size_t expected_dim = 0);

}  // namespace mvg
