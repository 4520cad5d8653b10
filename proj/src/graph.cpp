#include "mvg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include "mvg/error.hpp"

namespace mvg {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w);
  const double y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

const GraphNode* VideoGraph::find_node(NodeId id) const {
  // Nodes are normally dense and ordered; fall back to a scan otherwise.
  if (id < nodes.size() && nodes[id].node_id == id) return &nodes[id];
  for (const auto& n : nodes)
    if (n.node_id == id) return &n;
  return nullptr;
}

std::vector<Triplet> filter_ungrounded(const std::vector<Triplet>& triplets,
                                       const GroundingSet& groundings) {
  std::vector<Triplet> kept;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    if (groundings.contains({i, Role::Subject}) && groundings.contains({i, Role::Object}))
      kept.push_back(triplets[i]);
  }
  return kept;
}

std::vector<GroundedTriplet> ground_triplets(const std::vector<Triplet>& triplets,
                                             const GroundingSet& groundings) {
  std::vector<GroundedTriplet> kept;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    auto s = groundings.find({i, Role::Subject});
    auto o = groundings.find({i, Role::Object});
    if (s == groundings.end() || o == groundings.end()) continue;
    kept.push_back({triplets[i], s->second, o->second});
  }
  return kept;
}

namespace {

using NodeKey = std::tuple<Keyframe, std::string, double, double, double, double>;

NodeKey key_of(Keyframe kf, const std::string& label, const BoundingBox& b) {
  return {kf, label, b.x, b.y, b.w, b.h};
}

std::optional<TrackId> match_track(const GraphNode& node, const std::vector<const Tracklet*>& sorted_tracks,
                                   double threshold) {
  std::optional<TrackId> best;
  double best_iou = threshold;
  for (const Tracklet* t : sorted_tracks) {
    for (const auto& occ : t->occurrences) {
      if (occ.keyframe != node.keyframe) continue;
      const double v = iou(occ.box, node.box);
      if (v > best_iou || (!best && v >= threshold)) {
        best = t->track_id;
        best_iou = v;
      }
    }
  }
  return best;
}

std::vector<const Tracklet*> sorted_by_id(const std::vector<Tracklet>& tracklets) {
  std::vector<const Tracklet*> out;
  out.reserve(tracklets.size());
  for (const auto& t : tracklets) out.push_back(&t);
  std::stable_sort(out.begin(), out.end(),
                   [](const Tracklet* a, const Tracklet* b) { return a->track_id < b->track_id; });
  return out;
}

}  // namespace

VideoGraph build_video_graph(const std::string& video_id, const std::vector<Keyframe>& keyframes,
                             const std::vector<GroundedTriplet>& grounded,
                             const std::vector<Tracklet>& tracklets, const FeatureLookup& features,
                             const GraphBuildOptions& options) {
  const std::set<Keyframe> known(keyframes.begin(), keyframes.end());
  for (std::size_t i = 0; i < grounded.size(); ++i) {
    const Keyframe kf = grounded[i].triplet.source_keyframe;
    if (!known.contains(kf))
      throw Error(ErrorCode::UnknownKeyframe, "triplet " + std::to_string(i) + " references keyframe " +
                                                  std::to_string(kf) + " which is not a keyframe of " + video_id);
  }

  std::vector<std::size_t> order(grounded.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grounded[a].triplet.source_keyframe < grounded[b].triplet.source_keyframe;
  });

  VideoGraph graph;
  graph.video_id = video_id;
  std::map<NodeKey, NodeId> index;

  auto node_for = [&](Keyframe kf, const std::string& label, const BoundingBox& box) -> NodeId {
    auto key = key_of(kf, label, box);
    if (auto it = index.find(key); it != index.end()) return it->second;
    GraphNode node;
    node.node_id = static_cast<NodeId>(graph.nodes.size());
    node.keyframe = kf;
    node.label = label;
    node.box = box;
    node.box.frame = kf;
    node.feature = features(kf, node.box);
    if (node.feature.size() != options.node_dim)
      throw Error(ErrorCode::FeatureDimensionMismatch,
                  "feature for '" + label + "' on keyframe " + std::to_string(kf) + " has dimension " +
                      std::to_string(node.feature.size()) + ", expected " + std::to_string(options.node_dim));
    index.emplace(std::move(key), node.node_id);
    graph.nodes.push_back(std::move(node));
    return graph.nodes.back().node_id;
  };

  for (std::size_t i : order) {
    const auto& g = grounded[i];
    const Keyframe kf = g.triplet.source_keyframe;
    const NodeId s = node_for(kf, g.triplet.subject, g.subject_box);
    const NodeId o = node_for(kf, g.triplet.object, g.object_box);
    if (s != o) graph.intra_edges.push_back({s, o, g.triplet.predicate});
  }

  const auto tracks = sorted_by_id(tracklets);
  for (auto& node : graph.nodes) node.track_id = match_track(node, tracks, options.track_iou_threshold);

  return add_inter_frame_edges(std::move(graph), tracklets);
}

VideoGraph add_inter_frame_edges(VideoGraph graph, const std::vector<Tracklet>& tracklets) {
  graph.inter_edges.clear();
  std::unordered_map<TrackId, std::map<Keyframe, std::vector<NodeId>>> by_track;
  for (const auto& n : graph.nodes)
    if (n.track_id) by_track[*n.track_id][n.keyframe].push_back(n.node_id);

  for (const Tracklet* t : sorted_by_id(tracklets)) {
    auto found = by_track.find(t->track_id);
    if (found == by_track.end()) continue;
    const std::vector<NodeId>* previous = nullptr;
    for (const auto& occ : t->occurrences) {
      auto group = found->second.find(occ.keyframe);
      if (group == found->second.end()) continue;
      if (previous) {
        for (NodeId a : *previous) {
          for (NodeId b : group->second) {
            graph.inter_edges.push_back({a, b, t->track_id});
            graph.inter_edges.push_back({b, a, t->track_id});
          }
        }
      }
      previous = &group->second;
    }
  }
  std::sort(graph.inter_edges.begin(), graph.inter_edges.end());
  graph.inter_edges.erase(std::unique(graph.inter_edges.begin(), graph.inter_edges.end()),
                          graph.inter_edges.end());
  return graph;
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_graph(const VideoGraph& graph, std::size_t expected_dim) {
  ValidationReport report;
  auto flag = [&](ViolationKind kind, std::string msg) { report.violations.push_back({kind, std::move(msg)}); };

  std::map<NodeId, const GraphNode*> nodes;
  std::size_t dim = expected_dim;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    if (!nodes.emplace(n.node_id, &n).second)
      flag(ViolationKind::DuplicateNodeId, "node id " + std::to_string(n.node_id) + " appears more than once");
    if (n.label.empty()) flag(ViolationKind::EmptyLabel, "node " + std::to_string(n.node_id) + " has an empty label");
    if (dim == 0) dim = n.feature.size();
    if (n.feature.size() != dim)
      flag(ViolationKind::FeatureDimension, "node " + std::to_string(n.node_id) + " feature dimension " +
                                                std::to_string(n.feature.size()) + " != " + std::to_string(dim));
    if (!std::all_of(n.feature.begin(), n.feature.end(), [](double v) { return std::isfinite(v); }))
      flag(ViolationKind::NonFiniteFeature, "node " + std::to_string(n.node_id) + " has a non-finite feature");
    if (i > 0) {
      const auto& p = graph.nodes[i - 1];
      if (p.node_id >= n.node_id || p.keyframe > n.keyframe)
        flag(ViolationKind::NodeOrder, "node " + std::to_string(n.node_id) + " is out of (keyframe, id) order");
    }
  }

  auto edge_name = [](const char* kind, NodeId s, NodeId d) {
    return std::string(kind) + " edge " + std::to_string(s) + "->" + std::to_string(d);
  };

  for (const auto& e : graph.intra_edges) {
    auto s = nodes.find(e.src);
    auto d = nodes.find(e.dst);
    if (s == nodes.end() || d == nodes.end()) {
      flag(ViolationKind::DanglingEdge, edge_name("intra", e.src, e.dst) + " references a missing node");
      continue;
    }
    if (e.src == e.dst) flag(ViolationKind::SelfLoop, edge_name("intra", e.src, e.dst) + " is a self-loop");
    if (s->second->keyframe != d->second->keyframe)
      flag(ViolationKind::IntraCrossesKeyframes, edge_name("intra", e.src, e.dst) + " connects keyframes " +
                                                     std::to_string(s->second->keyframe) + " and " +
                                                     std::to_string(d->second->keyframe));
    if (e.predicate.empty()) flag(ViolationKind::EmptyPredicate, edge_name("intra", e.src, e.dst) + " has no predicate");
  }

  std::multiset<std::tuple<NodeId, NodeId, TrackId>> inter;
  for (const auto& e : graph.inter_edges) inter.insert({e.src, e.dst, e.track_id});
  for (const auto& e : graph.inter_edges) {
    auto s = nodes.find(e.src);
    auto d = nodes.find(e.dst);
    if (s == nodes.end() || d == nodes.end()) {
      flag(ViolationKind::DanglingEdge, edge_name("inter", e.src, e.dst) + " references a missing node");
      continue;
    }
    if (e.src == e.dst) flag(ViolationKind::SelfLoop, edge_name("inter", e.src, e.dst) + " is a self-loop");
    if (s->second->keyframe == d->second->keyframe)
      flag(ViolationKind::InterSameKeyframe, edge_name("inter", e.src, e.dst) + " stays on keyframe " +
                                                 std::to_string(s->second->keyframe));
    if (s->second->track_id != e.track_id || d->second->track_id != e.track_id)
      flag(ViolationKind::InterTrackMismatch,
           edge_name("inter", e.src, e.dst) + " endpoints do not both carry track " + std::to_string(e.track_id));
    if (inter.count({e.dst, e.src, e.track_id}) != inter.count({e.src, e.dst, e.track_id}))
      flag(ViolationKind::MissingReverseEdge,
           edge_name("inter", e.src, e.dst) + " has no matching reverse edge " + std::to_string(e.dst) + "->" +
               std::to_string(e.src));
  }
  return report;
}

}  // namespace mvg
