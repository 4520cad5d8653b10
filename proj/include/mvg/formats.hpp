#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvg/graph.hpp"
#include "mvg/structuring.hpp"

namespace mvg {

// Binary formats share a 4-byte magic and a u32 version, little-endian.
inline constexpr std::uint32_t kFormatVersion = 1;

// "FDSC" | version | frames | dim | f32 row-major values
std::string encode_descriptors(const FrameDescriptors& d);
FrameDescriptors decode_descriptors(std::string bytes, const std::string& source = "<memory>");
void write_descriptor_file(const std::string& path, const FrameDescriptors& d);
FrameDescriptors read_descriptor_file(const std::string& path);

// "FEAT" | version | dim | count | count x (u32 keyframe, f32 x, y, w, h, f32[dim])
struct FeatureFile {
  std::uint32_t dim = 0;
  std::vector<FeatureRecord> records;
};
std::string encode_feature_file(const FeatureFile& f);
FeatureFile decode_feature_file(std::string bytes, const std::string& source = "<memory>");
void write_feature_file(const std::string& path, const FeatureFile& f);
FeatureFile read_feature_file(const std::string& path);

// JSON ingestion documents.
nlohmann::json triplets_to_json(const std::vector<Triplet>& triplets);
std::vector<Triplet> triplets_from_json(const nlohmann::json& doc, const std::string& source = "<memory>");

nlohmann::json groundings_to_json(const GroundingSet& groundings);
GroundingSet groundings_from_json(const nlohmann::json& doc, const std::string& source = "<memory>");

nlohmann::json tracklets_to_json(const std::vector<Tracklet>& tracklets);
std::vector<Tracklet> tracklets_from_json(const nlohmann::json& doc, const std::string& source = "<memory>");

nlohmann::json scenes_to_json(const std::vector<Scene>& scenes);
std::vector<Scene> scenes_from_json(const nlohmann::json& doc, const std::string& source = "<memory>");

// Graph documents reference node features by (file, row) in a FEAT file
// whose rows follow node order.
nlohmann::json graph_to_json(const VideoGraph& graph, const std::string& feature_file);
FeatureFile graph_feature_file(const VideoGraph& graph);
VideoGraph graph_from_json(const nlohmann::json& doc, const std::string& base_dir, const std::string& source = "<memory>");

struct GraphFiles {
  std::string graph_json;
  std::string features;
};
// Writes <dir>/<video_id>.graph.json and <dir>/<video_id>.nodes.feat.
GraphFiles write_graph_files(const std::string& dir, const VideoGraph& graph);
VideoGraph read_graph_file(const std::string& graph_json_path);

// Parses JSON text, mapping syntax errors to FormatError with byte offsets.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& doc);

}  // namespace mvg
