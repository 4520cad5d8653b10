#include "mvg/formats.hpp"

#include <filesystem>

#include "binary_io.hpp"
#include "mvg/error.hpp"

namespace mvg {

namespace fs = std::filesystem;
using detail::BinaryReader;
using detail::BinaryWriter;
using nlohmann::json;

namespace {

void expect_version(BinaryReader& r) {
  const std::uint32_t v = r.u32("version");
  if (v != kFormatVersion) r.fail("unsupported version " + std::to_string(v));
}

[[noreturn]] void schema_error(const std::string& source, const std::string& what) {
  throw Error(ErrorCode::FormatError, source + ": " + what, source);
}

// Wraps nlohmann accessors so schema errors name the offending document.
template <class F>
auto guarded(const std::string& source, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    schema_error(source, e.what());
  }
}

json box_to_json(const BoundingBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

BoundingBox box_from_json(const json& j, Keyframe frame, const std::string& source) {
  if (!j.is_array() || j.size() != 4) schema_error(source, "box must be [x, y, w, h]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), frame};
  if (!(b.w > 0.0) || !(b.h > 0.0) || b.x < 0.0 || b.y < 0.0)
    schema_error(source, "box must have x, y >= 0 and w, h > 0");
  return b;
}

}  // namespace

std::string encode_descriptors(const FrameDescriptors& d) {
  BinaryWriter w;
  w.magic("FDSC");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(d.values.rows()));
  w.u32(static_cast<std::uint32_t>(d.values.cols()));
  for (double v : d.values.values()) w.f32(static_cast<float>(v));
  return w.take();
}

FrameDescriptors decode_descriptors(std::string bytes, const std::string& source) {
  BinaryReader r(std::move(bytes), source);
  r.expect_magic("FDSC");
  expect_version(r);
  const std::uint32_t frames = r.u32("frame count");
  const std::uint32_t dim = r.u32("dimension");
  if (static_cast<std::uint64_t>(frames) * dim * 4 > r.remaining())
    r.fail("payload shorter than " + std::to_string(frames) + " x " + std::to_string(dim));
  FrameDescriptors d{Matrix(frames, dim)};
  for (double& v : d.values.values()) v = r.f32("descriptor value");
  if (!r.at_end()) r.fail("trailing bytes after descriptor payload");
  return d;
}

void write_descriptor_file(const std::string& path, const FrameDescriptors& d) {
  detail::write_file(path, encode_descriptors(d));
}

FrameDescriptors read_descriptor_file(const std::string& path) {
  return decode_descriptors(detail::read_file(path), path);
}

std::string encode_feature_file(const FeatureFile& f) {
  BinaryWriter w;
  w.magic("FEAT");
  w.u32(kFormatVersion);
  w.u32(f.dim);
  w.u32(static_cast<std::uint32_t>(f.records.size()));
  for (const auto& rec : f.records) {
    if (rec.values.size() != f.dim)
      throw Error(ErrorCode::FeatureDimensionMismatch, "feature record dimension differs from file dimension");
    w.u32(rec.keyframe);
    w.f32(static_cast<float>(rec.box.x));
    w.f32(static_cast<float>(rec.box.y));
    w.f32(static_cast<float>(rec.box.w));
    w.f32(static_cast<float>(rec.box.h));
    for (float v : rec.values) w.f32(v);
  }
  return w.take();
}

FeatureFile decode_feature_file(std::string bytes, const std::string& source) {
  BinaryReader r(std::move(bytes), source);
  r.expect_magic("FEAT");
  expect_version(r);
  FeatureFile f;
  f.dim = r.u32("dimension");
  const std::uint32_t count = r.u32("record count");
  const std::uint64_t record_bytes = 4ull * (5ull + f.dim);
  if (record_bytes * count > r.remaining()) r.fail("truncated feature records (expected " + std::to_string(count) + ")");
  f.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord rec;
    rec.keyframe = r.u32("keyframe");
    rec.box.x = r.f32("box");
    rec.box.y = r.f32("box");
    rec.box.w = r.f32("box");
    rec.box.h = r.f32("box");
    rec.box.frame = rec.keyframe;
    rec.values.resize(f.dim);
    for (auto& v : rec.values) {
      v = r.f32("feature value");
      if (!std::isfinite(v)) r.fail("non-finite feature value in record " + std::to_string(i));
    }
    f.records.push_back(std::move(rec));
  }
  if (!r.at_end()) r.fail("trailing bytes after " + std::to_string(count) + " records");
  return f;
}

void write_feature_file(const std::string& path, const FeatureFile& f) {
  detail::write_file(path, encode_feature_file(f));
}

FeatureFile read_feature_file(const std::string& path) { return decode_feature_file(detail::read_file(path), path); }

json triplets_to_json(const std::vector<Triplet>& triplets) {
  json arr = json::array();
  for (const auto& t : triplets)
    arr.push_back({{"subject", t.subject}, {"predicate", t.predicate}, {"object", t.object},
                   {"keyframe", t.source_keyframe}});
  return arr;
}

std::vector<Triplet> triplets_from_json(const json& doc, const std::string& source) {
  return guarded(source, [&] {
    std::vector<Triplet> out;
    for (const auto& j : doc) {
      Triplet t{j.at("subject").get<std::string>(), j.at("predicate").get<std::string>(),
                j.at("object").get<std::string>(), j.at("keyframe").get<Keyframe>()};
      if (t.subject.empty() || t.predicate.empty() || t.object.empty())
        schema_error(source, "triplet " + std::to_string(out.size()) + " has an empty field");
      out.push_back(std::move(t));
    }
    return out;
  });
}

json groundings_to_json(const GroundingSet& groundings) {
  json arr = json::array();
  for (const auto& [key, box] : groundings)
    arr.push_back({{"triplet", key.first},
                   {"role", key.second == Role::Subject ? "subject" : "object"},
                   {"frame", box.frame},
                   {"box", box_to_json(box)}});
  return arr;
}

GroundingSet groundings_from_json(const json& doc, const std::string& source) {
  return guarded(source, [&] {
    GroundingSet out;
    for (const auto& j : doc) {
      const auto role_name = j.at("role").get<std::string>();
      Role role;
      if (role_name == "subject") role = Role::Subject;
      else if (role_name == "object") role = Role::Object;
      else schema_error(source, "unknown grounding role '" + role_name + "'");
      const auto frame = j.contains("frame") ? j.at("frame").get<Keyframe>() : Keyframe{0};
      GroundingKey key{j.at("triplet").get<std::size_t>(), role};
      if (!out.emplace(key, box_from_json(j.at("box"), frame, source)).second)
        schema_error(source, "duplicate grounding for triplet " + std::to_string(key.first));
    }
    return out;
  });
}

json tracklets_to_json(const std::vector<Tracklet>& tracklets) {
  json arr = json::array();
  for (const auto& t : tracklets) {
    json occ = json::array();
    for (const auto& o : t.occurrences) occ.push_back({{"keyframe", o.keyframe}, {"box", box_to_json(o.box)}});
    arr.push_back({{"track_id", t.track_id}, {"occurrences", std::move(occ)}});
  }
  return arr;
}

std::vector<Tracklet> tracklets_from_json(const json& doc, const std::string& source) {
  return guarded(source, [&] {
    std::vector<Tracklet> out;
    for (const auto& j : doc) {
      Tracklet t;
      t.track_id = j.at("track_id").get<TrackId>();
      for (const auto& o : j.at("occurrences")) {
        const auto kf = o.at("keyframe").get<Keyframe>();
        if (!t.occurrences.empty() && t.occurrences.back().keyframe >= kf)
          schema_error(source, "track " + std::to_string(t.track_id) + " keyframes are not strictly increasing");
        t.occurrences.push_back({kf, box_from_json(o.at("box"), kf, source)});
      }
      out.push_back(std::move(t));
    }
    return out;
  });
}

json scenes_to_json(const std::vector<Scene>& scenes) {
  json arr = json::array();
  for (const auto& s : scenes) arr.push_back({{"start", s.start}, {"end", s.end}, {"keyframe", s.keyframe}});
  return arr;
}

std::vector<Scene> scenes_from_json(const json& doc, const std::string& source) {
  return guarded(source, [&] {
    std::vector<Scene> out;
    for (const auto& j : doc) {
      Scene s{j.at("start").get<std::uint32_t>(), j.at("end").get<std::uint32_t>(), 0};
      s.keyframe = j.contains("keyframe") ? j.at("keyframe").get<std::uint32_t>() : (s.start + s.end) / 2;
      if (s.start > s.keyframe || s.keyframe > s.end) schema_error(source, "scene keyframe outside [start, end]");
      if (!out.empty() && out.back().end + 1 != s.start) schema_error(source, "scenes must be contiguous and ordered");
      out.push_back(s);
    }
    return out;
  });
}

json graph_to_json(const VideoGraph& graph, const std::string& feature_file) {
  json nodes = json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    nodes.push_back({{"id", n.node_id},
                     {"keyframe", n.keyframe},
                     {"label", n.label},
                     {"track_id", n.track_id ? json(*n.track_id) : json(nullptr)},
                     {"box", box_to_json(n.box)},
                     {"feature_ref", {{"file", feature_file}, {"row", i}}}});
  }
  json intra = json::array();
  for (const auto& e : graph.intra_edges) intra.push_back({{"src", e.src}, {"dst", e.dst}, {"predicate", e.predicate}});
  json inter = json::array();
  for (const auto& e : graph.inter_edges) inter.push_back({{"src", e.src}, {"dst", e.dst}, {"track_id", e.track_id}});
  return {{"video_id", graph.video_id}, {"nodes", nodes}, {"intra_edges", intra}, {"inter_edges", inter}};
}

FeatureFile graph_feature_file(const VideoGraph& graph) {
  FeatureFile f;
  f.dim = graph.nodes.empty() ? 0 : static_cast<std::uint32_t>(graph.nodes.front().feature.size());
  for (const auto& n : graph.nodes) {
    FeatureRecord rec{n.keyframe, n.box, {}};
    rec.values.assign(n.feature.begin(), n.feature.end());
    f.records.push_back(std::move(rec));
  }
  return f;
}

VideoGraph graph_from_json(const json& doc, const std::string& base_dir, const std::string& source) {
  return guarded(source, [&] {
    VideoGraph g;
    g.video_id = doc.at("video_id").get<std::string>();
    std::map<std::string, FeatureFile> feature_files;
    for (const auto& j : doc.at("nodes")) {
      GraphNode n;
      n.node_id = j.at("id").get<NodeId>();
      n.keyframe = j.at("keyframe").get<Keyframe>();
      n.label = j.at("label").get<std::string>();
      if (!j.at("track_id").is_null()) n.track_id = j.at("track_id").get<TrackId>();
      n.box = box_from_json(j.at("box"), n.keyframe, source);
      const auto& ref = j.at("feature_ref");
      const auto file = ref.at("file").get<std::string>();
      const auto row = ref.at("row").get<std::size_t>();
      auto it = feature_files.find(file);
      if (it == feature_files.end())
        it = feature_files.emplace(file, read_feature_file((fs::path(base_dir) / file).string())).first;
      if (row >= it->second.records.size())
        schema_error(source, "feature_ref row " + std::to_string(row) + " is past the end of " + file);
      const auto& vals = it->second.records[row].values;
      n.feature.assign(vals.begin(), vals.end());
      g.nodes.push_back(std::move(n));
    }
    for (const auto& j : doc.at("intra_edges"))
      g.intra_edges.push_back({j.at("src").get<NodeId>(), j.at("dst").get<NodeId>(), j.at("predicate").get<std::string>()});
    for (const auto& j : doc.at("inter_edges"))
      g.inter_edges.push_back({j.at("src").get<NodeId>(), j.at("dst").get<NodeId>(), j.at("track_id").get<TrackId>()});
    return g;
  });
}

GraphFiles write_graph_files(const std::string& dir, const VideoGraph& graph) {
  fs::create_directories(dir);
  const std::string feat_name = graph.video_id + ".nodes.feat";
  GraphFiles files{(fs::path(dir) / (graph.video_id + ".graph.json")).string(), (fs::path(dir) / feat_name).string()};
  write_feature_file(files.features, graph_feature_file(graph));
  write_json_file(files.graph_json, graph_to_json(graph, feat_name));
  return files;
}

VideoGraph read_graph_file(const std::string& graph_json_path) {
  const auto doc = read_json_file(graph_json_path);
  return graph_from_json(doc, fs::path(graph_json_path).parent_path().string(), graph_json_path);
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, source + ": " + e.what(), source, e.byte);
  }
}

json read_json_file(const std::string& path) { return parse_json_text(detail::read_file(path), path); }

void write_json_file(const std::string& path, const json& doc) { detail::write_file(path, doc.dump(2) + "\n"); }

}  // namespace mvg
