#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "binary_io.hpp"
#include "hashing.hpp"
#include "rng.hpp"
#include "mvg/error.hpp"
#include "mvg/formats.hpp"
#include "mvg/pipeline.hpp"

namespace mvg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using detail::Rng;

struct Topic {
  std::string name;
  std::vector<std::string> agents;
  std::vector<std::string> objects;
  std::vector<std::string> verbs;
};

const std::vector<Topic>& topics() {
  static const std::vector<Topic> all = {
      {"kitchen", {"man", "woman", "chef"}, {"cup", "knife", "onion", "bowl", "pan", "spoon"},
       {"hold", "chop", "stir", "wash", "lift", "slice", "fill", "grab"}},
      {"workshop", {"worker", "man", "woman"}, {"hammer", "plank", "drill", "box", "ladder", "bucket"},
       {"hold", "lift", "carry", "paint", "push", "move", "fix", "grab"}},
      {"park", {"boy", "girl", "dog", "man"}, {"ball", "frisbee", "bench", "kite", "stick", "bottle"},
       {"kick", "throw", "catch", "chase", "hold", "carry", "grab", "drop"}},
      {"street", {"cyclist", "woman", "man"}, {"bike", "bag", "car", "door", "umbrella", "map"},
       {"ride", "push", "carry", "open", "hold", "watch", "close", "grab"}},
  };
  return all;
}

std::string third_person(const std::string& verb) {
  auto ends = [&](const char* s) {
    const std::string suf(s);
    return verb.size() >= suf.size() && verb.compare(verb.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends("s") || ends("sh") || ends("ch") || ends("x") || ends("z") || ends("o")) return verb + "es";
  if (ends("y") && verb.size() > 1 && std::string("aeiou").find(verb[verb.size() - 2]) == std::string::npos)
    return verb.substr(0, verb.size() - 1) + "ies";
  return verb + "s";
}

std::string video_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "vid_%03zu", i);
  return buf;
}

FrameDescriptors make_descriptors(Rng& rng, std::size_t scenes, std::size_t dim) {
  std::vector<std::vector<double>> rows;
  for (std::size_t s = 0; s < scenes; ++s) {
    const std::size_t len = 12 + rng.below(19);
    const double floor = s % 2 == 0 ? 0.1 : 0.6;
    std::vector<double> base(dim);
    for (auto& b : base) b = floor + 0.3 * rng.uniform();
    for (std::size_t f = 0; f < len; ++f) {
      std::vector<double> row(dim);
      for (std::size_t c = 0; c < dim; ++c) row[c] = base[c] + 0.01 * (rng.uniform() - 0.5);
      rows.push_back(std::move(row));
    }
  }
  FrameDescriptors d{Matrix(rows.size(), dim)};
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < dim; ++c) d.values(r, c) = static_cast<float>(rows[r][c]);
  return d;
}

struct Entity {
  std::string label;
  BoundingBox base;
  bool tracked = true;
};

BoundingBox place(Rng& rng) {
  BoundingBox b;
  b.x = static_cast<double>(rng.below(400));
  b.y = static_cast<double>(rng.below(300));
  b.w = static_cast<double>(40 + rng.below(80));
  b.h = static_cast<double>(40 + rng.below(80));
  return b;
}

BoundingBox jitter(Rng& rng, const BoundingBox& base, Keyframe kf) {
  BoundingBox b = base;
  b.x += static_cast<double>(rng.below(5));
  b.y += static_cast<double>(rng.below(5));
  b.frame = kf;
  return b;
}

std::string sentence(Rng& rng, const Topic& topic, const std::vector<Entity>& agents, const std::vector<Entity>& objects) {
  const std::string& a = rng.pick(agents).label;
  const std::string& o1 = rng.pick(objects).label;
  switch (rng.below(4)) {
    case 0: {
      std::string o2 = rng.pick(objects).label;
      return "The " + a + " " + third_person(rng.pick(topic.verbs)) + " the " + o1 + " and " +
             third_person(rng.pick(topic.verbs)) + " the " + o2 + ".";
    }
    case 1:
      return "The " + a + " carefully " + third_person(rng.pick(topic.verbs)) + " the " + o1 + ".";
    case 2: {
      const std::string& other = rng.pick(agents).label;
      if (other != a) return "The " + a + " " + third_person(rng.chance(0.5) ? "watch" : "follow") + " the " + other + ".";
      return "The " + a + " " + third_person(rng.pick(topic.verbs)) + " the " + o1 + ".";
    }
    default:
      return "The " + a + " " + third_person(rng.pick(topic.verbs)) + " the " + o1 + ".";
  }
}

}  // namespace

CorpusManifest generate_corpus(const fs::path& dir, const CorpusOptions& options) {
  if (options.node_dim == 0 || options.vector_dim == 0 || options.descriptor_dim == 0 || options.topics == 0 ||
      options.min_scenes == 0 || options.max_scenes < options.min_scenes)
    throw Error(ErrorCode::InvalidArgument, "corpus options must be positive with min_scenes <= max_scenes");
  fs::create_directories(dir);
  const std::size_t topic_count = std::min(options.topics, topics().size());

  CorpusManifest manifest;
  manifest.seed = options.seed;
  manifest.node_dim = options.node_dim;
  manifest.vector_dim = options.vector_dim;

  Rng topic_rng(detail::Fnv1a().str("corpus-topics").u64(options.seed).value());
  std::vector<std::vector<double>> directions(topic_count, std::vector<double>(options.vector_dim));
  for (auto& d : directions)
    for (auto& x : d) x = 2.0 * topic_rng.uniform() - 1.0;

  std::vector<VideoVector> vectors;
  for (std::size_t i = 0; i < options.videos; ++i) {
    const std::string id = video_name(i);
    const Topic& topic = topics()[i % topic_count];
    Rng rng(detail::Fnv1a().str("corpus-video").u64(options.seed).str(id).value());
    const fs::path vdir = dir / "videos" / id;
    fs::create_directories(vdir);

    const std::size_t scene_count = options.min_scenes + rng.below(options.max_scenes - options.min_scenes + 1);
    FrameDescriptors descriptors = make_descriptors(rng, scene_count, options.descriptor_dim);
    write_descriptor_file((vdir / "descriptors.fdsc").string(), descriptors);
    const auto keyframes = select_keyframes(detect_scenes(descriptors));

    std::vector<Entity> agents, objects;
    std::vector<std::string> agent_pool = topic.agents, object_pool = topic.objects;
    for (int k = 0; k < 2; ++k) {
      const std::size_t at = rng.below(agent_pool.size());
      agents.push_back({agent_pool[at], place(rng), true});
      agent_pool.erase(agent_pool.begin() + static_cast<std::ptrdiff_t>(at));
    }
    for (int k = 0; k < 4; ++k) {
      const std::size_t at = rng.below(object_pool.size());
      objects.push_back({object_pool[at], place(rng), k != 3});
      object_pool.erase(object_pool.begin() + static_cast<std::ptrdiff_t>(at));
    }
    std::map<std::string, const Entity*> by_label;
    for (const auto& e : agents) by_label[e.label] = &e;
    for (const auto& e : objects) by_label[e.label] = &e;

    std::vector<CaptionLine> captions;
    std::string caption_text;
    for (Keyframe kf : keyframes) {
      std::string text;
      const std::size_t sentences = 3 + rng.below(2);
      for (std::size_t s = 0; s < sentences; ++s) text += (s ? " " : "") + sentence(rng, topic, agents, objects);
      captions.push_back({kf, text});
      caption_text += std::to_string(kf) + "\t" + text + "\n";
    }
    detail::write_file((vdir / "captions.txt").string(), caption_text);

    // Boxes are fixed per (entity, keyframe) so repeated mentions share a node.
    std::map<std::pair<std::string, Keyframe>, BoundingBox> boxes;
    auto box_of = [&](const std::string& label, Keyframe kf) {
      auto key = std::make_pair(label, kf);
      auto it = boxes.find(key);
      if (it == boxes.end()) it = boxes.emplace(key, jitter(rng, by_label.at(label)->base, kf)).first;
      return it->second;
    };

    const auto triplets = parse_captions(captions);
    GroundingSet groundings;
    for (std::size_t t = 0; t < triplets.size(); ++t) {
      const auto& tr = triplets[t];
      if (!by_label.contains(tr.subject) || !by_label.contains(tr.object)) continue;
      const bool drop_subject = rng.chance(0.08);
      const bool drop_object = rng.chance(0.08);
      if (!drop_subject) groundings[{t, Role::Subject}] = box_of(tr.subject, tr.source_keyframe);
      if (!drop_object) groundings[{t, Role::Object}] = box_of(tr.object, tr.source_keyframe);
    }
    write_json_file((vdir / "groundings.json").string(), groundings_to_json(groundings));

    std::vector<Tracklet> tracklets;
    TrackId next_track = 1;
    for (const auto* group : {&agents, &objects}) {
      for (const auto& e : *group) {
        if (!e.tracked) continue;
        Tracklet t{next_track++, {}};
        for (Keyframe kf : keyframes) {
          auto it = boxes.find({e.label, kf});
          if (it != boxes.end()) t.occurrences.push_back({kf, it->second});
        }
        if (!t.occurrences.empty()) tracklets.push_back(std::move(t));
      }
    }
    write_json_file((vdir / "tracklets.json").string(), tracklets_to_json(tracklets));

    SyntheticFeatureSource source(detail::Fnv1a().str("corpus-features").u64(options.seed).str(id).value(),
                                  options.node_dim);
    FeatureFile features{static_cast<std::uint32_t>(options.node_dim), {}};
    for (const auto& [key, box] : boxes) {
      const auto v = source.feature(key.second, box);
      features.records.push_back({key.second, box, std::vector<float>(v.begin(), v.end())});
    }
    std::stable_sort(features.records.begin(), features.records.end(),
                     [](const FeatureRecord& a, const FeatureRecord& b) { return a.keyframe < b.keyframe; });
    write_feature_file((vdir / "features.feat").string(), features);

    std::vector<double> vec(options.vector_dim);
    const auto& dirv = directions[i % topic_count];
    for (std::size_t c = 0; c < vec.size(); ++c) vec[c] = dirv[c] + 0.35 * (2.0 * rng.uniform() - 1.0);
    for (auto& x : vec) x = static_cast<float>(x);
    vectors.push_back(VideoVector::make(id, std::move(vec)));

    manifest.videos.push_back({id, topic.name, static_cast<std::uint32_t>(descriptors.values.rows())});
  }
  write_vector_store((dir / "vectors.vvec").string(), vectors, options.vector_dim);

  json videos = json::array();
  for (const auto& v : manifest.videos) videos.push_back({{"id", v.video_id}, {"topic", v.topic}, {"frames", v.frames}});
  write_json_file((dir / "manifest.json").string(), json{{"format", "mvg-corpus"},
                                                         {"version", kFormatVersion},
                                                         {"seed", manifest.seed},
                                                         {"node_dim", manifest.node_dim},
                                                         {"vector_dim", manifest.vector_dim},
                                                         {"vectors", "vectors.vvec"},
                                                         {"videos", std::move(videos)}});
  return manifest;
}

CorpusManifest read_manifest(const fs::path& corpus_dir) {
  const std::string path = (corpus_dir / "manifest.json").string();
  const json doc = read_json_file(path);
  try {
    if (doc.at("format").get<std::string>() != "mvg-corpus")
      throw Error(ErrorCode::FormatError, path + ": not a corpus manifest", path);
    CorpusManifest m;
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.node_dim = doc.at("node_dim").get<std::size_t>();
    m.vector_dim = doc.at("vector_dim").get<std::size_t>();
    for (const auto& v : doc.at("videos"))
      m.videos.push_back({v.at("id").get<std::string>(), v.at("topic").get<std::string>(),
                          v.at("frames").get<std::uint32_t>()});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, path + ": " + e.what(), path);
  }
}

VideoBundle load_video_bundle(const fs::path& corpus_dir, const std::string& video_id) {
  const fs::path vdir = corpus_dir / "videos" / video_id;
  VideoBundle b;
  b.video_id = video_id;
  // Precomputed scenes and pre-parsed triplets take precedence when present.
  if (const auto scenes = vdir / "scenes.json"; fs::exists(scenes))
    b.scenes = scenes_from_json(read_json_file(scenes.string()), scenes.string());
  else
    b.descriptors = read_descriptor_file((vdir / "descriptors.fdsc").string());
  if (const auto triplets = vdir / "triplets.json"; fs::exists(triplets))
    b.triplets = triplets_from_json(read_json_file(triplets.string()), triplets.string());
  else
    b.captions = read_caption_file((vdir / "captions.txt").string());
  const std::string gpath = (vdir / "groundings.json").string();
  b.groundings = groundings_from_json(read_json_file(gpath), gpath);
  const std::string tpath = (vdir / "tracklets.json").string();
  b.tracklets = tracklets_from_json(read_json_file(tpath), tpath);
  b.features = std::make_shared<FileFeatureSource>(FileFeatureSource::load((vdir / "features.feat").string()));
  return b;
}

}  // namespace mvg
