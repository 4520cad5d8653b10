#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvg/fusion.hpp"
#include "mvg/prompt.hpp"
#include "mvg/retrieval.hpp"
#include "mvg/structuring.hpp"

namespace mvg {

struct PipelineConfig {
  FusionConfig fusion;
  std::size_t n_related = 5;
  std::size_t frames_per_video = 8;
  std::size_t tokens_per_frame = 256;
  SceneDetectorConfig scenes;
  double track_iou_threshold = 0.5;
  std::optional<std::size_t> graph_token_cap = 200;
  std::uint64_t params_seed = 7;
  std::uint64_t corpus_seed = 1;
  SimilarityBand band;
  bool one_shot = false;
  bool cot = true;
  std::string question = "What is the person in the target video doing, and in what order?";
  std::string target;  // empty: first video in the manifest
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint;  // empty: parameters from params_seed
  std::filesystem::path prompt_template;
  std::filesystem::path lexicon;

  void check() const;
  AccountingConfig accounting() const { return {frames_per_video, tokens_per_frame}; }
};

// Reads a JSON config; relative paths resolve against the file's directory.
// Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const PipelineConfig& config);

struct CorpusOptions {
  std::uint64_t seed = 1;
  std::size_t videos = 20;
  std::size_t min_scenes = 4;
  std::size_t max_scenes = 7;
  std::size_t node_dim = kDefaultNodeDim;
  std::size_t vector_dim = 64;
  std::size_t descriptor_dim = 16;
  std::size_t topics = 4;
};

struct CorpusVideo {
  std::string video_id;
  std::string topic;
  std::uint32_t frames = 0;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  std::size_t node_dim = 0;
  std::size_t vector_dim = 0;
  std::vector<CorpusVideo> videos;
};

// Layout: manifest.json, vectors.vvec and videos/<id>/{descriptors.fdsc,
// captions.txt, groundings.json, tracklets.json, features.feat}. A video
// directory may also hold scenes.json or triplets.json, which replace the
// descriptors or captions when loading.
CorpusManifest generate_corpus(const std::filesystem::path& dir, const CorpusOptions& options);
CorpusManifest read_manifest(const std::filesystem::path& corpus_dir);

VideoBundle load_video_bundle(const std::filesystem::path& corpus_dir, const std::string& video_id);

struct PipelineResult {
  std::string target;
  std::vector<RetrievalHit> related;
  std::vector<VideoGraph> graphs;  // target first
  FusionResult fusion;
  AssembledPrompt prompt;
  AccountingReport accounting;
  std::vector<std::filesystem::path> artifacts;
};

// Retrieval, structuring of target + related, fusion and prompt assembly.
// Writes graphs/, graph_tokens.gtok, prompt.json, accounting.json,
// retrieval.json and report.json under output_dir.
PipelineResult run_pipeline(const PipelineConfig& config);

// Machine-readable form of an exception for the CLI's error channel.
nlohmann::json error_report(const std::exception& e);

}  // namespace mvg
