#include "mvg/pipeline.hpp"

#include <cmath>
#include <set>

#include "binary_io.hpp"
#include "mvg/error.hpp"
#include "mvg/formats.hpp"

namespace mvg {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::check() const {
  fusion.check();
  if (frames_per_video == 0 || tokens_per_frame == 0)
    throw Error(ErrorCode::InvalidArgument, "frames_per_video and tokens_per_frame must be positive");
  if (!(scenes.threshold > 0.0) || scenes.min_scene_len == 0)
    throw Error(ErrorCode::InvalidArgument, "scene threshold and min_scene_len must be positive");
  if (!(track_iou_threshold > 0.0 && track_iou_threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "track_iou_threshold must lie in (0, 1]");
  if (band.min > band.max) throw Error(ErrorCode::InvalidArgument, "min_sim exceeds max_sim");
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "d_node",         "d_model",       "d_llm",       "layers",          "gat_heads",
      "cga_heads",      "separate_edge_types",          "n_related",       "frames_per_video",
      "tokens_per_frame", "scene_threshold", "min_scene_len", "track_iou_threshold", "graph_token_cap",
      "params_seed",    "corpus_seed",   "min_sim",     "max_sim",         "one_shot",
      "cot",            "question",      "target",      "corpus_dir",      "output_dir",
      "checkpoint",     "prompt_template", "lexicon"};
  return keys;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

json optional_sim(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

PipelineConfig config_from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::FormatError, "config must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!known_keys().contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  PipelineConfig c;
  try {
    auto get = [&](const char* key, auto& dst) {
      if (doc.contains(key)) dst = doc.at(key).get<std::remove_reference_t<decltype(dst)>>();
    };
    get("d_node", c.fusion.d_node);
    get("d_model", c.fusion.d_model);
    get("d_llm", c.fusion.d_llm);
    get("layers", c.fusion.layers);
    get("gat_heads", c.fusion.gat_heads);
    get("cga_heads", c.fusion.cga_heads);
    get("separate_edge_types", c.fusion.separate_edge_types);
    get("n_related", c.n_related);
    get("frames_per_video", c.frames_per_video);
    get("tokens_per_frame", c.tokens_per_frame);
    get("scene_threshold", c.scenes.threshold);
    get("min_scene_len", c.scenes.min_scene_len);
    get("track_iou_threshold", c.track_iou_threshold);
    if (doc.contains("graph_token_cap")) {
      const auto& v = doc.at("graph_token_cap");
      c.graph_token_cap = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
    }
    get("params_seed", c.params_seed);
    get("corpus_seed", c.corpus_seed);
    if (doc.contains("min_sim") && !doc.at("min_sim").is_null()) c.band.min = doc.at("min_sim").get<double>();
    if (doc.contains("max_sim") && !doc.at("max_sim").is_null()) c.band.max = doc.at("max_sim").get<double>();
    get("one_shot", c.one_shot);
    get("cot", c.cot);
    get("question", c.question);
    get("target", c.target);
    if (doc.contains("corpus_dir")) c.corpus_dir = resolve(base_dir, doc.at("corpus_dir").get<std::string>());
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    if (doc.contains("checkpoint")) c.checkpoint = resolve(base_dir, doc.at("checkpoint").get<std::string>());
    if (doc.contains("prompt_template"))
      c.prompt_template = resolve(base_dir, doc.at("prompt_template").get<std::string>());
    if (doc.contains("lexicon")) c.lexicon = resolve(base_dir, doc.at("lexicon").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  return config_from_json(read_json_file(path.string()), path.parent_path());
}

json config_to_json(const PipelineConfig& c) {
  return json{{"d_node", c.fusion.d_node},
              {"d_model", c.fusion.d_model},
              {"d_llm", c.fusion.d_llm},
              {"layers", c.fusion.layers},
              {"gat_heads", c.fusion.gat_heads},
              {"cga_heads", c.fusion.cga_heads},
              {"separate_edge_types", c.fusion.separate_edge_types},
              {"n_related", c.n_related},
              {"frames_per_video", c.frames_per_video},
              {"tokens_per_frame", c.tokens_per_frame},
              {"scene_threshold", c.scenes.threshold},
              {"min_scene_len", c.scenes.min_scene_len},
              {"track_iou_threshold", c.track_iou_threshold},
              {"graph_token_cap", c.graph_token_cap ? json(*c.graph_token_cap) : json(nullptr)},
              {"params_seed", c.params_seed},
              {"corpus_seed", c.corpus_seed},
              {"min_sim", optional_sim(c.band.min)},
              {"max_sim", optional_sim(c.band.max)},
              {"one_shot", c.one_shot},
              {"cot", c.cot},
              {"question", c.question},
              {"target", c.target},
              {"corpus_dir", c.corpus_dir.string()},
              {"output_dir", c.output_dir.string()},
              {"checkpoint", c.checkpoint.string()},
              {"prompt_template", c.prompt_template.string()},
              {"lexicon", c.lexicon.string()}};
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.check();
  PipelineResult result;
  const CorpusManifest manifest = read_manifest(config.corpus_dir);
  if (manifest.videos.empty()) throw Error(ErrorCode::EmptyInput, "corpus has no videos");
  result.target = config.target.empty() ? manifest.videos.front().video_id : config.target;

  const auto index = RetrievalIndex::build(read_vector_store((config.corpus_dir / "vectors.vvec").string()));
  const VideoVector* query = index.find(result.target);
  if (!query) throw Error(ErrorCode::InvalidArgument, "target '" + result.target + "' has no retrieval vector");
  result.related = index.query_top_n(query->vector, config.n_related, {result.target}, config.band);

  std::optional<Lexicon> lexicon;
  if (!config.lexicon.empty()) lexicon = Lexicon::load(config.lexicon.string());
  StructuringOptions sopts;
  sopts.scenes = config.scenes;
  sopts.graph.node_dim = config.fusion.d_node;
  sopts.graph.track_iou_threshold = config.track_iou_threshold;
  sopts.lexicon = lexicon ? &*lexicon : nullptr;

  std::vector<std::string> ids{result.target};
  for (const auto& hit : result.related) ids.push_back(hit.video_id);

  const fs::path out = config.output_dir;
  const fs::path graph_dir = out / "graphs";
  fs::create_directories(graph_dir);
  for (const auto& id : ids) {
    result.graphs.push_back(structure_video(load_video_bundle(config.corpus_dir, id), sopts));
    const auto files = write_graph_files(graph_dir.string(), result.graphs.back());
    result.artifacts.push_back(files.graph_json);
    result.artifacts.push_back(files.features);
  }

  const FusionParams params = config.checkpoint.empty() ? FusionParams::initialize(config.fusion, config.params_seed)
                                                        : load_checkpoint(config.checkpoint.string());
  const FusionConfig shape = params.shape_config(config.fusion);
  if (shape.d_node != config.fusion.d_node || shape.d_model != config.fusion.d_model ||
      shape.d_llm != config.fusion.d_llm || shape.layers != config.fusion.layers ||
      shape.separate_edge_types != config.fusion.separate_edge_types)
    throw Error(ErrorCode::ShapeMismatch, "checkpoint shapes do not match the configured dimensions");

  std::vector<GraphInput> related_inputs;
  for (std::size_t g = 1; g < result.graphs.size(); ++g) related_inputs.push_back(make_graph_input(result.graphs[g]));
  result.fusion = gfm_forward(make_graph_input(result.graphs.front()), related_inputs, params, config.fusion);

  const fs::path tokens_path = out / "graph_tokens.gtok";
  detail::write_file(tokens_path.string(), encode_graph_tokens(result.fusion.graph_tokens));
  result.artifacts.push_back(tokens_path);

  auto slot = [&](const TokenMatrix& t) {
    return PromptVideo{t.owner, t.values.rows(), "graph_tokens.gtok#" + t.owner, "video:" + t.owner};
  };
  PromptVideo target = slot(result.fusion.graph_tokens.front());
  std::vector<PromptVideo> related;
  for (std::size_t g = 1; g < result.fusion.graph_tokens.size(); ++g) related.push_back(slot(result.fusion.graph_tokens[g]));
  const PromptTemplate tmpl =
      config.prompt_template.empty() ? PromptTemplate::bundled() : PromptTemplate::load(config.prompt_template.string());
  AssemblyOptions aopts;
  aopts.one_shot = config.one_shot;
  aopts.cot = config.cot;
  aopts.graph_token_cap = config.graph_token_cap;
  result.prompt = assemble_prompt(config.accounting().video_tokens(), target, related, config.question, tmpl, aopts);
  result.accounting = count_tokens(result.prompt, config.accounting());
  if (!(result.accounting.totals == result.prompt.totals))
    throw Error(ErrorCode::ValidationFailed, "prompt totals disagree with token accounting");

  const fs::path prompt_path = out / "prompt.json";
  write_json_file(prompt_path.string(), prompt_to_json(result.prompt));
  const fs::path accounting_path = out / "accounting.json";
  write_json_file(accounting_path.string(), accounting_to_json(result.accounting));

  json hits = json::array();
  for (const auto& h : result.related) hits.push_back({{"video_id", h.video_id}, {"similarity", h.similarity}});
  const fs::path retrieval_path = out / "retrieval.json";
  write_json_file(retrieval_path.string(), json{{"target", result.target}, {"related", std::move(hits)}});

  json graphs = json::array();
  for (const auto& g : result.graphs)
    graphs.push_back({{"video_id", g.video_id},
                      {"nodes", g.nodes.size()},
                      {"intra_edges", g.intra_edges.size()},
                      {"inter_edges", g.inter_edges.size()}});
  const fs::path report_path = out / "report.json";
  write_json_file(report_path.string(),
                  json{{"target", result.target},
                       {"graphs", std::move(graphs)},
                       {"attention", {{"rows", result.fusion.attention.rows},
                                      {"max_row_error", result.fusion.attention.max_row_error}}}});
  result.artifacts.insert(result.artifacts.end(), {prompt_path, accounting_path, retrieval_path, report_path});
  return result;
}

json error_report(const std::exception& e) {
  json err{{"message", e.what()}};
  if (const auto* me = dynamic_cast<const Error*>(&e)) {
    err["code"] = std::string(to_string(me->code()));
    if (!me->file().empty()) err["file"] = me->file();
    if (me->offset()) err["offset"] = *me->offset();
  } else {
    err["code"] = "Internal";
  }
  return json{{"error", std::move(err)}};
}

}  // namespace mvg
