// Command-line driver for the multi-video graph pipeline.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvg/error.hpp"
#include "mvg/formats.hpp"
#include "mvg/fusion.hpp"
#include "mvg/pipeline.hpp"
#include "mvg/prompt.hpp"
#include "mvg/retrieval.hpp"
#include "mvg/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_related;
  std::optional<std::size_t> layers;
  std::optional<double> min_sim;
  std::optional<double> max_sim;
  bool one_shot = false;
  std::string corpus;
  std::string out;
  std::string target;
};

mvg::PipelineConfig resolve_config(const Overrides& o) {
  mvg::PipelineConfig c = o.config.empty() ? mvg::PipelineConfig{} : mvg::load_config(o.config);
  if (o.seed) c.params_seed = *o.seed;
  if (o.n_related) c.n_related = *o.n_related;
  if (o.layers) c.fusion.layers = *o.layers;
  if (o.min_sim) c.band.min = *o.min_sim;
  if (o.max_sim) c.band.max = *o.max_sim;
  if (o.one_shot) c.one_shot = true;
  if (!o.corpus.empty()) c.corpus_dir = o.corpus;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.target.empty()) c.target = o.target;
  c.check();
  return c;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mvg::Error(mvg::ErrorCode::IoError, "cannot open '" + path + "'", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(const std::string& path, const std::string& bytes) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  out << bytes;
  if (!out) throw mvg::Error(mvg::ErrorCode::IoError, "cannot write '" + path + "'", path);
}

json head_values(std::span<const double> v, std::size_t n = 8) {
  json out = json::array();
  for (std::size_t i = 0; i < std::min(n, v.size()); ++i) out.push_back(v[i]);
  return out;
}

json inspect_file(const std::string& path) {
  const std::string bytes = read_all(path);
  const std::string magic = bytes.substr(0, 4);
  if (magic == "FDSC") {
    const auto d = mvg::decode_descriptors(bytes, path);
    return {{"format", "FDSC"}, {"frames", d.values.rows()}, {"dim", d.values.cols()},
            {"first_row", d.values.rows() ? head_values(d.values.row(0)) : json::array()}};
  }
  if (magic == "FEAT") {
    const auto f = mvg::decode_feature_file(bytes, path);
    json records = json::array();
    for (const auto& r : f.records)
      records.push_back({{"keyframe", r.keyframe}, {"box", {r.box.x, r.box.y, r.box.w, r.box.h}}});
    return {{"format", "FEAT"}, {"dim", f.dim}, {"count", f.records.size()}, {"records", records}};
  }
  if (magic == "GFMP") {
    const auto p = mvg::decode_checkpoint(bytes, path);
    json list = json::array();
    for (const auto& t : mvg::tensors(p)) list.push_back({{"name", t.name}, {"shape", t.shape}});
    return {{"format", "GFMP"}, {"tensors", list}};
  }
  if (magic == "GTOK") {
    json list = json::array();
    for (const auto& t : mvg::decode_graph_tokens(bytes, path))
      list.push_back({{"owner", t.owner}, {"rows", t.values.rows()}, {"cols", t.values.cols()},
                      {"first_row", t.values.rows() ? head_values(t.values.row(0)) : json::array()}});
    return {{"format", "GTOK"}, {"matrices", list}};
  }
  if (magic == "VVEC") {
    json list = json::array();
    for (const auto& v : mvg::decode_vector_store(bytes, path))
      list.push_back({{"video_id", v.video_id}, {"dim", v.vector.size()}, {"norm", v.norm}});
    return {{"format", "VVEC"}, {"entries", list}};
  }
  if (path.ends_with(".txt")) {
    json list = json::array();
    for (const auto& line : mvg::parse_caption_file(bytes, path)) {
      json triplets = json::array();
      for (const auto& t : mvg::parse_caption(line.text, line.keyframe).triplets)
        triplets.push_back({t.subject, t.predicate, t.object});
      list.push_back({{"keyframe", line.keyframe}, {"text", line.text}, {"triplets", triplets}});
    }
    return {{"format", "captions"}, {"lines", list}};
  }
  return mvg::parse_json_text(bytes, path);
}

int run_verify(const std::vector<std::string>& criteria, std::uint64_t seed, bool fault, bool as_json,
               const std::string& work_dir) {
  mvg::VerifyOptions vo;
  vo.seed = seed;
  vo.inject_gradient_fault = fault;
  vo.only.insert(criteria.begin(), criteria.end());
  if (!work_dir.empty()) {
    vo.work_dir = work_dir;
    vo.keep_work_dir = true;
  }
  const auto results = mvg::run_verification(vo);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  if (as_json) {
    std::cout << mvg::verification_to_json(results).dump(2) << "\n";
  } else {
    for (const auto& r : results) std::cout << mvg::format_result(r) << "\n";
    std::cout << (ok ? "all criteria passed" : "some criteria failed") << " (" << results.size() << " run)\n";
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured multi-video graph pipeline"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "JSON config file");
  app.add_option("--seed", o.seed, "Seed for parameters, corpus or verification");
  app.add_option("--n-related", o.n_related, "Number of related videos");
  app.add_option("--layers", o.layers, "Fusion layers");
  app.add_option("--min-sim", o.min_sim, "Lowest cosine similarity kept by retrieval");
  app.add_option("--max-sim", o.max_sim, "Highest cosine similarity kept by retrieval");
  app.add_flag("--one-shot", o.one_shot, "Insert the one-shot example block");
  std::vector<std::string> criteria;
  app.add_option("--criteria", criteria, "Verification criteria to run (names or ids)")->delimiter(',');
  app.fallthrough();

  auto* gen = app.add_subcommand("generate-corpus", "Write a deterministic synthetic corpus");
  std::string gen_out = "corpus";
  mvg::CorpusOptions corpus_opts;
  gen->add_option("--out", gen_out, "Corpus directory");
  gen->add_option("--videos", corpus_opts.videos, "Number of videos");
  gen->add_option("--node-dim", corpus_opts.node_dim, "Node feature dimension");
  gen->add_option("--min-scenes", corpus_opts.min_scenes, "Fewest scenes per video");
  gen->add_option("--max-scenes", corpus_opts.max_scenes, "Most scenes per video");

  auto* structure = app.add_subcommand("structure", "Build and write the graph of corpus videos");
  std::vector<std::string> videos;
  structure->add_option("--corpus", o.corpus, "Corpus directory");
  structure->add_option("--video", videos, "Video id (repeatable); all videos when omitted");
  structure->add_option("--out", o.out, "Output directory for graph files");

  auto* retrieve = app.add_subcommand("retrieve", "Top related videos for a target");
  retrieve->add_option("--corpus", o.corpus, "Corpus directory");
  retrieve->add_option("--target", o.target, "Target video id");

  auto* fuse = app.add_subcommand("fuse", "Fuse graph files into graph tokens");
  std::vector<std::string> graph_files;
  std::string fuse_out = "graph_tokens.gtok";
  std::string checkpoint_out;
  fuse->add_option("graphs", graph_files, "Graph JSON files, target first")->required();
  fuse->add_option("--out", fuse_out, "Output token file");
  fuse->add_option("--save-checkpoint", checkpoint_out, "Also write the parameters used");

  auto* assemble = app.add_subcommand("assemble", "Assemble a prompt from a graph-token file");
  std::string tokens_in, prompt_out = "prompt.json", question;
  bool naive = false;
  assemble->add_option("tokens", tokens_in, "Graph-token file, target first")->required();
  assemble->add_option("--out", prompt_out, "Prompt JSON output");
  assemble->add_option("--question", question, "Question text");
  assemble->add_flag("--naive", naive, "Video tokens for every video instead of graphs");

  auto* verify = app.add_subcommand("verify", "Run the verification criteria");
  bool fault = false, verify_json = false;
  std::string work_dir;
  verify->add_flag("--inject-gradient-fault", fault, "Perturb one analytic gradient");
  verify->add_flag("--json", verify_json, "Machine-readable report");
  verify->add_option("--work-dir", work_dir, "Keep corpus runs in this directory");

  auto* inspect = app.add_subcommand("inspect", "Pretty-print any artifact");
  std::string inspect_path;
  inspect->add_option("file", inspect_path, "Artifact path")->required();

  auto* run = app.add_subcommand("run", "Retrieval, structuring, fusion and assembly end to end");
  run->add_option("--corpus", o.corpus, "Corpus directory");
  run->add_option("--out", o.out, "Output directory");
  run->add_option("--target", o.target, "Target video id");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (o.seed)
        corpus_opts.seed = *o.seed;
      else if (!o.config.empty())
        corpus_opts.seed = mvg::load_config(o.config).corpus_seed;
      const auto m = mvg::generate_corpus(gen_out, corpus_opts);
      std::cout << json{{"corpus", gen_out}, {"videos", m.videos.size()}}.dump() << "\n";
      return 0;
    }
    if (verify->parsed())
      return run_verify(criteria, o.seed.value_or(mvg::VerifyOptions{}.seed), fault, verify_json, work_dir);
    if (inspect->parsed()) {
      std::cout << inspect_file(inspect_path).dump(2) << "\n";
      return 0;
    }

    const mvg::PipelineConfig cfg = resolve_config(o);
    if (structure->parsed()) {
      if (videos.empty())
        for (const auto& v : mvg::read_manifest(cfg.corpus_dir).videos) videos.push_back(v.video_id);
      mvg::StructuringOptions so;
      so.scenes = cfg.scenes;
      so.graph.node_dim = cfg.fusion.d_node;
      so.graph.track_iou_threshold = cfg.track_iou_threshold;
      std::optional<mvg::Lexicon> lex;
      if (!cfg.lexicon.empty()) so.lexicon = &lex.emplace(mvg::Lexicon::load(cfg.lexicon.string()));
      json written = json::array();
      for (const auto& id : videos) {
        const auto g = mvg::structure_video(mvg::load_video_bundle(cfg.corpus_dir, id), so);
        const auto files = mvg::write_graph_files((cfg.output_dir / "graphs").string(), g);
        written.push_back({{"video_id", id}, {"graph", files.graph_json}, {"nodes", g.nodes.size()}});
      }
      std::cout << written.dump(2) << "\n";
      return 0;
    }
    if (retrieve->parsed()) {
      const auto index = mvg::RetrievalIndex::build(mvg::read_vector_store((cfg.corpus_dir / "vectors.vvec").string()));
      std::string target = cfg.target;
      if (target.empty()) {
        const auto m = mvg::read_manifest(cfg.corpus_dir);
        if (m.videos.empty()) throw mvg::Error(mvg::ErrorCode::EmptyInput, "corpus has no videos");
        target = m.videos.front().video_id;
      }
      const auto* q = index.find(target);
      if (!q) throw mvg::Error(mvg::ErrorCode::InvalidArgument, "unknown target '" + target + "'");
      json hits = json::array();
      for (const auto& h : index.query_top_n(q->vector, cfg.n_related, {target}, cfg.band))
        hits.push_back({{"video_id", h.video_id}, {"similarity", h.similarity}});
      std::cout << json{{"target", target}, {"related", hits}}.dump(2) << "\n";
      return 0;
    }
    if (fuse->parsed()) {
      std::vector<mvg::GraphInput> inputs;
      for (const auto& f : graph_files) inputs.push_back(mvg::make_graph_input(mvg::read_graph_file(f)));
      const auto params = cfg.checkpoint.empty() ? mvg::FusionParams::initialize(cfg.fusion, cfg.params_seed)
                                                 : mvg::load_checkpoint(cfg.checkpoint.string());
      const mvg::GraphInput target = inputs.front();
      inputs.erase(inputs.begin());
      const auto result = mvg::gfm_forward(target, inputs, params, cfg.fusion);
      write_all(fuse_out, mvg::encode_graph_tokens(result.graph_tokens));
      if (!checkpoint_out.empty()) mvg::save_checkpoint(checkpoint_out, params);
      std::cout << json{{"tokens", fuse_out},
                        {"graphs", result.graph_tokens.size()},
                        {"attention_rows", result.attention.rows},
                        {"max_row_error", result.attention.max_row_error}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (assemble->parsed()) {
      const auto tokens = mvg::decode_graph_tokens(read_all(tokens_in), tokens_in);
      if (tokens.empty()) throw mvg::Error(mvg::ErrorCode::EmptyInput, tokens_in + ": no graph tokens", tokens_in);
      const std::string ref_base = fs::path(tokens_in).filename().string();
      auto slot = [&](const mvg::TokenMatrix& t) {
        return mvg::PromptVideo{t.owner, t.values.rows(), ref_base + "#" + t.owner, "video:" + t.owner};
      };
      std::vector<mvg::PromptVideo> related;
      for (std::size_t i = 1; i < tokens.size(); ++i) related.push_back(slot(tokens[i]));
      mvg::AssemblyOptions ao;
      ao.style = naive ? mvg::PromptStyle::Naive : mvg::PromptStyle::Structured;
      ao.one_shot = cfg.one_shot;
      ao.cot = cfg.cot;
      ao.graph_token_cap = cfg.graph_token_cap;
      const auto tmpl = cfg.prompt_template.empty() ? mvg::PromptTemplate::bundled()
                                                    : mvg::PromptTemplate::load(cfg.prompt_template.string());
      const auto prompt = mvg::assemble_prompt(cfg.accounting().video_tokens(), slot(tokens.front()), related,
                                               question.empty() ? cfg.question : question, tmpl, ao);
      write_all(prompt_out, mvg::prompt_to_json(prompt).dump(2) + "\n");
      std::cout << mvg::accounting_to_json(mvg::count_tokens(prompt, cfg.accounting())).dump(2) << "\n";
      return 0;
    }
    if (run->parsed()) {
      const auto result = mvg::run_pipeline(cfg);
      json related = json::array();
      for (const auto& h : result.related) related.push_back(h.video_id);
      std::cout << json{{"target", result.target},
                        {"related", related},
                        {"output_dir", cfg.output_dir.string()},
                        {"accounting", mvg::accounting_to_json(result.accounting)}}
                       .dump(2)
                << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << mvg::error_report(e).dump() << "\n";
    return 2;
  }
  return 0;
}
