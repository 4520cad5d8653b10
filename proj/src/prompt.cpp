#include "mvg/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "binary_io.hpp"
#include "embedded_data.hpp"
#include "mvg/error.hpp"

namespace mvg {

using nlohmann::json;

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Text:
      return "text";
    case SegmentKind::VideoTokens:
      return "video_tokens";
    case SegmentKind::GraphTokens:
      return "graph_tokens";
  }
  return "unknown";
}

namespace {

SegmentKind kind_from_string(const std::string& s) {
  if (s == "text") return SegmentKind::Text;
  if (s == "video_tokens") return SegmentKind::VideoTokens;
  if (s == "graph_tokens") return SegmentKind::GraphTokens;
  throw Error(ErrorCode::FormatError, "unknown segment kind '" + s + "'");
}

std::string with_index(std::string label, std::size_t index) {
  const std::string key = "{index}";
  const std::string value = std::to_string(index);
  for (auto pos = label.find(key); pos != std::string::npos; pos = label.find(key, pos + value.size()))
    label.replace(pos, key.size(), value);
  return label;
}

PromptSegment text_segment(std::string text) {
  PromptSegment s;
  s.kind = SegmentKind::Text;
  s.count = estimate_text_tokens(text);
  s.text = std::move(text);
  return s;
}

PromptSegment token_segment(SegmentKind kind, std::size_t count, std::string ref, const std::string& owner) {
  PromptSegment s;
  s.kind = kind;
  s.count = count;
  s.ref = std::move(ref);
  s.owner = owner;
  return s;
}

std::string default_video_ref(const PromptVideo& v) {
  return v.video_ref.empty() ? "video:" + v.video_id : v.video_ref;
}

std::string default_graph_ref(const PromptVideo& v) {
  return v.graph_ref.empty() ? "graph:" + v.video_id : v.graph_ref;
}

TokenTotals sum_segments(const std::vector<PromptSegment>& segments) {
  TokenTotals t;
  for (const auto& s : segments) {
    switch (s.kind) {
      case SegmentKind::Text:
        t.text += s.count;
        break;
      case SegmentKind::VideoTokens:
        t.video += s.count;
        break;
      case SegmentKind::GraphTokens:
        t.graph += s.count;
        break;
    }
  }
  t.total = t.text + t.video + t.graph;
  return t;
}

}  // namespace

const PromptTemplate& PromptTemplate::bundled() {
  static const PromptTemplate tmpl = from_json(json::parse(embedded::prompt_template_json));
  return tmpl;
}

PromptTemplate PromptTemplate::from_json(const json& doc) {
  auto field = [&](const char* key) {
    if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_string())
      throw Error(ErrorCode::FormatError, std::string("prompt template is missing string field '") + key + "'");
    return doc.at(key).get<std::string>();
  };
  PromptTemplate t;
  t.system = field("system");
  t.one_shot = field("one_shot");
  t.target_label = field("target_label");
  t.target_graph_label = field("target_graph_label");
  t.related_label = field("related_label");
  t.related_video_label = field("related_video_label");
  t.question_prefix = field("question_prefix");
  t.cot = field("cot");
  return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  const std::string text = detail::read_file(path);
  try {
    return from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, path + ": " + e.what(), path, e.byte);
  }
}

std::vector<std::size_t> allocate_graph_tokens(const std::vector<std::size_t>& demands,
                                               std::optional<std::size_t> cap) {
  const std::size_t total = std::accumulate(demands.begin(), demands.end(), std::size_t{0});
  if (!cap || total <= *cap) return demands;

  auto filled = [&](std::size_t level) {
    std::size_t s = 0;
    for (auto d : demands) s += std::min(d, level);
    return s;
  };
  // Largest level whose water-filled total still fits under the cap.
  std::size_t lo = 0;
  std::size_t hi = *std::max_element(demands.begin(), demands.end());
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (filled(mid) <= *cap)
      lo = mid;
    else
      hi = mid - 1;
  }
  std::vector<std::size_t> out(demands.size());
  for (std::size_t i = 0; i < demands.size(); ++i) out[i] = std::min(demands[i], lo);
  std::size_t left = *cap - filled(lo);
  for (std::size_t i = 0; i < demands.size() && left > 0; ++i) {
    if (demands[i] > lo) {
      ++out[i];
      --left;
    }
  }
  return out;
}

std::size_t estimate_text_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      if (!in_word) ++count;
      in_word = true;
    } else {
      in_word = false;
      if (!std::isspace(c)) ++count;
    }
  }
  return count;
}

AssembledPrompt assemble_prompt(std::size_t target_video_token_count, const PromptVideo& target,
                                const std::vector<PromptVideo>& related, const std::string& question,
                                const PromptTemplate& tmpl, const AssemblyOptions& options) {
  AssembledPrompt p;
  auto& seg = p.segments;
  seg.push_back(text_segment(tmpl.system));
  if (options.one_shot) seg.push_back(text_segment(tmpl.one_shot));

  seg.push_back(text_segment(tmpl.target_label));
  seg.push_back(token_segment(SegmentKind::VideoTokens, target_video_token_count, default_video_ref(target),
                              target.video_id));

  if (options.style == PromptStyle::Structured) {
    std::vector<std::size_t> demands;
    demands.push_back(target.graph_nodes.value_or(0));
    for (const auto& r : related) demands.push_back(r.graph_nodes.value_or(0));
    const auto granted = allocate_graph_tokens(demands, options.graph_token_cap);

    if (target.graph_nodes) {
      seg.push_back(text_segment(tmpl.target_graph_label));
      seg.push_back(token_segment(SegmentKind::GraphTokens, granted[0], default_graph_ref(target), target.video_id));
    }
    for (std::size_t i = 0; i < related.size(); ++i) {
      if (!related[i].graph_nodes) continue;
      seg.push_back(text_segment(with_index(tmpl.related_label, i + 1)));
      seg.push_back(token_segment(SegmentKind::GraphTokens, granted[i + 1], default_graph_ref(related[i]),
                                  related[i].video_id));
    }
  } else {
    for (std::size_t i = 0; i < related.size(); ++i) {
      seg.push_back(text_segment(with_index(tmpl.related_video_label, i + 1)));
      seg.push_back(token_segment(SegmentKind::VideoTokens, target_video_token_count, default_video_ref(related[i]),
                                  related[i].video_id));
    }
  }

  seg.push_back(text_segment(tmpl.question_prefix + " " + question));
  if (options.cot) seg.push_back(text_segment(tmpl.cot));
  p.totals = sum_segments(seg);
  return p;
}

AccountingReport count_tokens(const AssembledPrompt& prompt, const AccountingConfig& config) {
  if (config.frames_per_video == 0 || config.tokens_per_frame == 0)
    throw Error(ErrorCode::InvalidArgument, "accounting config must be positive");
  AccountingReport r;
  for (const auto& s : prompt.segments) {
    switch (s.kind) {
      case SegmentKind::Text:
        r.totals.text += estimate_text_tokens(s.text);
        break;
      case SegmentKind::VideoTokens:
        r.totals.video += config.video_tokens();
        ++r.videos_with_tokens;
        break;
      case SegmentKind::GraphTokens:
        r.totals.graph += s.count;
        ++r.graph_blocks;
        break;
    }
  }
  r.totals.total = r.totals.text + r.totals.video + r.totals.graph;
  return r;
}

json prompt_to_json(const AssembledPrompt& prompt) {
  json segments = json::array();
  for (const auto& s : prompt.segments) {
    json j;
    j["kind"] = std::string(to_string(s.kind));
    if (s.kind == SegmentKind::Text) {
      j["text"] = s.text;
    } else {
      j["count"] = s.count;
      j["ref"] = s.ref;
    }
    if (s.owner) j["owner"] = *s.owner;
    segments.push_back(std::move(j));
  }
  json totals = {{"text", prompt.totals.text},
                 {"video", prompt.totals.video},
                 {"graph", prompt.totals.graph},
                 {"total", prompt.totals.total}};
  return json{{"segments", std::move(segments)}, {"totals", std::move(totals)}};
}

AssembledPrompt prompt_from_json(const json& doc) {
  try {
    AssembledPrompt p;
    for (const auto& j : doc.at("segments")) {
      PromptSegment s;
      s.kind = kind_from_string(j.at("kind").get<std::string>());
      if (s.kind == SegmentKind::Text) {
        s.text = j.at("text").get<std::string>();
        s.count = estimate_text_tokens(s.text);
      } else {
        s.count = j.at("count").get<std::size_t>();
        s.ref = j.at("ref").get<std::string>();
        if (s.ref.empty()) throw Error(ErrorCode::FormatError, "token segment has an empty reference");
      }
      if (j.contains("owner")) s.owner = j.at("owner").get<std::string>();
      p.segments.push_back(std::move(s));
    }
    p.totals = sum_segments(p.segments);
    const auto& t = doc.at("totals");
    const TokenTotals stored{t.at("text").get<std::size_t>(), t.at("video").get<std::size_t>(),
                             t.at("graph").get<std::size_t>(), t.at("total").get<std::size_t>()};
    if (!(stored == p.totals)) throw Error(ErrorCode::FormatError, "prompt totals do not match its segments");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("malformed prompt: ") + e.what());
  }
}

json accounting_to_json(const AccountingReport& report) {
  return json{{"text", report.totals.text},
              {"video", report.totals.video},
              {"graph", report.totals.graph},
              {"total", report.totals.total},
              {"videos_with_tokens", report.videos_with_tokens},
              {"graph_blocks", report.graph_blocks}};
}

}  // namespace mvg
