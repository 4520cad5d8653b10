#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvg {

enum class SegmentKind { Text, VideoTokens, GraphTokens };

std::string_view to_string(SegmentKind kind);

struct PromptSegment {
  SegmentKind kind = SegmentKind::Text;
  std::string text;           // text segments only
  std::size_t count = 0;      // token count; for text, the estimator's count
  std::string ref;            // token segments only
  std::optional<std::string> owner;

  friend bool operator==(const PromptSegment&, const PromptSegment&) = default;
};

struct TokenTotals {
  std::size_t text = 0;
  std::size_t video = 0;
  std::size_t graph = 0;
  std::size_t total = 0;

  friend bool operator==(const TokenTotals&, const TokenTotals&) = default;
};

struct AssembledPrompt {
  std::vector<PromptSegment> segments;
  TokenTotals totals;
};

struct PromptTemplate {
  std::string system;
  std::string one_shot;
  std::string target_label;
  std::string target_graph_label;
  std::string related_label;        // "{index}" is replaced by the 1-based position
  std::string related_video_label;  // used by the naive style
  std::string question_prefix;
  std::string cot;

  static const PromptTemplate& bundled();
  static PromptTemplate from_json(const nlohmann::json& doc);
  static PromptTemplate load(const std::string& path);
};

// One video taking part in the prompt. graph_nodes is the number of fused
// graph tokens available for it; no value means it has no graph block.
struct PromptVideo {
  std::string video_id;
  std::optional<std::size_t> graph_nodes;
  std::string graph_ref;
  std::string video_ref;
};

enum class PromptStyle {
  Structured,  // target video + graph tokens, related graphs only
  Naive,       // video tokens for every video, no graphs
};

struct AssemblyOptions {
  PromptStyle style = PromptStyle::Structured;
  bool one_shot = false;
  bool cot = true;
  std::optional<std::size_t> graph_token_cap = 200;
};

// Splits a graph-token budget over graphs with the given node counts. Each
// graph keeps a prefix of its nodes; leftover tokens go to earlier graphs.
std::vector<std::size_t> allocate_graph_tokens(const std::vector<std::size_t>& demands, std::optional<std::size_t> cap);

// Whitespace-and-punctuation rule: each maximal run of letters/digits is one
// token and every other non-space byte is a token of its own.
std::size_t estimate_text_tokens(std::string_view text);

AssembledPrompt assemble_prompt(std::size_t target_video_token_count, const PromptVideo& target,
                                const std::vector<PromptVideo>& related, const std::string& question,
                                const PromptTemplate& tmpl = PromptTemplate::bundled(),
                                const AssemblyOptions& options = {});

struct AccountingConfig {
  std::size_t frames_per_video = 8;
  std::size_t tokens_per_frame = 256;

  std::size_t video_tokens() const { return frames_per_video * tokens_per_frame; }
};

struct AccountingReport {
  TokenTotals totals;
  std::size_t videos_with_tokens = 0;
  std::size_t graph_blocks = 0;
};

// Recomputes the totals: video segments are charged frames x tokens_per_frame,
// graph segments their count and text segments the estimator.
AccountingReport count_tokens(const AssembledPrompt& prompt, const AccountingConfig& config = {});

nlohmann::json prompt_to_json(const AssembledPrompt& prompt);
AssembledPrompt prompt_from_json(const nlohmann::json& doc);
nlohmann::json accounting_to_json(const AccountingReport& report);

}  // namespace mvg
