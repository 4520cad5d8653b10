#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvg/graph.hpp"

namespace mvg {

struct TextualSceneGraph {
  std::vector<Triplet> triplets;
  std::string source_text;
};

// Word categories driving the caption grammar. The bundled default comes
// from data/lexicon.json; any file with the same keys can replace it.
struct Lexicon {
  std::set<std::string> determiners;
  std::set<std::string> prepositions;
  std::set<std::string> conjunctions;
  std::set<std::string> auxiliaries;
  std::set<std::string> adverbs;
  std::set<std::string> stop_verbs;
  std::set<std::string> verbs;  // base forms; inflections are recognized

  static const Lexicon& bundled();
  static Lexicon from_json(std::string_view json_text);
  static Lexicon load(const std::string& path);

  bool is_verb(std::string_view word) const;
};

// Lowercase, drop the articles a/an/the, trim and collapse whitespace.
std::string normalize_phrase(std::string_view text);

TextualSceneGraph parse_caption(std::string_view text, Keyframe keyframe,
                                const Lexicon& lexicon = Lexicon::bundled());

struct CaptionLine {
  Keyframe keyframe = 0;
  std::string text;
};

// Caption files hold one caption per line as "<keyframe>\t<text>".
std::vector<CaptionLine> parse_caption_file(std::string_view contents, const std::string& source_name = "<memory>");
std::vector<CaptionLine> read_caption_file(const std::string& path);

// Parses every caption and concatenates the triplets in line order.
std::vector<Triplet> parse_captions(const std::vector<CaptionLine>& captions,
                                    const Lexicon& lexicon = Lexicon::bundled());

}  // namespace mvg
