#include "mvg/caption_parser.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvg/error.hpp"
#include "embedded_data.hpp"

namespace mvg {

namespace {

std::set<std::string> string_set(const nlohmann::json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_array())
    throw Error(ErrorCode::FormatError, std::string("lexicon: missing word list '") + key + "'", "<lexicon>");
  std::set<std::string> out;
  for (const auto& v : doc.at(key)) {
    if (!v.is_string())
      throw Error(ErrorCode::FormatError, std::string("lexicon: non-string entry in '") + key + "'", "<lexicon>");
    out.insert(v.get<std::string>());
  }
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

Lexicon Lexicon::from_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("lexicon: ") + e.what(), "<lexicon>", e.byte);
  }
  Lexicon lex;
  lex.determiners = string_set(doc, "determiners");
  lex.prepositions = string_set(doc, "prepositions");
  lex.conjunctions = string_set(doc, "conjunctions");
  lex.auxiliaries = string_set(doc, "auxiliaries");
  lex.adverbs = string_set(doc, "adverbs");
  lex.stop_verbs = string_set(doc, "stop_verbs");
  lex.verbs = string_set(doc, "verbs");
  return lex;
}

const Lexicon& Lexicon::bundled() {
  static const Lexicon lex = from_json(embedded::lexicon_json);
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open lexicon file", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

bool Lexicon::is_verb(std::string_view word) const {
  auto known = [&](std::string_view w) { return !w.empty() && verbs.contains(std::string(w)); };
  if (known(word)) return true;
  const std::size_t n = word.size();
  if (ends_with(word, "ied") && n > 3 && known(std::string(word.substr(0, n - 3)) + "y")) return true;
  if (ends_with(word, "ies") && n > 3 && known(std::string(word.substr(0, n - 3)) + "y")) return true;
  if (ends_with(word, "es") && known(word.substr(0, n - 2))) return true;
  if (ends_with(word, "s") && !ends_with(word, "ss") && known(word.substr(0, n - 1))) return true;
  for (std::string_view suffix : {std::string_view("ing"), std::string_view("ed")}) {
    if (!ends_with(word, suffix) || n <= suffix.size() + 1) continue;
    std::string_view stem = word.substr(0, n - suffix.size());
    if (known(stem) || known(std::string(stem) + "e")) return true;
    const std::size_t m = stem.size();
    if (m >= 2 && stem[m - 1] == stem[m - 2] && !is_vowel(stem[m - 1]) && known(stem.substr(0, m - 1))) return true;
    if (suffix == "ed" && known(word.substr(0, n - 1))) return true;
  }
  return false;
}

std::string normalize_phrase(std::string_view text) {
  std::string out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (word != "a" && word != "an" && word != "the") {
      if (!out.empty()) out.push_back(' ');
      out += word;
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

namespace {

enum class Cat { Word, Det, Prep, Conj, Sep, Aux, StopVerb, Adverb, Verb };

struct Token {
  std::string text;
  Cat cat = Cat::Word;
};

std::vector<std::vector<std::string>> split_sentences(std::string_view text) {
  std::vector<std::vector<std::string>> sentences(1);
  std::string word;
  auto flush = [&] {
    if (!word.empty()) sentences.back().push_back(std::move(word));
    word.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || raw == '\'' || raw == '-') {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (raw == '.' || raw == '!' || raw == '?') {
      flush();
      if (!sentences.back().empty()) sentences.emplace_back();
    } else if (raw == ',' || raw == ';' || raw == ':') {
      flush();
      sentences.back().emplace_back(",");
    } else {
      flush();
    }
  }
  flush();
  if (sentences.back().empty()) sentences.pop_back();
  return sentences;
}

std::vector<Token> categorize(const std::vector<std::string>& words, const Lexicon& lex) {
  std::vector<Token> tokens(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string& w = words[i];
    Token& t = tokens[i];
    t.text = w;
    if (w == ",") t.cat = Cat::Sep;
    else if (lex.conjunctions.contains(w)) t.cat = Cat::Conj;
    else if (lex.determiners.contains(w)) t.cat = Cat::Det;
    else if (lex.prepositions.contains(w)) t.cat = Cat::Prep;
    else if (lex.auxiliaries.contains(w)) t.cat = Cat::Aux;
    else if (lex.stop_verbs.contains(w)) t.cat = Cat::StopVerb;
    else if (lex.adverbs.contains(w)) t.cat = Cat::Adverb;
    else if (lex.is_verb(w)) t.cat = Cat::Verb;
  }
  // An unlisted "-ly" word directly before a verb group is an adverb.
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    Token& t = tokens[i];
    const Cat next = tokens[i + 1].cat;
    if (t.cat == Cat::Word && t.text.size() > 4 && ends_with(t.text, "ly") &&
        (next == Cat::Verb || next == Cat::Aux))
      t.cat = Cat::Adverb;
  }
  return tokens;
}

class SentenceParser {
 public:
  SentenceParser(const std::vector<Token>& tokens, Keyframe keyframe, std::vector<Triplet>& out)
      : toks_(tokens), keyframe_(keyframe), out_(out) {}

  void run() {
    std::size_t i = 0;
    while (i < toks_.size()) {
      std::size_t j = i;
      auto subject = noun_phrase(j);
      if (subject) {
        std::size_t k = j;
        if (starts_verb_group(k)) {
          i = clause(*subject, k);
          continue;
        }
      }
      ++i;
    }
  }

 private:
  Cat cat(std::size_t i) const { return i < toks_.size() ? toks_[i].cat : Cat::Sep; }
  bool at_end(std::size_t i) const { return i >= toks_.size(); }

  // Determiners then contiguous content words. The first content word is
  // always read as a noun, even when it could inflect as a verb ("drinks").
  std::optional<std::string> noun_phrase(std::size_t& i) const {
    std::size_t j = i;
    while (!at_end(j) && cat(j) == Cat::Det) ++j;
    std::string phrase;
    bool first = true;
    while (!at_end(j)) {
      const Cat c = cat(j);
      if (c == Cat::Word || (first && c == Cat::Verb)) {
        if (!phrase.empty()) phrase.push_back(' ');
        phrase += toks_[j].text;
        first = false;
        ++j;
      } else {
        break;
      }
    }
    if (phrase.empty()) return std::nullopt;
    i = j;
    return phrase;
  }

  bool starts_verb_group(std::size_t i) const {
    while (!at_end(i) && cat(i) == Cat::Adverb) ++i;
    const Cat c = cat(i);
    return !at_end(i) && (c == Cat::Verb || c == Cat::Aux || c == Cat::StopVerb);
  }

  // Adverbs, auxiliaries, and stop verbs (with an optional "to") are skipped;
  // the main verb is the predicate head. A bare auxiliary ("is") stands in
  // when no main verb follows.
  std::optional<std::string> verb_group(std::size_t& i) const {
    std::size_t j = i;
    std::string last_aux;
    while (!at_end(j)) {
      const Cat c = cat(j);
      if (c == Cat::Adverb) {
        ++j;
      } else if (c == Cat::Aux) {
        last_aux = toks_[j].text;
        ++j;
      } else if (c == Cat::StopVerb) {
        ++j;
        if (!at_end(j) && toks_[j].text == "to") ++j;
      } else {
        break;
      }
    }
    if (!at_end(j) && cat(j) == Cat::Verb) {
      i = j + 1;
      return toks_[j].text;
    }
    if (last_aux.empty()) return std::nullopt;
    i = j;
    return last_aux;
  }

  void emit(const std::string& subject, const std::string& predicate, const std::string& object) {
    out_.push_back({normalize_phrase(subject), predicate, normalize_phrase(object), keyframe_});
  }

  std::string prepositions(std::size_t& i) const {
    std::string preps;
    while (!at_end(i) && cat(i) == Cat::Prep) {
      if (!preps.empty()) preps.push_back(' ');
      preps += toks_[i].text;
      ++i;
    }
    return preps;
  }

  void skip_modifiers(std::size_t& i) const {
    while (!at_end(i) && cat(i) == Cat::Prep) {
      std::size_t j = i;
      prepositions(j);
      if (!noun_phrase(j)) return;
      i = j;
    }
  }

  // Parses "verb-group object" starting at i for the given subject, then any
  // coordinated continuations. Returns the index where scanning resumes.
  std::size_t clause(const std::string& subject, std::size_t i) {
    auto verb = verb_group(i);
    if (!verb) return i + 1;
    std::string predicate = *verb;

    if (cat(i) == Cat::Prep) {
      // verb + particle/preposition + object: "walks into a room"
      std::size_t j = i;
      predicate += " " + prepositions(j);
      auto object = noun_phrase(j);
      if (!object) return j;
      i = j;
      emit(subject, predicate, *object);
    } else {
      auto object = noun_phrase(i);
      if (!object) return i;  // intransitive
      std::size_t j = i;
      std::string preps = prepositions(j);
      std::optional<std::string> pobj;
      if (!preps.empty()) pobj = noun_phrase(j);
      if (pobj) {
        // Longest match: the prepositional object replaces the direct one.
        predicate += " " + preps;
        i = j;
        emit(subject, predicate, *pobj);
      } else {
        emit(subject, predicate, *object);
      }
    }
    skip_modifiers(i);
    return coordination(subject, predicate, i);
  }

  std::size_t coordination(const std::string& subject, const std::string& predicate, std::size_t i) {
    while (!at_end(i) && (cat(i) == Cat::Conj || cat(i) == Cat::Sep)) {
      std::size_t j = i;
      while (!at_end(j) && (cat(j) == Cat::Conj || cat(j) == Cat::Sep)) ++j;
      if (at_end(j)) return j;
      if (starts_verb_group(j)) return clause(subject, j);  // shared subject
      std::size_t k = j;
      auto np = noun_phrase(k);
      if (!np) return j;
      if (starts_verb_group(k)) return clause(*np, k);  // new subject
      emit(subject, predicate, *np);                    // coordinated object
      skip_modifiers(k);
      i = k;
    }
    return i;
  }

  const std::vector<Token>& toks_;
  Keyframe keyframe_;
  std::vector<Triplet>& out_;
};

}  // namespace

TextualSceneGraph parse_caption(std::string_view text, Keyframe keyframe, const Lexicon& lexicon) {
  TextualSceneGraph g;
  g.source_text = std::string(text);
  for (const auto& words : split_sentences(text)) {
    const auto tokens = categorize(words, lexicon);
    SentenceParser(tokens, keyframe, g.triplets).run();
  }
  return g;
}

std::vector<CaptionLine> parse_caption_file(std::string_view contents, const std::string& source_name) {
  std::vector<CaptionLine> lines;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(pos, end - pos);
    const std::size_t line_start = pos;
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw Error(ErrorCode::FormatError, "caption line " + std::to_string(line_no) + " lacks '<keyframe>\\t' prefix",
                  source_name, line_start);
    Keyframe kf = 0;
    for (char c : line.substr(0, tab)) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw Error(ErrorCode::FormatError, "caption line " + std::to_string(line_no) + " has a non-numeric keyframe",
                    source_name, line_start);
      kf = kf * 10 + static_cast<Keyframe>(c - '0');
    }
    lines.push_back({kf, std::string(line.substr(tab + 1))});
  }
  return lines;
}

std::vector<CaptionLine> read_caption_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open caption file", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_caption_file(ss.str(), path);
}

std::vector<Triplet> parse_captions(const std::vector<CaptionLine>& captions, const Lexicon& lexicon) {
  std::vector<Triplet> all;
  for (const auto& c : captions) {
    auto g = parse_caption(c.text, c.keyframe, lexicon);
    all.insert(all.end(), g.triplets.begin(), g.triplets.end());
  }
  return all;
}

}  // namespace mvg
