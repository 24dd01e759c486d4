#include "wac/parser.hpp"

#include <algorithm>
#include <fstream>

#include "wac/core_data.hpp"
#include "wac/error.hpp"

namespace wac {

Lexicons Lexicons::defaults() {
  Lexicons lex;
  for (const char* phrase : {"below", "above", "between", "not", "behind", "under", "underneath",
                             "front of", "right of", "left of", "ontop of", "next to",
                             "middle of"}) {
    lex.relational_phrases.push_back(tokenize(phrase));
  }
  lex.stopwords = {"the", "a", "an"};
  return lex;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Lexicons load_lexicons(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file '" + path.string() + "'");
  Lexicons lex = Lexicons::defaults();
  std::set<std::string> seen;
  std::string section;
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      if (section != "relational" && section != "stopwords" && section != "adjectives" &&
          section != "nouns") {
        throw ParseError(path.string(), line_no, "unknown section [" + section + "]");
      }
      if (seen.insert(section).second) {
        if (section == "relational") lex.relational_phrases.clear();
        if (section == "stopwords") lex.stopwords.clear();
      }
      continue;
    }
    if (section.empty()) throw ParseError(path.string(), line_no, "entry outside a section");
    if (section == "relational") {
      lex.relational_phrases.push_back(tokenize(line));
    } else if (section == "stopwords") {
      lex.stopwords.insert(line);
    } else if (section == "adjectives") {
      lex.adjectives.insert(line);
    } else {
      lex.nouns.insert(line);
    }
  }
  for (const auto& adj : lex.adjectives) {
    if (lex.nouns.contains(adj)) {
      throw ParseError(path.string(), 0, "'" + adj + "' is both an adjective and a noun");
    }
  }
  return lex;
}

void save_lexicons(const Lexicons& lex, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "[relational]\n";
  for (const auto& phrase : lex.relational_phrases) out << join_tokens(phrase) << '\n';
  out << "[stopwords]\n";
  for (const auto& w : lex.stopwords) out << w << '\n';
  out << "[adjectives]\n";
  for (const auto& w : lex.adjectives) out << w << '\n';
  out << "[nouns]\n";
  for (const auto& w : lex.nouns) out << w << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

const NounPhrase& ParsedExpression::head() const { return std::get<NounPhrase>(segments.front()); }

std::optional<std::string> ParsedExpression::relation() const {
  if (!has_relation()) return std::nullopt;
  return std::get<RelationSegment>(segments[1]).phrase;
}

Tokens ParsedExpression::landmark_tokens() const {
  Tokens out;
  for (std::size_t i = 2; i < segments.size(); ++i) {
    if (const auto* np = std::get_if<NounPhrase>(&segments[i])) {
      out.insert(out.end(), np->tokens.begin(), np->tokens.end());
    } else {
      const auto rel = tokenize(std::get<RelationSegment>(segments[i]).phrase);
      out.insert(out.end(), rel.begin(), rel.end());
    }
  }
  return out;
}

Tokens ParsedExpression::content_tokens() const {
  Tokens out;
  for (const auto& seg : segments) {
    if (const auto* np = std::get_if<NounPhrase>(&seg)) {
      out.insert(out.end(), np->tokens.begin(), np->tokens.end());
    } else {
      const auto rel = tokenize(std::get<RelationSegment>(seg).phrase);
      out.insert(out.end(), rel.begin(), rel.end());
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> extract_adj_noun_pairs(
    std::span<const std::string> np_tokens, const Lexicons& lexicons) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> pending;  // adjectives since the last noun
  for (const auto& tok : np_tokens) {
    if (lexicons.nouns.contains(tok)) {
      for (const auto& adj : pending) pairs.emplace_back(adj, tok);
      pending.clear();
    } else if (lexicons.adjectives.contains(tok)) {
      pending.push_back(tok);
    }
  }
  return pairs;
}

ParsedExpression parse(std::span<const std::string> tokens, const Lexicons& lexicons) {
  std::vector<const Tokens*> phrases;
  for (const auto& p : lexicons.relational_phrases) {
    if (!p.empty()) phrases.push_back(&p);
  }
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const Tokens* a, const Tokens* b) { return a->size() > b->size(); });

  ParsedExpression out;
  Tokens current;
  auto absorb = [&](std::span<const std::string> toks) {
    for (const auto& t : toks) {
      if (!lexicons.is_stopword(t)) current.push_back(t);
    }
  };

  for (std::size_t i = 0; i < tokens.size();) {
    const Tokens* match = nullptr;
    for (const Tokens* p : phrases) {
      if (i + p->size() <= tokens.size() &&
          std::equal(p->begin(), p->end(), tokens.begin() + static_cast<long>(i))) {
        match = p;
        break;
      }
    }
    if (!match) {
      absorb(tokens.subspan(i, 1));
      ++i;
      continue;
    }
    if (current.empty()) {
      // No NP to the left: the phrase is an ordinary word here.
      absorb(*match);
    } else {
      out.segments.emplace_back(NounPhrase{std::move(current), {}});
      out.segments.emplace_back(RelationSegment{join_tokens(*match)});
      current.clear();
    }
    i += match->size();
  }

  if (current.empty() && !out.segments.empty()) {
    // Trailing relation with nothing after it: demote and merge with the NP before.
    const auto rel = tokenize(std::get<RelationSegment>(out.segments.back()).phrase);
    out.segments.pop_back();
    current = std::move(std::get<NounPhrase>(out.segments.back()).tokens);
    out.segments.pop_back();
    absorb(rel);
  }
  out.segments.emplace_back(NounPhrase{std::move(current), {}});

  for (auto& seg : out.segments) {
    if (auto* np = std::get_if<NounPhrase>(&seg)) {
      np->adj_noun_pairs = extract_adj_noun_pairs(np->tokens, lexicons);
    }
  }
  return out;
}

}  // namespace wac
