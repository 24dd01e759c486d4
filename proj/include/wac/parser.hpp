#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace wac {

using Tokens = std::vector<std::string>;

struct Lexicons {
  // Multiword phrases stored as token sequences, matched longest first.
  std::vector<Tokens> relational_phrases;
  std::set<std::string> stopwords;
  std::set<std::string> adjectives;
  std::set<std::string> nouns;

  static Lexicons defaults();
  bool is_stopword(const std::string& token) const { return stopwords.contains(token); }
};

// Reads a lexicon file with [relational], [stopwords], [adjectives] and
// [nouns] sections, one entry per line. Missing sections keep their
// defaults (an empty set for adjectives and nouns).
Lexicons load_lexicons(const std::filesystem::path& path);
void save_lexicons(const Lexicons& lexicons, const std::filesystem::path& path);

struct NounPhrase {
  Tokens tokens;  // stopword-free
  std::vector<std::pair<std::string, std::string>> adj_noun_pairs;
  bool operator==(const NounPhrase&) const = default;
};

struct RelationSegment {
  std::string phrase;  // tokens joined with a single space, e.g. "right of"
  bool operator==(const RelationSegment&) const = default;
};

using Segment = std::variant<NounPhrase, RelationSegment>;

struct ParsedExpression {
  // Alternates NP, Rel, NP, ... and begins and ends with an NP.
  std::vector<Segment> segments;

  bool has_relation() const { return segments.size() >= 3; }
  // First NP.
  const NounPhrase& head() const;
  // The scored relation (the first one), if any.
  std::optional<std::string> relation() const;
  // Content tokens after the scored relation; later relations fold in as
  // ordinary words.
  Tokens landmark_tokens() const;
  // Every non-stopword token in order, relation tokens included.
  Tokens content_tokens() const;
};

std::vector<std::pair<std::string, std::string>> extract_adj_noun_pairs(
    std::span<const std::string> np_tokens, const Lexicons& lexicons);

ParsedExpression parse(std::span<const std::string> tokens, const Lexicons& lexicons);

}  // namespace wac
