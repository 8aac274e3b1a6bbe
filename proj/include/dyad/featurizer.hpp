#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dyad/graph.hpp"

namespace dyad {

enum class Pos { kNoun, kAdj, kOther };
enum class EntityTag {
  kLocation, kDate, kNationality, kPoliticalGroup, kOrganization, kReligion, kOtherNe
};

const char* pos_name(Pos p);
Pos parse_pos(const std::string& s);
const char* entity_tag_name(EntityTag t);
// Accepts the names above plus common tagger labels (GPE, LOC, NORP, ORG, ...).
std::optional<EntityTag> parse_entity_tag(const std::string& s);

struct AnnotatedToken {
  std::string surface;
  std::string lemma;
  Pos pos = Pos::kOther;
  std::optional<EntityTag> entity_tag;
};

using Bag = std::map<std::string, std::int64_t>;

// Lower-cased lemmas of nouns and adjectives, minus named entities other
// than religions.
Bag preprocess(const std::vector<AnnotatedToken>& tokens);

// Built-in annotator: suffix lemmatiser, small POS lexicon and a gazetteer
// with a religion allowlist.
std::vector<AnnotatedToken> annotate(std::string_view text);

enum class CorpusTag { kEntity, kConflict };
const char* corpus_tag_name(CorpusTag t);

struct VocabularyOptions {
  double min_df = 0.01;  // inclusive
  double max_df = 0.40;  // inclusive
  std::size_t max_terms = 500;
};

struct Vocabulary {
  CorpusTag corpus_tag = CorpusTag::kEntity;
  std::vector<std::string> terms;
  std::vector<std::int64_t> document_frequency;
  std::int64_t total_documents = 0;

  std::optional<std::size_t> index_of(const std::string& term) const;
  bool operator==(const Vocabulary&) const = default;
};

// DF band first, then the top max_terms by total frequency (ties
// lexicographic). ValidationError for an empty corpus.
Vocabulary build_vocabulary(const std::vector<Bag>& docs, CorpusTag tag,
                            const VocabularyOptions& options = {});

using FeatureVector = std::vector<double>;

// Raw-count tf times ln((1 + N) / (1 + df)) + 1, L2-normalised.
FeatureVector tfidf_vector(const Bag& doc, const Vocabulary& vocab);

// Mean of the edge's conflict vectors; NotFoundError naming a missing id.
FeatureVector edge_embedding(const Dyad& edge, const std::map<std::string, FeatureVector>& conflict_vectors);

// Highest tf-idf terms of `doc`, descending, ties lexicographic.
std::vector<std::pair<std::string, double>> top_unigrams(const Bag& doc, const Vocabulary& vocab,
                                                         std::size_t k);

std::string vocabulary_to_json(const Vocabulary& v);
Vocabulary vocabulary_from_json(const std::string& text);

// %.17g rendering used for every serialised float.
std::string format_double(double x);

}  // namespace dyad
