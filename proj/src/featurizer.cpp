#include "dyad/featurizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "dyad/errors.hpp"

namespace dyad {

const char* pos_name(Pos p) {
  switch (p) {
    case Pos::kNoun: return "NOUN";
    case Pos::kAdj: return "ADJ";
    case Pos::kOther: return "OTHER";
  }
  return "OTHER";
}

Pos parse_pos(const std::string& s) {
  if (s == "NOUN" || s == "PROPN") return Pos::kNoun;
  if (s == "ADJ") return Pos::kAdj;
  return Pos::kOther;
}

const char* entity_tag_name(EntityTag t) {
  switch (t) {
    case EntityTag::kLocation: return "LOCATION";
    case EntityTag::kDate: return "DATE";
    case EntityTag::kNationality: return "NATIONALITY";
    case EntityTag::kPoliticalGroup: return "POLITICAL_GROUP";
    case EntityTag::kOrganization: return "ORGANIZATION";
    case EntityTag::kReligion: return "RELIGION";
    case EntityTag::kOtherNe: return "OTHER_NE";
  }
  return "OTHER_NE";
}

std::optional<EntityTag> parse_entity_tag(const std::string& s) {
  static const std::map<std::string, EntityTag> kTags = {
      {"LOCATION", EntityTag::kLocation},   {"GPE", EntityTag::kLocation},
      {"LOC", EntityTag::kLocation},        {"FAC", EntityTag::kLocation},
      {"DATE", EntityTag::kDate},           {"TIME", EntityTag::kDate},
      {"NATIONALITY", EntityTag::kNationality},
      {"POLITICAL_GROUP", EntityTag::kPoliticalGroup},
      {"NORP", EntityTag::kNationality},    {"ORGANIZATION", EntityTag::kOrganization},
      {"ORG", EntityTag::kOrganization},    {"RELIGION", EntityTag::kReligion},
      {"OTHER_NE", EntityTag::kOtherNe}};
  if (s.empty() || s == "O" || s == "NONE") return std::nullopt;
  const auto it = kTags.find(s);
  return it == kTags.end() ? EntityTag::kOtherNe : it->second;
}

Bag preprocess(const std::vector<AnnotatedToken>& tokens) {
  Bag bag;
  for (const auto& t : tokens) {
    if (t.pos == Pos::kOther) continue;
    if (t.entity_tag && *t.entity_tag != EntityTag::kReligion) continue;
    std::string lemma = t.lemma.empty() ? t.surface : t.lemma;
    std::transform(lemma.begin(), lemma.end(), lemma.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lemma.empty()) continue;
    ++bag[lemma];
  }
  return bag;
}

// Fallback annotator ---------------------------------------------------------

namespace {

const std::set<std::string>& function_words() {
  static const std::set<std::string> kWords = {
      "a", "about", "above", "after", "again", "against", "all", "also", "although", "am",
      "among", "an", "and", "any", "are", "as", "at", "be", "became", "because", "become",
      "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
      "did", "do", "does", "doing", "down", "during", "each", "either", "else", "ever",
      "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
      "hers", "him", "his", "how", "however", "i", "if", "in", "into", "is", "it", "its",
      "itself", "just", "last", "later", "least", "less", "many", "may", "might", "more",
      "most", "much", "must", "my", "near", "neither", "no", "nor", "not", "now", "of",
      "off", "often", "on", "once", "one", "only", "or", "other", "our", "out", "over",
      "own", "per", "same", "several", "she", "should", "since", "so", "some", "such",
      "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
      "those", "though", "through", "thus", "to", "too", "toward", "towards", "two",
      "under", "until", "up", "upon", "us", "very", "via", "was", "we", "were", "what",
      "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will",
      "with", "within", "without", "would", "yet", "you", "your", "three", "four", "five",
      "six", "seven", "eight", "nine", "ten", "first", "second", "third", "new", "make",
      "made", "take", "took", "taken", "give", "gave", "given", "say", "said", "see",
      "seen", "go", "went", "gone", "come", "came", "get", "got", "begin", "began", "begun",
      "lead", "led", "hold", "held", "win", "won", "lose", "lost", "fight", "fought",
      "include", "includes", "remain", "remained", "continue", "continued", "occur",
      "occurred", "know", "known", "use", "used", "like", "well", "even", "still", "again",
      "around", "across", "along", "behind", "beyond", "instead", "already", "almost",
      "back", "away", "approximately", "about", "ago", "ii", "iii"};
  return kWords;
}

const std::set<std::string>& adjectives() {
  static const std::set<std::string> kAdj = {
      "large", "small", "big", "great", "major", "minor", "high", "low", "long", "short",
      "old", "young", "early", "late", "northern", "southern", "eastern", "western",
      "central", "popular", "senior", "junior", "nuclear", "civil", "military", "naval",
      "armed", "foreign", "domestic", "local", "national", "international", "regional",
      "independent", "violent", "strong", "weak", "heavy", "light", "full", "main",
      "final", "initial", "official", "royal", "rural", "urban", "key",
      "common", "rich", "poor", "free", "open", "close", "hostile", "allied", "rebel"};
  return kAdj;
}

const std::set<std::string>& religion_allowlist() {
  static const std::set<std::string> kRel = {
      "islam", "muslim", "muslims", "islamic", "christianity", "christian", "christians",
      "catholic", "catholicism", "protestant", "orthodox", "judaism", "jewish", "jew",
      "jews", "hinduism", "hindu", "hindus", "buddhism", "buddhist", "buddhists", "sikh",
      "sikhism", "sunni", "shia", "shiite", "sufi", "salafi", "salafist", "jihadist",
      "jihad", "church", "mosque"};
  return kRel;
}

const std::set<std::string>& months() {
  static const std::set<std::string> kMonths = {
      "january", "february", "march", "april", "may", "june", "july", "august",
      "september", "october", "november", "december"};
  return kMonths;
}

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string lemmatize(const std::string& w) {
  if (w.size() <= 3) return w;
  static const std::map<std::string, std::string> kIrregular = {
      {"men", "man"},         {"women", "woman"},   {"children", "child"},
      {"people", "people"},   {"casualties", "casualty"}, {"forces", "force"},
      {"lives", "life"},      {"wives", "wife"},    {"thieves", "thief"},
      {"analyses", "analysis"}, {"crises", "crisis"}, {"bases", "base"},
      {"series", "series"},   {"species", "species"}, {"news", "news"}};
  if (const auto it = kIrregular.find(w); it != kIrregular.end()) return it->second;
  if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
  if (ends_with(w, "sses") || ends_with(w, "shes") || ends_with(w, "ches") ||
      ends_with(w, "xes") || ends_with(w, "zes")) {
    return w.substr(0, w.size() - 2);
  }
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is") || ends_with(w, "ous")) {
    return w;
  }
  if (ends_with(w, "s")) return w.substr(0, w.size() - 1);
  return w;
}

const std::set<std::string>& demonyms() {
  static const std::set<std::string> kDem = {
      "french", "british", "english", "american", "german", "russian", "soviet", "chinese",
      "japanese", "italian", "spanish", "malian", "chadian", "nigerian", "nigerien", "libyan",
      "sudanese", "algerian", "egyptian", "tuareg", "arab", "kurdish", "turkish", "ottoman",
      "persian", "iranian", "iraqi", "syrian", "israeli", "afghan", "pakistani", "indian"};
  return kDem;
}

bool is_nationality_like(const std::string& lw) {
  static const char* kSuffixes[] = {"ian", "ean", "ese", "ish", "ic", "an", "i"};
  for (const char* s : kSuffixes) {
    if (ends_with(lw, s)) return true;
  }
  return false;
}

Pos guess_pos(const std::string& lw) {
  if (function_words().contains(lw)) return Pos::kOther;
  if (adjectives().contains(lw)) return Pos::kAdj;
  if (ends_with(lw, "ly")) return Pos::kOther;
  if (ends_with(lw, "ed") || ends_with(lw, "ize") || ends_with(lw, "ise")) return Pos::kOther;
  static const char* kAdjSuffixes[] = {"ous", "ful", "less", "able", "ible", "ive", "ical",
                                       "ary", "ian", "ese", "ern", "al", "ic"};
  for (const char* s : kAdjSuffixes) {
    if (ends_with(lw, s) && lw.size() > std::char_traits<char>::length(s) + 2) return Pos::kAdj;
  }
  return Pos::kNoun;
}

}  // namespace

std::vector<AnnotatedToken> annotate(std::string_view text) {
  std::vector<AnnotatedToken> out;
  bool sentence_start = true;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c) == 0) {
      if (c == '.' || c == '!' || c == '?' || c == '\n') sentence_start = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[j])) != 0 ||
            ((text[j] == '-' || text[j] == '\'') && j + 1 < text.size() &&
             std::isalpha(static_cast<unsigned char>(text[j + 1])) != 0))) {
      ++j;
    }
    std::string surface(text.substr(i, j - i));
    i = j;
    if (ends_with(surface, "'s")) surface.resize(surface.size() - 2);
    AnnotatedToken t;
    t.surface = surface;
    const std::string lw = lower_ascii(surface);
    t.lemma = lemmatize(lw);
    const bool capitalised = std::isupper(static_cast<unsigned char>(surface[0])) != 0;
    const bool has_digit = std::any_of(surface.begin(), surface.end(),
                                       [](unsigned char ch) { return std::isdigit(ch) != 0; });
    if (has_digit || months().contains(lw)) {
      t.pos = Pos::kNoun;
      t.entity_tag = EntityTag::kDate;
    } else if (religion_allowlist().contains(lw)) {
      t.pos = Pos::kNoun;
      t.entity_tag = EntityTag::kReligion;
    } else if (capitalised && !(sentence_start && function_words().contains(lw))) {
      const bool all_caps = std::all_of(surface.begin(), surface.end(), [](unsigned char ch) {
        return std::isupper(ch) != 0 || ch == '-';
      });
      t.pos = Pos::kNoun;
      if (all_caps && surface.size() > 1) {
        t.entity_tag = EntityTag::kOrganization;
      } else if (demonyms().contains(lw)) {
        t.pos = Pos::kAdj;
        t.entity_tag = EntityTag::kNationality;
      } else if (is_nationality_like(lw) && !sentence_start) {
        t.entity_tag = EntityTag::kNationality;
      } else if (sentence_start && guess_pos(lw) != Pos::kNoun) {
        t.pos = guess_pos(lw);
      } else if (!sentence_start) {
        t.entity_tag = EntityTag::kLocation;
      }
    } else {
      t.pos = guess_pos(lw);
    }
    sentence_start = false;
    if (t.lemma.size() < 2) t.pos = Pos::kOther;
    out.push_back(std::move(t));
  }
  return out;
}

// Vocabulary and vectors ----------------------------------------------------

const char* corpus_tag_name(CorpusTag t) { return t == CorpusTag::kEntity ? "ENTITY" : "CONFLICT"; }

std::optional<std::size_t> Vocabulary::index_of(const std::string& term) const {
  // Terms are ordered by frequency, so a linear scan; callers cache maps.
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i] == term) return i;
  }
  return std::nullopt;
}

Vocabulary build_vocabulary(const std::vector<Bag>& docs, CorpusTag tag,
                            const VocabularyOptions& options) {
  if (docs.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> stats;  // df, total tf
  for (const Bag& d : docs) {
    for (const auto& [term, count] : d) {
      if (count <= 0) continue;
      auto& s = stats[term];
      ++s.first;
      s.second += count;
    }
  }
  const auto n = static_cast<std::int64_t>(docs.size());
  struct Candidate {
    std::string term;
    std::int64_t df;
    std::int64_t tf;
  };
  std::vector<Candidate> kept;
  for (const auto& [term, s] : stats) {
    const double ratio = static_cast<double>(s.first) / static_cast<double>(n);
    if (ratio >= options.min_df && ratio <= options.max_df) kept.push_back({term, s.first, s.second});
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    if (a.tf != b.tf) return a.tf > b.tf;
    return a.term < b.term;
  });
  if (kept.size() > options.max_terms) kept.resize(options.max_terms);
  Vocabulary v;
  v.corpus_tag = tag;
  v.total_documents = n;
  for (auto& c : kept) {
    v.terms.push_back(std::move(c.term));
    v.document_frequency.push_back(c.df);
  }
  return v;
}

FeatureVector tfidf_vector(const Bag& doc, const Vocabulary& vocab) {
  FeatureVector out(vocab.terms.size(), 0.0);
  const double n = static_cast<double>(vocab.total_documents);
  for (std::size_t i = 0; i < vocab.terms.size(); ++i) {
    const auto it = doc.find(vocab.terms[i]);
    if (it == doc.end() || it->second <= 0) continue;
    const double idf =
        std::log((1.0 + n) / (1.0 + static_cast<double>(vocab.document_frequency[i]))) + 1.0;
    out[i] = static_cast<double>(it->second) * idf;
  }
  double norm = 0.0;
  for (double x : out) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : out) x /= norm;
  }
  return out;
}

FeatureVector edge_embedding(const Dyad& edge,
                             const std::map<std::string, FeatureVector>& conflict_vectors) {
  if (edge.conflict_ids.empty()) throw ValidationError("edge " + edge.u + " -- " + edge.v + " has no conflicts");
  FeatureVector out;
  for (const auto& id : edge.conflict_ids) {
    const auto it = conflict_vectors.find(id);
    if (it == conflict_vectors.end()) throw NotFoundError("no feature vector for conflict " + id);
    if (out.empty()) out.assign(it->second.size(), 0.0);
    if (it->second.size() != out.size()) throw ShapeError("conflict vectors differ in length");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += it->second[i];
  }
  const double k = static_cast<double>(edge.conflict_ids.size());
  for (double& x : out) x /= k;
  return out;
}

std::vector<std::pair<std::string, double>> top_unigrams(const Bag& doc, const Vocabulary& vocab,
                                                         std::size_t k) {
  if (k == 0) throw ValidationError("top_unigrams: k must be at least 1");
  const FeatureVector v = tfidf_vector(doc, vocab);
  std::vector<std::pair<std::string, double>> ranked;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > 0.0) ranked.emplace_back(vocab.terms[i], v[i]);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

std::string vocabulary_to_json(const Vocabulary& v) {
  nlohmann::ordered_json j;
  j["corpus_tag"] = corpus_tag_name(v.corpus_tag);
  j["total_documents"] = v.total_documents;
  j["terms"] = v.terms;
  j["document_frequency"] = v.document_frequency;
  return j.dump(1) + "\n";
}

Vocabulary vocabulary_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Vocabulary v;
  v.corpus_tag = j.at("corpus_tag").get<std::string>() == "ENTITY" ? CorpusTag::kEntity
                                                                   : CorpusTag::kConflict;
  v.total_documents = j.at("total_documents").get<std::int64_t>();
  v.terms = j.at("terms").get<std::vector<std::string>>();
  v.document_frequency = j.at("document_frequency").get<std::vector<std::int64_t>>();
  if (v.terms.size() != v.document_frequency.size()) {
    throw ValidationError("vocabulary terms and frequencies differ in length");
  }
  return v;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace dyad
