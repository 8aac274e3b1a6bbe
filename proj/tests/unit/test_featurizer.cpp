#include <doctest.h>

#include <cmath>

#include "dyad/errors.hpp"
#include "dyad/featurizer.hpp"

using namespace dyad;

namespace {

AnnotatedToken tok(std::string surface, std::string lemma, Pos pos,
                   std::optional<EntityTag> tag = std::nullopt) {
  return {std::move(surface), std::move(lemma), pos, tag};
}

std::vector<Bag> ten_docs() {
  return {
      {{"war", 2}, {"soldier", 3}, {"town", 1}},
      {{"war", 1}, {"army", 2}, {"river", 1}},
      {{"war", 1}, {"soldier", 1}, {"desert", 2}},
      {{"war", 1}, {"rebel", 4}, {"town", 2}},
      {{"war", 1}, {"army", 1}, {"rebel", 1}, {"camp", 1}},
      {{"war", 1}, {"river", 3}, {"bridge", 1}},
      {{"war", 1}, {"siege", 2}, {"town", 1}, {"camp", 2}},
      {{"war", 1}, {"soldier", 1}, {"army", 1}, {"town", 1}, {"river", 1}},
      {{"war", 1}, {"treaty", 5}},
      {{"war", 1}, {"siege", 1}, {"army", 1}},
  };
}

}  // namespace

TEST_CASE("preprocess keeps nouns, adjectives and religions") {
  CHECK(preprocess({tok("soldiers", "soldier", Pos::kNoun)}) == Bag{{"soldier", 1}});
  CHECK(preprocess({tok("Mali", "Mali", Pos::kNoun, EntityTag::kLocation),
                    tok("French", "French", Pos::kAdj, EntityTag::kNationality),
                    tok("2012", "2012", Pos::kNoun, EntityTag::kDate)})
            .empty());
  CHECK(preprocess({tok("Islam", "Islam", Pos::kNoun, EntityTag::kReligion),
                    tok("attacked", "attack", Pos::kOther)}) == Bag{{"islam", 1}});
  CHECK(preprocess({tok("Armed", "armed", Pos::kAdj), tok("armed", "armed", Pos::kAdj)}) ==
        Bag{{"armed", 2}});
}

TEST_CASE("tag names parse from tagger labels") {
  CHECK(parse_entity_tag("GPE") == EntityTag::kLocation);
  CHECK(parse_entity_tag("NORP") == EntityTag::kNationality);
  CHECK(parse_entity_tag("RELIGION") == EntityTag::kReligion);
  CHECK_FALSE(parse_entity_tag("O").has_value());
  CHECK(parse_pos("ADJ") == Pos::kAdj);
}

TEST_CASE("fallback annotator") {
  const Bag b = preprocess(annotate("The soldiers attacked the town in January 2012. French troops and Islam."));
  CHECK(b.contains("soldier"));
  CHECK(b.contains("town"));
  CHECK(b.contains("islam"));
  CHECK_FALSE(b.contains("french"));
  CHECK_FALSE(b.contains("2012"));
  CHECK_FALSE(b.contains("january"));
  CHECK_FALSE(b.contains("the"));
}

TEST_CASE("vocabulary: DF band, ranking, cap") {
  std::vector<Bag> docs;
  for (int i = 0; i < 10; ++i) docs.push_back({{"everywhere", 1}, {"t" + std::to_string(i), 1}});
  const Vocabulary v = build_vocabulary(docs, CorpusTag::kEntity);
  CHECK_FALSE(v.index_of("everywhere").has_value());
  CHECK(v.terms.size() == 10);

  const Vocabulary ten = build_vocabulary(ten_docs(), CorpusTag::kConflict);
  CHECK(ten.terms == std::vector<std::string>{"army", "rebel", "river", "soldier", "town", "treaty",
                                              "camp", "siege", "desert", "bridge"});
  CHECK(ten.document_frequency == std::vector<std::int64_t>{4, 2, 3, 3, 4, 1, 2, 2, 1, 1});
  for (std::size_t i = 0; i < ten.terms.size(); ++i) {
    const double r = static_cast<double>(ten.document_frequency[i]) / 10.0;
    CHECK(r >= 0.01);
    CHECK(r <= 0.40);
  }
  VocabularyOptions small;
  small.max_terms = 3;
  CHECK(build_vocabulary(ten_docs(), CorpusTag::kConflict, small).terms ==
        std::vector<std::string>{"army", "rebel", "river"});

  CHECK_THROWS_AS(build_vocabulary({}, CorpusTag::kEntity), ValidationError);
}

TEST_CASE("vocabulary is independent of document order") {
  auto docs = ten_docs();
  const std::string a = vocabulary_to_json(build_vocabulary(docs, CorpusTag::kEntity));
  std::reverse(docs.begin(), docs.end());
  CHECK(vocabulary_to_json(build_vocabulary(docs, CorpusTag::kEntity)) == a);
  CHECK(vocabulary_from_json(a) == build_vocabulary(docs, CorpusTag::kEntity));
}

TEST_CASE("tf-idf three document fixture") {
  const std::vector<Bag> docs{{{"soldier", 3}, {"town", 1}, {"army", 2}},
                              {{"town", 2}, {"river", 1}},
                              {{"army", 1}, {"river", 4}, {"desert", 1}}};
  VocabularyOptions all;
  all.min_df = 0.0;
  all.max_df = 1.0;
  const Vocabulary v = build_vocabulary(docs, CorpusTag::kEntity, all);
  REQUIRE(v.terms == std::vector<std::string>{"river", "army", "soldier", "town", "desert"});
  const std::vector<std::vector<double>> expected{
      {0, 0.44107915380844392, 0.8699491221298713, 0.22053957690422196, 0},
      {0.44721359549995793, 0, 0, 0.89442719099991586, 0},
      {0.92428041793096394, 0.23107010448274098, 0, 0, 0.30382941898983012}};
  for (std::size_t d = 0; d < 3; ++d) {
    const auto got = tfidf_vector(docs[d], v);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[d][i]).epsilon(1e-12));
  }
}

TEST_CASE("tf-idf ten document fixture") {
  const Vocabulary v = build_vocabulary(ten_docs(), CorpusTag::kConflict);
  const auto d0 = tfidf_vector(ten_docs()[0], v);
  CHECK(d0[3] == doctest::Approx(0.95878220065720487).epsilon(1e-12));
  CHECK(d0[4] == doctest::Approx(0.28414202734359317).epsilon(1e-12));
  const auto d1 = tfidf_vector(ten_docs()[1], v);
  CHECK(d1[0] == doctest::Approx(0.87161860136383706).epsilon(1e-12));
  CHECK(d1[2] == doctest::Approx(0.49018467311468272).epsilon(1e-12));
}

TEST_CASE("tf-idf edge cases and scale invariance") {
  const Vocabulary v = build_vocabulary(ten_docs(), CorpusTag::kConflict);
  const auto zero = tfidf_vector(Bag{{"unknown", 5}}, v);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double x) { return x == 0.0; }));
  const auto unit = tfidf_vector(Bag{{"siege", 1}}, v);
  CHECK(unit[*v.index_of("siege")] == 1.0);

  Bag doc = ten_docs()[7];
  const auto a = tfidf_vector(doc, v);
  for (auto& [t, c] : doc) c *= 7;
  const auto b = tfidf_vector(doc, v);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("edge embedding is the mean of conflict vectors") {
  std::map<std::string, FeatureVector> cv{{"1", {1, 0}}, {"2", {0, 1}}, {"3", {1, 0}}};
  Dyad d{"a", "b", Label::kAllies, {"1"}, 1, 0};
  CHECK(edge_embedding(d, cv) == FeatureVector{1, 0});
  d.conflict_ids = {"1", "3"};
  CHECK(edge_embedding(d, cv) == FeatureVector{1, 0});
  d.conflict_ids = {"1", "2"};
  const auto m = edge_embedding(d, cv);
  CHECK(std::hypot(m[0], m[1]) == doctest::Approx(1.0 / std::sqrt(2.0)));
  d.conflict_ids = {"1", "missing-7"};
  try {
    edge_embedding(d, cv);
    FAIL("expected not-found");
  } catch (const NotFoundError& e) {
    CHECK(std::string(e.what()).find("missing-7") != std::string::npos);
  }
}

TEST_CASE("top unigrams") {
  const Vocabulary v = build_vocabulary(ten_docs(), CorpusTag::kConflict);
  const Bag doc{{"soldier", 1}, {"town", 1}, {"desert", 2}, {"war", 9}};
  const auto top = top_unigrams(doc, v, 10);
  REQUIRE(top.size() == 3);
  CHECK(top[0].first == "desert");
  // soldier and town share df = 3 vs 4: soldier has the larger idf.
  CHECK(top[1].first == "soldier");
  CHECK(top[2].first == "town");
  CHECK(top_unigrams(doc, v, 1).size() == 1);
  CHECK_THROWS_AS(top_unigrams(doc, v, 0), ValidationError);

  Bag grown = doc;
  grown["town"] += 3;
  const auto after = top_unigrams(grown, v, 10);
  CHECK(after[0].first == "town");
}

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789}) {
    CHECK(std::stod(format_double(x)) == x);
  }
}
