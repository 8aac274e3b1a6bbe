#include "dyad/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dyad/analysis.hpp"
#include "dyad/errors.hpp"
#include "dyad/models.hpp"
#include "dyad/synthetic.hpp"

namespace dyad {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void EventLog::emit(const std::string& event, ojson fields) {
  if (out_ == nullptr) return;
  ojson line;
  line["event"] = event;
  for (auto& [k, v] : fields.items()) line[k] = v;
  *out_ << line.dump() << '\n';
  out_->flush();
}

namespace {

void log_event(const RunContext& ctx, const std::string& event, ojson fields = ojson::object()) {
  if (ctx.log != nullptr) ctx.log->emit(event, std::move(fields));
}

std::string out_path(const RunContext& ctx, const std::string& name) {
  return (fs::path(ctx.out_dir) / name).string();
}

std::string resolve_in(const RunContext& ctx, const std::string& p) {
  if (fs::path(p).is_absolute() || fs::exists(p)) return p;
  return out_path(ctx, p);
}

ojson default_config() {
  ojson blacklist = ojson::array();
  for (const auto& t : default_section_blacklist()) blacklist.push_back(t);
  ojson c;
  c["ingest"] = {{"category_root", nullptr},
                 {"category_depth", 4},
                 {"max_redirect_hops", 5},
                 {"max_nesting", 128},
                 {"section_blacklist", blacklist}};
  c["features"] = {{"min_df", 0.01},
                   {"max_df", 0.40},
                   {"max_terms", 500},
                   {"missing_node_policy", "error"}};
  c["model"] = {{"node_encoder_dims", {64}},
                {"edge_encoder_dims", {64}},
                {"classifier_dims", {64}},
                {"gin_hidden_dims", {64}},
                {"gin_steps", 2},
                {"learn_gin_eps", false},
                {"gin_eps", 0.0},
                {"threshold", 0.5}};
  c["train"] = {{"variants", nullptr},
                {"n_runs", 10},
                {"max_epochs", 30},
                {"patience", 3},
                {"batch_size", 512},
                {"fractions", {0.6, 0.3, 0.1}},
                {"learning_rate", 1e-3},
                {"beta1", 0.9},
                {"beta2", 0.999},
                {"adam_eps", 1e-8},
                {"comparisons", ojson::array({ojson::array({"S", "D"})})},
                {"n_resamples", 10000},
                {"shuffle_exposed_labels", false},
                {"f1_average", "binary"},
                {"synthetic", nullptr},
                {"graph", "graph.json"},
                {"features", "features.jsonl"}};
  c["analyze"] = {{"top_n", 1000}, {"k", 250}, {"pooled", false}, {"top_unigrams_k", 10}};
  return c;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

nlohmann::json load_config(const std::string& path) {
  ojson merged = default_config();
  if (!path.empty()) {
    nlohmann::json user;
    try {
      user = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed config " + path + ": " + e.what());
    } catch (const NotFoundError& e) {
      throw ConfigError(e.what());
    }
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [section, body] : user.items()) {
      if (!merged.contains(section)) throw ConfigError("unknown config section: " + section);
      if (!body.is_object()) throw ConfigError("config section " + section + " must be an object");
      for (const auto& [key, value] : body.items()) {
        if (!merged[section].contains(key)) {
          throw ConfigError("unknown config key: " + section + "." + key);
        }
        merged[section][key] = value;
      }
    }
  }
  nlohmann::json out = merged;
  try {
    const auto& t = out["train"];
    if (!t["variants"].is_null()) {
      for (const auto& v : t["variants"]) parse_variant(v.get<std::string>());
    }
    for (const auto& pair : t["comparisons"]) {
      if (pair.size() != 2) throw ConfigError("each comparison names two variants");
      parse_variant(pair[0].get<std::string>());
      parse_variant(pair[1].get<std::string>());
    }
    const std::string avg = t["f1_average"].get<std::string>();
    if (avg != "binary" && avg != "macro" && avg != "weighted") {
      throw ConfigError("f1_average must be binary, macro or weighted");
    }
    const std::string policy = out["features"]["missing_node_policy"].get<std::string>();
    if (policy != "error" && policy != "zero") {
      throw ConfigError("missing_node_policy must be error or zero");
    }
    if (!t["synthetic"].is_null()) {
      const std::string kind = t["synthetic"].value("kind", "");
      if (kind != "balance" && kind != "content") {
        throw ConfigError("synthetic.kind must be balance or content");
      }
    }
    split_sizes(10, t["fractions"].get<std::array<double, 3>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

void write_file(const std::string& path, const std::string& contents) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NotFoundError("cannot write " + path);
  out << contents;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const RunContext& ctx, const std::string& command,
                    const std::vector<std::string>& inputs, const std::string& started_at) {
  ojson m;
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["config_path"] = ctx.config_path;
  m["config_sha256"] = sha256_hex(nlohmann::json(ctx.config).dump());
  ojson digests = ojson::object();
  for (const auto& p : inputs) {
    if (fs::is_regular_file(p)) digests[p] = sha256_file(p);
  }
  m["input_sha256"] = digests;
  m["seeds"] = {{"base_seed", ctx.seed}};
  m["started_at"] = started_at;
  m["finished_at"] = utc_now();
  m["threads"] = ctx.threads;
  m["infobox_rule_version"] = kInfoboxRuleVersion;
  write_file(out_path(ctx, "manifest-" + command + ".json"), m.dump(1) + "\n");
}

// Ingest ---------------------------------------------------------------------

namespace {

ojson ref_to_json(const EntityRef& r) {
  ojson j;
  j["raw_text"] = r.raw_text;
  j["link_target"] = r.link_target ? ojson(*r.link_target) : ojson(nullptr);
  j["resolved_title"] = r.resolved_title ? ojson(*r.resolved_title) : ojson(nullptr);
  return j;
}

EntityRef ref_from_json(const nlohmann::json& j) {
  EntityRef r;
  r.raw_text = j.at("raw_text").get<std::string>();
  if (j.contains("link_target") && !j["link_target"].is_null()) {
    r.link_target = j["link_target"].get<std::string>();
  }
  if (j.contains("resolved_title") && !j["resolved_title"].is_null()) {
    r.resolved_title = j["resolved_title"].get<std::string>();
  }
  return r;
}

ojson opt(const std::optional<std::string>& s) { return s ? ojson(*s) : ojson(nullptr); }

ojson sections_record(const std::string& doc_id, const char* corpus, const SectionedArticle& a) {
  ojson j;
  j["doc_id"] = doc_id;
  j["corpus"] = corpus;
  j["article_title"] = a.article_title;
  ojson secs = ojson::array();
  for (const auto& s : a.sections) {
    secs.push_back({{"section_title", s.section_title}, {"body_text", s.body_text}});
  }
  j["sections"] = std::move(secs);
  return j;
}

}  // namespace

nlohmann::ordered_json conflict_to_json(const InfoboxMilitaryConflict& c) {
  ojson j;
  j["conflict_title"] = c.conflict_title;
  j["conflict_id"] = c.conflict_id;
  ojson groups = ojson::array();
  for (const auto& g : c.combatant_groups) {
    ojson refs = ojson::array();
    for (const auto& r : g) refs.push_back(ref_to_json(r));
    groups.push_back(std::move(refs));
  }
  j["combatant_groups"] = std::move(groups);
  j["place"] = opt(c.place);
  j["date"] = opt(c.date);
  j["strength"] = opt(c.strength);
  j["casualties"] = opt(c.casualties);
  j["commanders"] = opt(c.commanders);
  j["result"] = opt(c.result);
  return j;
}

InfoboxMilitaryConflict conflict_from_json(const nlohmann::json& j) {
  InfoboxMilitaryConflict c;
  c.conflict_title = j.at("conflict_title").get<std::string>();
  c.conflict_id = j.at("conflict_id").get<std::uint64_t>();
  for (const auto& g : j.at("combatant_groups")) {
    std::vector<EntityRef> refs;
    for (const auto& r : g) refs.push_back(ref_from_json(r));
    c.combatant_groups.push_back(std::move(refs));
  }
  auto get = [&](const char* k) -> std::optional<std::string> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return j[k].get<std::string>();
  };
  c.place = get("place");
  c.date = get("date");
  c.strength = get("strength");
  c.casualties = get("casualties");
  c.commanders = get("commanders");
  c.result = get("result");
  return c;
}

IngestCounts cmd_ingest(const RunContext& ctx, const std::string& corpus_path) {
  const std::string started = utc_now();
  const auto& icfg = ctx.config.at("ingest");
  std::vector<std::string> inputs;

  Corpus corpus;
  if (fs::is_regular_file(corpus_path)) {
    std::ifstream in(corpus_path, std::ios::binary);
    read_mediawiki_xml(in, [&](RawArticle a) {
      if (a.is_redirect && a.redirect_target) {
        corpus.redirects[a.title] = *a.redirect_target;
      } else {
        corpus.articles.push_back(std::move(a));
      }
    });
    std::sort(corpus.articles.begin(), corpus.articles.end(),
              [](const RawArticle& x, const RawArticle& y) { return x.page_id < y.page_id; });
    inputs.push_back(corpus_path);
  } else {
    if (!fs::is_directory(corpus_path)) throw NotFoundError("corpus not found: " + corpus_path);
    corpus = load_corpus_dir(corpus_path);
    inputs.push_back((fs::path(corpus_path) / "index.json").string());
    for (const auto& a : corpus.articles) {
      inputs.push_back((fs::path(corpus_path) / (title_slug(a.title) + ".wiki")).string());
    }
  }

  std::optional<std::set<std::string>> candidates;
  if (!icfg.at("category_root").is_null()) {
    const std::string cat_path = (fs::path(corpus_path) / "categories.json").string();
    const auto cj = nlohmann::json::parse(read_file(cat_path));
    CategoryIndex index;
    for (const auto& [name, node] : cj.items()) {
      index[name] = {node.value("subcategories", std::vector<std::string>{}),
                     node.value("articles", std::vector<std::string>{})};
    }
    std::set<std::string> titles;
    for (const auto& t : harvest_category_tree(index, icfg.at("category_root").get<std::string>(),
                                               icfg.at("category_depth").get<int>())) {
      titles.insert(normalize_title(t));
    }
    candidates = std::move(titles);
    inputs.push_back(cat_path);
  }

  std::set<std::string> blacklist;
  for (const auto& t : icfg.at("section_blacklist")) blacklist.insert(t.get<std::string>());
  InfoboxOptions box_options;
  box_options.max_nesting = icfg.at("max_nesting").get<std::size_t>();
  const int hops = icfg.at("max_redirect_hops").get<int>();

  IngestCounts counts;
  std::string conflicts_out;
  std::string sections_out;
  std::string errors_out;
  auto record_error = [&](const std::string& article, const std::string& message) {
    ++counts.errors;
    ojson e{{"article", article}, {"error", message}};
    errors_out += e.dump() + "\n";
    log_event(ctx, "ingest_error", e);
  };
  for (const auto& msg : corpus.load_errors) record_error("", msg);

  struct EntityInfo {
    std::set<std::string> raw_texts;
    std::set<std::string> conflicts;
    std::optional<std::string> resolved;
  };
  std::map<std::string, EntityInfo> entities;
  std::map<std::string, const RawArticle*> by_title;
  for (const auto& a : corpus.articles) by_title.emplace(a.title, &a);

  for (const auto& article : corpus.articles) {
    if (candidates && !candidates->contains(article.title)) continue;
    std::optional<InfoboxMilitaryConflict> box;
    try {
      box = parse_infobox(article, box_options);
    } catch (const ParseError& e) {
      record_error(article.title, e.what());
      continue;
    }
    if (!box) continue;
    for (auto& group : box->combatant_groups) {
      for (auto& ref : group) {
        try {
          ref = resolve_redirect(ref, corpus.redirects, hops);
        } catch (const RedirectError& e) {
          record_error(article.title, e.what());
        }
        auto& info = entities[entity_id(ref)];
        info.raw_texts.insert(ref.raw_text);
        info.conflicts.insert(std::to_string(box->conflict_id));
        if (ref.resolved_title) info.resolved = ref.resolved_title;
      }
    }
    ++counts.conflicts;
    conflicts_out += conflict_to_json(*box).dump() + "\n";
    sections_out += sections_record(std::to_string(article.page_id), "CONFLICT",
                                    section_split(article, blacklist))
                        .dump() +
                    "\n";
    ++counts.sections;
  }

  std::string entities_out;
  for (const auto& [id, info] : entities) {
    const auto art = by_title.find(id);
    ojson e;
    e["entity_id"] = id;
    e["resolved_title"] = opt(info.resolved);
    e["raw_texts"] = info.raw_texts;
    e["conflict_ids"] = info.conflicts;
    e["has_article"] = art != by_title.end();
    entities_out += e.dump() + "\n";
    ++counts.entities;
    if (art != by_title.end()) {
      sections_out += sections_record(id, "ENTITY", section_split(*art->second, blacklist)).dump() + "\n";
      ++counts.sections;
    }
  }

  write_file(out_path(ctx, "conflicts.jsonl"), conflicts_out);
  write_file(out_path(ctx, "entities.jsonl"), entities_out);
  write_file(out_path(ctx, "sections.jsonl"), sections_out);
  write_file(out_path(ctx, "ingest_errors.jsonl"), errors_out);
  write_manifest(ctx, "ingest", inputs, started);
  log_event(ctx, "ingest_done", {{"conflicts", counts.conflicts},
                                 {"entities", counts.entities},
                                 {"errors", counts.errors}});
  return counts;
}

// Graph ----------------------------------------------------------------------

GraphStats cmd_build_graph(const RunContext& ctx, const std::string& conflicts_path,
                           bool skip_invalid) {
  const std::string started = utc_now();
  std::vector<LabeledPair> pairs;
  std::set<std::string> seen;
  for (const auto& j : read_jsonl(conflicts_path)) {
    const InfoboxMilitaryConflict box = conflict_from_json(j);
    const Conflict c = conflict_from_infobox(box);
    if (!seen.insert(c.conflict_id).second) {
      throw ValidationError("duplicate conflict id " + c.conflict_id);
    }
    std::vector<PairLabel> dyads;
    try {
      dyads = dyads_from_conflict(c);
    } catch (const ValidationError& e) {
      if (!skip_invalid) throw;
      log_event(ctx, "conflict_skipped", {{"conflict_id", c.conflict_id}, {"error", e.what()}});
      continue;
    }
    for (auto& d : dyads) pairs.push_back({std::move(d.u), std::move(d.v), d.label, c.conflict_id});
  }
  const DyadGraph g = aggregate(pairs);
  write_file(out_path(ctx, "graph.json"), graph_to_json(g));
  const GraphStats s = graph_stats(g);
  write_manifest(ctx, "build-graph", {conflicts_path}, started);
  log_event(ctx, "graph_built", {{"nodes", s.node_count},
                                 {"edges", s.edge_count},
                                 {"ally_fraction", s.ally_fraction}});
  return s;
}

// Features -------------------------------------------------------------------

namespace {

std::string values_json(const FeatureVector& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += format_double(v[i]);
  }
  return out + "]";
}

std::string feature_line(const std::string& doc_id, const char* corpus,
                         const std::optional<std::string>& section, const FeatureVector& v) {
  ojson head;
  head["doc_id"] = doc_id;
  head["corpus"] = corpus;
  head["section_title"] = section ? ojson(*section) : ojson(nullptr);
  std::string s = head.dump();
  s.pop_back();
  return s + ",\"values\":" + values_json(v) + "}\n";
}

}  // namespace

FeaturizeCounts cmd_featurize(const RunContext& ctx, const std::string& sections_path,
                              const std::string& annotations_path) {
  const std::string started = utc_now();
  const auto& fcfg = ctx.config.at("features");
  std::map<std::pair<std::string, std::string>, std::vector<AnnotatedToken>> annotations;
  std::vector<std::string> inputs{sections_path};
  if (!annotations_path.empty()) {
    inputs.push_back(annotations_path);
    for (const auto& j : read_jsonl(annotations_path)) {
      std::vector<AnnotatedToken> tokens;
      for (const auto& t : j.at("tokens")) {
        AnnotatedToken a;
        a.surface = t.value("surface", "");
        a.lemma = t.value("lemma", a.surface);
        a.pos = parse_pos(t.value("pos", "OTHER"));
        if (t.contains("ne_tag") && !t["ne_tag"].is_null()) {
          a.entity_tag = parse_entity_tag(t["ne_tag"].get<std::string>());
        }
        tokens.push_back(std::move(a));
      }
      annotations[{j.at("doc_id").get<std::string>(), j.value("section_title", "")}] = std::move(tokens);
    }
  }

  struct Doc {
    std::string doc_id;
    CorpusTag corpus;
    Bag article;
    std::vector<std::pair<std::string, Bag>> sections;
  };
  std::vector<Doc> docs;
  for (const auto& j : read_jsonl(sections_path)) {
    Doc d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.corpus = j.at("corpus").get<std::string>() == "ENTITY" ? CorpusTag::kEntity : CorpusTag::kConflict;
    for (const auto& s : j.at("sections")) {
      const std::string title = s.at("section_title").get<std::string>();
      const auto it = annotations.find({d.doc_id, title});
      const Bag bag = preprocess(it != annotations.end()
                                     ? it->second
                                     : annotate(plain_text(s.at("body_text").get<std::string>())));
      for (const auto& [t, c] : bag) d.article[t] += c;
      d.sections.emplace_back(title, bag);
    }
    docs.push_back(std::move(d));
  }

  VocabularyOptions vo;
  vo.min_df = fcfg.at("min_df").get<double>();
  vo.max_df = fcfg.at("max_df").get<double>();
  vo.max_terms = fcfg.at("max_terms").get<std::size_t>();
  FeaturizeCounts counts;
  std::string features_out;
  std::string bags_out;
  for (CorpusTag tag : {CorpusTag::kEntity, CorpusTag::kConflict}) {
    std::vector<Bag> bags;
    for (const auto& d : docs) {
      if (d.corpus == tag) bags.push_back(d.article);
    }
    const std::string vocab_name =
        tag == CorpusTag::kEntity ? "vocab-entity.json" : "vocab-conflict.json";
    if (bags.empty()) {
      log_event(ctx, "empty_corpus", {{"corpus", corpus_tag_name(tag)}});
      write_file(out_path(ctx, vocab_name),
                 vocabulary_to_json(Vocabulary{tag, {}, {}, 0}));
      continue;
    }
    const Vocabulary vocab = build_vocabulary(bags, tag, vo);
    (tag == CorpusTag::kEntity ? counts.entity_terms : counts.conflict_terms) = vocab.terms.size();
    write_file(out_path(ctx, vocab_name), vocabulary_to_json(vocab));
    for (const auto& d : docs) {
      if (d.corpus != tag) continue;
      features_out += feature_line(d.doc_id, corpus_tag_name(tag), std::nullopt,
                                   tfidf_vector(d.article, vocab));
      ++counts.vectors;
      for (const auto& [title, bag] : d.sections) {
        features_out += feature_line(d.doc_id, corpus_tag_name(tag), title, tfidf_vector(bag, vocab));
        ++counts.vectors;
      }
      ojson b{{"doc_id", d.doc_id}, {"corpus", corpus_tag_name(tag)}, {"bag", d.article}};
      bags_out += b.dump() + "\n";
    }
  }
  write_file(out_path(ctx, "features.jsonl"), features_out);
  write_file(out_path(ctx, "bags.jsonl"), bags_out);
  write_manifest(ctx, "featurize", inputs, started);
  log_event(ctx, "featurized", {{"entity_terms", counts.entity_terms},
                                {"conflict_terms", counts.conflict_terms},
                                {"vectors", counts.vectors}});
  return counts;
}

namespace {

struct FeatureStore {
  std::map<std::string, FeatureVector> entity_articles;
  std::map<std::string, FeatureVector> conflict_articles;
  SectionVectors entity_sections;
};

FeatureStore load_features(const std::string& path) {
  FeatureStore s;
  for (const auto& j : read_jsonl(path)) {
    const std::string id = j.at("doc_id").get<std::string>();
    const bool entity = j.at("corpus").get<std::string>() == "ENTITY";
    FeatureVector v = j.at("values").get<FeatureVector>();
    if (j.at("section_title").is_null()) {
      (entity ? s.entity_articles : s.conflict_articles)[id] = std::move(v);
    } else if (entity) {
      s.entity_sections[id][j["section_title"].get<std::string>()] = std::move(v);
    }
  }
  return s;
}

GraphFeatures assemble(const DyadGraph& g, const FeatureStore& s, bool need_nodes,
                       bool need_edges, bool zero_missing_nodes) {
  GraphFeatures f;
  if (need_nodes) {
    std::size_t dim = 0;
    for (const auto& [id, v] : s.entity_articles) dim = v.size();
    if (dim == 0) throw ValidationError("no entity feature vectors available");
    f.node = Matrix(g.node_count(), dim);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
      const auto it = s.entity_articles.find(g.nodes()[n]);
      if (it == s.entity_articles.end()) {
        if (zero_missing_nodes) continue;
        throw ValidationError("missing node features for entity " + g.nodes()[n]);
      }
      std::copy(it->second.begin(), it->second.end(), f.node.row(n).begin());
    }
  }
  if (need_edges) {
    std::size_t dim = 0;
    for (const auto& [id, v] : s.conflict_articles) dim = v.size();
    if (dim == 0) throw ValidationError("no conflict feature vectors available");
    f.edge = Matrix(g.edge_count(), dim);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      FeatureVector v;
      try {
        v = edge_embedding(g.edge(e), s.conflict_articles);
      } catch (const NotFoundError& err) {
        throw ValidationError(std::string("missing edge features: ") + err.what());
      }
      std::copy(v.begin(), v.end(), f.edge.row(e).begin());
    }
  }
  return f;
}

bool needs_nodes(Variant v) {
  return v == Variant::kD || v == Variant::kD1 || v == Variant::kS || v == Variant::kC ||
         v == Variant::kS2;
}
bool needs_edges(Variant v) {
  return v == Variant::kD || v == Variant::kS || v == Variant::kC || v == Variant::kS3;
}

}  // namespace

GraphFeatures assemble_features(const DyadGraph& g, const std::string& features_path,
                                bool need_nodes, bool need_edges) {
  return assemble(g, load_features(features_path), need_nodes, need_edges, false);
}

// Run --------------------------------------------------------------------------

namespace {

ModelConfig model_config(const nlohmann::json& m) {
  ModelConfig c;
  c.node_encoder_dims = m.at("node_encoder_dims").get<std::vector<std::size_t>>();
  c.edge_encoder_dims = m.at("edge_encoder_dims").get<std::vector<std::size_t>>();
  c.classifier_dims = m.at("classifier_dims").get<std::vector<std::size_t>>();
  c.gin_hidden_dims = m.at("gin_hidden_dims").get<std::vector<std::size_t>>();
  c.gin_steps = m.at("gin_steps").get<int>();
  c.learn_gin_eps = m.at("learn_gin_eps").get<bool>();
  c.gin_eps = m.at("gin_eps").get<double>();
  c.threshold = m.at("threshold").get<double>();
  return c;
}

SyntheticGraph synthetic_from_config(const nlohmann::json& s, std::uint64_t seed) {
  const std::string kind = s.at("kind").get<std::string>();
  if (kind == "balance") {
    BalanceOptions o;
    o.seed = s.value("seed", seed);
    o.nodes = s.value("nodes", o.nodes);
    o.majority_fraction = s.value("majority_fraction", o.majority_fraction);
    o.edge_probability = s.value("edge_probability", o.edge_probability);
    o.label_noise = s.value("label_noise", o.label_noise);
    o.node_dim = s.value("node_dim", o.node_dim);
    o.edge_dim = s.value("edge_dim", o.edge_dim);
    o.prototypes = s.value("prototypes", o.prototypes);
    return make_balance_benchmark(o);
  }
  ContentOptions o;
  o.seed = s.value("seed", seed);
  o.nodes = s.value("nodes", o.nodes);
  o.clusters = s.value("clusters", o.clusters);
  o.majority_fraction = s.value("majority_fraction", o.majority_fraction);
  o.edge_probability = s.value("edge_probability", o.edge_probability);
  o.feature_noise = s.value("feature_noise", o.feature_noise);
  o.node_dim = s.value("node_dim", o.node_dim);
  o.edge_dim = s.value("edge_dim", o.edge_dim);
  o.prototypes = s.value("prototypes", o.prototypes);
  return make_content_benchmark(o);
}

std::string matrix_jsonl(const Matrix& m, const std::vector<std::string>& ids, const char* corpus) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    FeatureVector v(m.row(r).begin(), m.row(r).end());
    out += feature_line(ids[r], corpus, std::nullopt, v);
  }
  return out;
}

ojson report_json(const TrainReport& r) {
  ojson j;
  j["variant"] = variant_name(r.variant);
  j["seed"] = r.seed;
  ojson curve = ojson::array();
  for (const auto& e : r.curve) {
    curve.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_f1", e.validation_f1}});
  }
  j["epochs"] = std::move(curve);
  j["stopped_epoch"] = r.stopped_epoch;
  j["best_epoch"] = r.best_epoch;
  j["validation_f1"] = r.validation_f1;
  j["train_f1"] = r.train_f1;
  j["test_f1"] = r.test_f1;
  j["test_ally_fraction"] = r.test_ally_fraction;
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

}  // namespace

RunSummary cmd_run(const RunContext& ctx, const std::vector<std::string>& default_variants) {
  const std::string started = utc_now();
  const auto& t = ctx.config.at("train");
  std::vector<Variant> variants;
  if (t.at("variants").is_null()) {
    for (const auto& v : default_variants) variants.push_back(parse_variant(v));
  } else {
    for (const auto& v : t.at("variants")) variants.push_back(parse_variant(v.get<std::string>()));
  }
  bool need_nodes = false;
  bool need_edges = false;
  for (Variant v : variants) {
    need_nodes = need_nodes || needs_nodes(v);
    need_edges = need_edges || needs_edges(v);
  }

  ModelConfig base = model_config(ctx.config.at("model"));
  RepeatOptions ro;
  ro.n_runs = t.at("n_runs").get<int>();
  ro.base_seed = ctx.seed;
  ro.threads = ctx.threads;
  ro.fractions = t.at("fractions").get<std::array<double, 3>>();
  ro.train.max_epochs = t.at("max_epochs").get<int>();
  ro.train.patience = t.at("patience").get<int>();
  ro.train.batch_size = t.at("batch_size").get<std::size_t>();
  ro.train.adam = {t.at("learning_rate").get<double>(), t.at("beta1").get<double>(),
                   t.at("beta2").get<double>(), t.at("adam_eps").get<double>()};
  ro.train.shuffle_exposed_labels = t.at("shuffle_exposed_labels").get<bool>();
  const std::string avg = t.at("f1_average").get<std::string>();
  ro.train.average = avg == "macro"      ? F1Average::kMacro
                     : avg == "weighted" ? F1Average::kWeighted
                                         : F1Average::kBinary;

  // Pre-flight: load everything before any training starts.
  DyadGraph graph;
  GraphFeatures features;
  std::vector<std::string> inputs;
  if (!t.at("synthetic").is_null()) {
    SyntheticGraph sg = synthetic_from_config(t.at("synthetic"), ctx.seed);
    graph = std::move(sg.graph);
    features = std::move(sg.features);
    if (t.at("synthetic").value("score_against_planted", true)) ro.train.test_gold = sg.clean_labels;
    std::vector<std::string> edge_ids;
    for (const auto& e : graph.edges()) edge_ids.push_back(e.u + "|" + e.v);
    write_file(out_path(ctx, "graph.json"), graph_to_json(graph));
    write_file(out_path(ctx, "features.jsonl"),
               matrix_jsonl(features.node, graph.nodes(), "ENTITY") +
                   matrix_jsonl(features.edge, edge_ids, "CONFLICT"));
  } else {
    const std::string gpath = resolve_in(ctx, t.at("graph").get<std::string>());
    const std::string fpath = resolve_in(ctx, t.at("features").get<std::string>());
    inputs = {gpath, fpath};
    graph = graph_from_json(read_file(gpath));
    if (need_nodes || need_edges) {
      const bool zero = ctx.config.at("features").at("missing_node_policy").get<std::string>() == "zero";
      features = assemble(graph, load_features(fpath), need_nodes, need_edges, zero);
    }
  }
  for (Variant v : variants) {
    ModelConfig c = base;
    c.variant = v;
    Model(c, features.node.cols(), features.edge.cols()).check_inputs(graph, features);
  }
  if (graph.edge_count() < 10) {
    throw ValidationError("graph has " + std::to_string(graph.edge_count()) +
                          " edges; at least 10 are needed to split");
  }

  RunSummary summary;
  std::string table = "variant,f1_mean,f1_sd\n";
  ojson metrics = ojson::object();
  for (Variant v : variants) {
    ModelConfig c = base;
    c.variant = v;
    log_event(ctx, "variant_start", {{"variant", variant_name(v)}, {"runs", ro.n_runs}});
    AggregateResult r = run_repeated(c, graph, features, ro);
    for (std::size_t i = 0; i < r.reports.size(); ++i) {
      write_file(out_path(ctx, std::string("reports/") + variant_name(v) + "-run" +
                                   std::to_string(i) + ".json"),
                 report_json(r.reports[i]).dump(1) + "\n");
      log_event(ctx, "run_done", {{"variant", variant_name(v)},
                                  {"run", i},
                                  {"test_f1", r.reports[i].test_f1},
                                  {"stopped_epoch", r.reports[i].stopped_epoch}});
    }
    ojson agg;
    agg["variant"] = variant_name(v);
    agg["f1"] = r.f1;
    agg["mean"] = r.mean;
    agg["sd"] = r.sd;
    write_file(out_path(ctx, std::string("aggregate-") + variant_name(v) + ".json"), agg.dump(1) + "\n");
    table += std::string(variant_name(v)) + "," + format_double(r.mean) + "," + format_double(r.sd) + "\n";
    metrics[variant_name(v)] = agg;
    summary.results.push_back(std::move(r));
  }

  ojson perm = ojson::object();
  const int n_resamples = t.at("n_resamples").get<int>();
  for (const auto& pair : t.at("comparisons")) {
    const Variant a = parse_variant(pair[0].get<std::string>());
    const Variant b = parse_variant(pair[1].get<std::string>());
    const auto ra = std::find_if(summary.results.begin(), summary.results.end(),
                                 [&](const AggregateResult& x) { return x.variant == a; });
    const auto rb = std::find_if(summary.results.begin(), summary.results.end(),
                                 [&](const AggregateResult& x) { return x.variant == b; });
    if (ra == summary.results.end() || rb == summary.results.end()) continue;
    std::vector<Label> pa, pb, gold;
    ojson per_run = ojson::array();
    for (std::size_t i = 0; i < ra->reports.size(); ++i) {
      const auto& split = ra->splits[i];
      std::vector<Label> g;
      for (std::size_t e : split.test) {
        g.push_back(ro.train.test_gold ? (*ro.train.test_gold)[e] : graph.edge(e).label);
      }
      per_run.push_back(permutation_test(ra->reports[i].test_predictions,
                                         rb->reports[i].test_predictions, g, n_resamples,
                                         ctx.seed + i));
      pa.insert(pa.end(), ra->reports[i].test_predictions.begin(), ra->reports[i].test_predictions.end());
      pb.insert(pb.end(), rb->reports[i].test_predictions.begin(), rb->reports[i].test_predictions.end());
      gold.insert(gold.end(), g.begin(), g.end());
    }
    const std::string key = std::string(variant_name(a)) + "_vs_" + variant_name(b);
    const double p = permutation_test(pa, pb, gold, n_resamples, ctx.seed);
    summary.p_values[key] = p;
    perm[key] = {{"p_value", p}, {"per_run", per_run}};
  }

  write_file(out_path(ctx, "table3.csv"), table);
  write_file(out_path(ctx, "permutation.json"), perm.dump(1) + "\n");
  write_file(out_path(ctx, "metrics.json"), metrics.dump(1) + "\n");
  write_manifest(ctx, "run", inputs, started);
  return summary;
}

// Analysis -------------------------------------------------------------------

void cmd_analyze(const RunContext& ctx) {
  const std::string started = utc_now();
  const auto& a = ctx.config.at("analyze");
  const std::string gpath = resolve_in(ctx, "graph.json");
  const std::string fpath = resolve_in(ctx, "features.jsonl");
  const std::string bpath = resolve_in(ctx, "bags.jsonl");
  const DyadGraph g = graph_from_json(read_file(gpath));
  const FeatureStore store = load_features(fpath);

  SectionPairOptions so;
  so.top_n = a.at("top_n").get<std::size_t>();
  so.pooled = a.at("pooled").get<bool>();
  const SectionPairResult pairs = section_pair_stats(g, store.entity_sections, so);
  std::string csv = "title_a,title_b,relation,count,mean_distance,sd_distance\n";
  ojson pj = ojson::array();
  for (const auto& s : pairs.stats) {
    csv += quote_csv(s.title_a) + "," + quote_csv(s.title_b) + "," + label_name(s.relation) + "," +
           std::to_string(s.co_occurrence_count) + "," + format_double(s.mean_distance) + "," +
           format_double(s.sd_distance) + "\n";
    pj.push_back({{"title_a", s.title_a}, {"title_b", s.title_b}, {"relation", label_name(s.relation)},
                  {"count", s.co_occurrence_count}, {"mean_distance", s.mean_distance},
                  {"sd_distance", s.sd_distance}});
  }
  write_file(out_path(ctx, "section_pairs.csv"), csv);
  write_file(out_path(ctx, "section_pairs.json"), pj.dump(1) + "\n");

  ojson tt;
  tt["ally_samples"] = pairs.ally_distances.size();
  tt["enemy_samples"] = pairs.enemy_distances.size();
  tt["skipped_zero_vectors"] = pairs.skipped_zero;
  tt["ally_mean"] = mean_of(pairs.ally_distances);
  tt["enemy_mean"] = mean_of(pairs.enemy_distances);
  tt["ally_sd"] = sample_sd(pairs.ally_distances);
  tt["enemy_sd"] = sample_sd(pairs.enemy_distances);
  if (pairs.ally_distances.size() >= 2 && pairs.enemy_distances.size() >= 2) {
    const TTestResult r = welch_t_test(pairs.ally_distances, pairs.enemy_distances);
    tt["t"] = r.t;
    tt["df"] = r.df;
    tt["p_value"] = r.p;
  } else {
    tt["t"] = nullptr;
    tt["df"] = nullptr;
    tt["p_value"] = nullptr;
  }
  write_file(out_path(ctx, "ttest.json"), tt.dump(1) + "\n");

  std::vector<std::pair<std::string, FeatureVector>> vecs;
  for (const auto& node : g.nodes()) {
    const auto it = store.entity_articles.find(node);
    if (it != store.entity_articles.end()) vecs.emplace_back(node, it->second);
  }
  std::string pca_csv = "entity,pc1,pc2\n";
  try {
    const PcaResult p = pca_top2(vecs);
    for (const auto& pt : p.points) {
      pca_csv += quote_csv(pt.entity) + "," + format_double(pt.x) + "," + format_double(pt.y) + "\n";
    }
  } catch (const ValidationError& e) {
    log_event(ctx, "pca_skipped", {{"reason", e.what()}});
  }
  write_file(out_path(ctx, "pca.csv"), pca_csv);

  std::string uni = "doc,rank,term,weight\n";
  if (fs::exists(bpath)) {
    std::map<std::string, Vocabulary> vocabs;
    for (const char* name : {"vocab-entity.json", "vocab-conflict.json"}) {
      const std::string vp = resolve_in(ctx, name);
      if (fs::exists(vp)) vocabs[name] = vocabulary_from_json(read_file(vp));
    }
    const auto k = a.at("top_unigrams_k").get<std::size_t>();
    for (const auto& j : read_jsonl(bpath)) {
      const bool entity = j.at("corpus").get<std::string>() == "ENTITY";
      const auto it = vocabs.find(entity ? "vocab-entity.json" : "vocab-conflict.json");
      if (it == vocabs.end() || it->second.terms.empty()) continue;
      const Bag bag = j.at("bag").get<Bag>();
      const auto top = top_unigrams(bag, it->second, k);
      for (std::size_t r = 0; r < top.size(); ++r) {
        uni += quote_csv(j.at("doc_id").get<std::string>()) + "," + std::to_string(r + 1) + "," +
               quote_csv(top[r].first) + "," + format_double(top[r].second) + "\n";
      }
    }
  }
  write_file(out_path(ctx, "top_unigrams.csv"), uni);
  write_manifest(ctx, "analyze", {gpath, fpath, bpath}, started);
  log_event(ctx, "analyzed", {{"section_pairs", pairs.stats.size()}, {"samples", pairs.samples}});
}

void cmd_export(const RunContext& ctx) {
  const std::string started = utc_now();
  const std::string path = resolve_in(ctx, "section_pairs.json");
  std::vector<SectionPairStat> stats;
  for (const auto& j : nlohmann::json::parse(read_file(path))) {
    SectionPairStat s;
    s.title_a = j.at("title_a").get<std::string>();
    s.title_b = j.at("title_b").get<std::string>();
    s.relation = parse_label(j.at("relation").get<std::string>());
    s.co_occurrence_count = j.at("count").get<std::size_t>();
    s.mean_distance = j.at("mean_distance").get<double>();
    s.sd_distance = j.at("sd_distance").get<double>();
    stats.push_back(std::move(s));
  }
  const auto k = ctx.config.at("analyze").at("k").get<std::size_t>();
  std::string csv = "relation,rank,title_a,title_b,count,mean_distance,sd_distance\n";
  std::map<Label, std::size_t> rank;
  for (const auto& s : export_plot_data(stats, k)) {
    csv += std::string(label_name(s.relation)) + "," + std::to_string(++rank[s.relation]) + "," +
           quote_csv(s.title_a) + "," + quote_csv(s.title_b) + "," +
           std::to_string(s.co_occurrence_count) + "," + format_double(s.mean_distance) + "," +
           format_double(s.sd_distance) + "\n";
  }
  write_file(out_path(ctx, "plot_section_pairs.csv"), csv);
  write_manifest(ctx, "export", {path}, started);
}

}  // namespace dyad
