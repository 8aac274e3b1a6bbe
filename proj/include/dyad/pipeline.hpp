#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyad/experiments.hpp"
#include "dyad/featurizer.hpp"
#include "dyad/graph.hpp"
#include "dyad/wikitext.hpp"

namespace dyad {

inline constexpr const char* kToolVersion = "0.3.0";

// Line-delimited JSON events.
class EventLog {
 public:
  explicit EventLog(std::ostream* out) : out_(out) {}
  void emit(const std::string& event, nlohmann::ordered_json fields = nlohmann::ordered_json::object());

 private:
  std::ostream* out_;
};

struct RunContext {
  std::string out_dir = ".";
  std::string config_path;  // may be empty
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  int threads = 1;
  EventLog* log = nullptr;
};

// Loads and validates a config file (ConfigError on unknown keys or
// variants). An empty path yields the defaults.
nlohmann::json load_config(const std::string& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// Writes manifest-<command>.json into the output directory.
void write_manifest(const RunContext& ctx, const std::string& command,
                    const std::vector<std::string>& inputs, const std::string& started_at);
std::string utc_now();

struct IngestCounts {
  std::size_t conflicts = 0;
  std::size_t entities = 0;
  std::size_t sections = 0;
  std::size_t errors = 0;
};

// conflicts.jsonl, entities.jsonl, sections.jsonl, ingest_errors.jsonl.
IngestCounts cmd_ingest(const RunContext& ctx, const std::string& corpus_dir);

nlohmann::ordered_json conflict_to_json(const InfoboxMilitaryConflict& c);
InfoboxMilitaryConflict conflict_from_json(const nlohmann::json& j);

// graph.json from conflicts.jsonl; ValidationError on duplicate conflict
// ids or overlapping belligerents unless skip_invalid.
GraphStats cmd_build_graph(const RunContext& ctx, const std::string& conflicts_path,
                           bool skip_invalid = false);

struct FeaturizeCounts {
  std::size_t entity_terms = 0;
  std::size_t conflict_terms = 0;
  std::size_t vectors = 0;
};

// vocab-entity.json, vocab-conflict.json, features.jsonl, bags.jsonl.
FeaturizeCounts cmd_featurize(const RunContext& ctx, const std::string& sections_path,
                              const std::string& annotations_path);

// Node rows from entity article vectors, edge rows from averaged conflict
// vectors. Missing vectors are a ValidationError naming the first id.
GraphFeatures assemble_features(const DyadGraph& g, const std::string& features_path,
                                bool need_nodes, bool need_edges);

struct RunSummary {
  std::vector<AggregateResult> results;
  std::map<std::string, double> p_values;  // "S_vs_D" -> p
};

// Trains the configured variants; writes report/aggregate JSON, table3.csv,
// permutation.json and metrics.json.
RunSummary cmd_run(const RunContext& ctx, const std::vector<std::string>& default_variants);

// section_pairs.csv, ttest.json, pca.csv, top_unigrams.csv.
void cmd_analyze(const RunContext& ctx);

// plot_section_pairs.csv (k lowest-distance pairs per relation).
void cmd_export(const RunContext& ctx);

}  // namespace dyad
