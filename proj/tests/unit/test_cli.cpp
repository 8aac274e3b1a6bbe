#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dyad/pipeline.hpp"
#include "dyad/wikitext.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCorpus = std::string(DYAD_FIXTURES) + "/corpus";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dyadctl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs dyadctl with `args`; stdout and stderr land in `logs`.
int dyadctl(const std::string& args, const fs::path& logs) {
  const std::string cmd = std::string(DYADCTL_PATH) + " " + args + " > " + (logs / "stdout.txt").string() +
                          " 2> " + (logs / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// ingest + build-graph into `dir/out`.
void build_fixture(const fs::path& dir) {
  const fs::path out = dir / "out";
  REQUIRE(dyadctl("--out-dir " + q(out) + " ingest " + q(kCorpus), dir) == 0);
  REQUIRE(dyadctl("--out-dir " + q(out) + " build-graph " + q(out / "conflicts.jsonl"), dir) == 0);
}

}  // namespace

TEST_CASE("ingest the fixture corpus") {
  const fs::path dir = scratch("ingest");
  const fs::path out = dir / "out";
  REQUIRE(dyadctl("--out-dir " + q(out) + " ingest " + q(kCorpus), dir) == 0);
  const std::string printed = slurp(dir / "stdout.txt");
  CHECK(printed.find("conflicts 12\n") != std::string::npos);

  std::size_t lines = 0;
  std::istringstream conflicts(slurp(out / "conflicts.jsonl"));
  for (std::string line; std::getline(conflicts, line);) lines += !line.empty();
  CHECK(lines == 12);

  const std::string errors = slurp(out / "ingest_errors.jsonl");
  CHECK(errors.find("Battle of Nowhere") != std::string::npos);
  CHECK(errors.find("Battle of Missing") != std::string::npos);

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest-ingest.json"));
  for (const char* key : {"tool_version", "command", "config_sha256", "input_sha256", "seeds",
                          "started_at", "finished_at", "threads"}) {
    CHECK(manifest.contains(key));
  }
  CHECK(manifest["command"] == "ingest");

  // Events on stderr are one JSON object per line.
  std::istringstream events(slurp(dir / "stderr.txt"));
  for (std::string line; std::getline(events, line);) {
    CHECK(nlohmann::json::parse(line).contains("event"));
  }
}

TEST_CASE("ingest error exits") {
  const fs::path dir = scratch("ingest_errors");
  fs::create_directories(dir / "no_index");
  CHECK(dyadctl("--out-dir " + q(dir / "a") + " ingest " + q(dir / "no_index"), dir) == 2);
  CHECK(slurp(dir / "stderr.txt").find("index") != std::string::npos);

  fs::create_directories(dir / "empty");
  std::ofstream(dir / "empty" / "index.json") << "[]";
  CHECK(dyadctl("--out-dir " + q(dir / "b") + " ingest " + q(dir / "empty"), dir) == 0);
  CHECK(slurp(dir / "stdout.txt").find("conflicts 0\n") != std::string::npos);
  CHECK(fs::exists(dir / "b" / "conflicts.jsonl"));
  CHECK(fs::file_size(dir / "b" / "conflicts.jsonl") == 0);
}

TEST_CASE("build-graph on the fixture") {
  const fs::path dir = scratch("graph");
  build_fixture(dir);
  const std::string printed = slurp(dir / "stdout.txt");
  CHECK(printed.find("nodes 14\n") != std::string::npos);
  CHECK(printed.find("edges 38\n") != std::string::npos);
  const auto g = dyad::graph_from_json(slurp(dir / "out" / "graph.json"));
  std::size_t allies = 0;
  for (const auto& e : g.edges()) allies += e.label == dyad::Label::kAllies;
  CHECK(allies == 14);
}

TEST_CASE("build-graph on one conflict and on duplicates") {
  const fs::path dir = scratch("graph_one");
  build_fixture(dir);
  std::string first;
  {
    std::istringstream in(slurp(dir / "out" / "conflicts.jsonl"));
    std::getline(in, first);
  }
  std::set<std::string> ids;
  for (const auto& group : dyad::conflict_from_json(nlohmann::json::parse(first)).combatant_groups) {
    for (const auto& ref : group) ids.insert(dyad::entity_id(ref));
  }
  std::ofstream(dir / "one.jsonl") << first << "\n";
  REQUIRE(dyadctl("--out-dir " + q(dir / "one") + " build-graph " + q(dir / "one.jsonl"), dir) == 0);
  const auto g = dyad::graph_from_json(slurp(dir / "one" / "graph.json"));
  CHECK(g.node_count() == ids.size());
  CHECK(g.edge_count() == ids.size() * (ids.size() - 1) / 2);

  std::ofstream(dir / "dup.jsonl") << first << "\n" << first << "\n";
  CHECK(dyadctl("--out-dir " + q(dir / "dup") + " build-graph " + q(dir / "dup.jsonl"), dir) == 3);
}

TEST_CASE("unknown variant fails before writing anything") {
  const fs::path dir = scratch("bad_variant");
  std::ofstream(dir / "cfg.json") << R"({"train": {"variants": ["D", "Q7"]}})";
  CHECK(dyadctl("--config " + q(dir / "cfg.json") + " --out-dir " + q(dir / "out") + " run", dir) == 2);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(slurp(dir / "stderr.txt").find("Q7") != std::string::npos);
}

TEST_CASE("MAJ run on the fixture follows the closed form") {
  const fs::path dir = scratch("maj");
  build_fixture(dir);
  std::ofstream(dir / "cfg.json") << R"({"train": {"variants": ["MAJ"], "n_runs": 3}})";
  REQUIRE(dyadctl("--config " + q(dir / "cfg.json") + " --out-dir " + q(dir / "out") + " run", dir) == 0);
  for (int i = 0; i < 3; ++i) {
    const auto r = nlohmann::json::parse(slurp(dir / "out" / "reports" / ("MAJ-run" + std::to_string(i) + ".json")));
    const double p = r["test_ally_fraction"].get<double>();
    CHECK(std::abs(r["test_f1"].get<double>() - 2 * p / (1 + p)) < 1e-12);
  }
  CHECK(slurp(dir / "out" / "table3.csv").rfind("variant,f1_mean,f1_sd\nMAJ,", 0) == 0);
  CHECK(fs::exists(dir / "out" / "manifest-run.json"));
}

TEST_CASE("missing features fail the pre-flight") {
  const fs::path dir = scratch("preflight");
  build_fixture(dir);
  std::ofstream(dir / "out" / "features.jsonl")
      << R"({"doc_id":"Mali","corpus":"ENTITY","section_title":null,"values":[1,0]})" << "\n";
  std::ofstream(dir / "cfg.json") << R"({"train": {"variants": ["MAJ", "D"], "n_runs": 2}})";
  CHECK(dyadctl("--config " + q(dir / "cfg.json") + " --out-dir " + q(dir / "out") + " run", dir) == 3);
  CHECK_FALSE(fs::exists(dir / "out" / "reports"));
  CHECK_FALSE(fs::exists(dir / "out" / "table3.csv"));
}

TEST_CASE("usage errors exit 2") {
  const fs::path dir = scratch("usage");
  std::ofstream(dir / "cfg.json") << R"({"train": {"no_such_key": 1}})";
  CHECK(dyadctl("--config " + q(dir / "cfg.json") + " --out-dir " + q(dir / "out") + " run", dir) == 2);
  CHECK(dyadctl("--out-dir " + q(dir / "out") + " build-graph " + q(dir / "missing.jsonl"), dir) == 2);
}
