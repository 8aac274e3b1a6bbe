#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "dyad/errors.hpp"
#include "dyad/pipeline.hpp"

namespace {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const dyad::ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const dyad::NotFoundError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const dyad::NumericalError*>(&e) != nullptr) return 4;
  if (dynamic_cast<const dyad::Error*>(&e) != nullptr) return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signed dyad graph extraction and edge classification"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "Output directory");

  std::string corpus;
  auto* ingest = app.add_subcommand("ingest", "Extract conflicts, entities and sections");
  ingest->add_option("corpus", corpus, "Corpus directory or MediaWiki XML export")->required();

  std::string conflicts;
  bool skip_invalid = false;
  auto* build = app.add_subcommand("build-graph", "Aggregate dyads into graph.json");
  build->add_option("conflicts", conflicts, "conflicts.jsonl")->required();
  build->add_flag("--skip-invalid", skip_invalid, "Skip conflicts with overlapping belligerents");

  std::string sections;
  std::string annotations;
  auto* featurize = app.add_subcommand("featurize", "Build vocabularies and tf-idf vectors");
  featurize->add_option("sections", sections, "sections.jsonl")->required();
  featurize->add_option("--annotations", annotations, "Token annotations JSONL");

  auto* run = app.add_subcommand("run", "Train and evaluate classifier variants");
  auto* ablate = app.add_subcommand("ablate", "Run the feature ablation variants");
  auto* analyze = app.add_subcommand("analyze", "Section-pair distances, t-test, PCA, unigrams");
  auto* exp = app.add_subcommand("export", "Plot-ready section-pair data");

  CLI11_PARSE(app, argc, argv);

  dyad::EventLog log(&std::cerr);
  try {
    dyad::RunContext ctx;
    ctx.config = dyad::load_config(config_path);
    ctx.config_path = config_path;
    ctx.seed = seed;
    ctx.threads = threads;
    ctx.out_dir = out_dir;
    ctx.log = &log;
    std::filesystem::create_directories(out_dir);

    if (ingest->parsed()) {
      const auto c = dyad::cmd_ingest(ctx, corpus);
      std::cout << "conflicts " << c.conflicts << "\nentities " << c.entities << "\nerrors "
                << c.errors << "\n";
    } else if (build->parsed()) {
      const auto s = dyad::cmd_build_graph(ctx, conflicts, skip_invalid);
      std::cout << "nodes " << s.node_count << "\nedges " << s.edge_count << "\nally_fraction "
                << dyad::format_double(s.ally_fraction) << "\n";
    } else if (featurize->parsed()) {
      const auto c = dyad::cmd_featurize(ctx, sections, annotations);
      std::cout << "entity_terms " << c.entity_terms << "\nconflict_terms " << c.conflict_terms
                << "\nvectors " << c.vectors << "\n";
    } else if (run->parsed() || ablate->parsed()) {
      const std::vector<std::string> defaults =
          run->parsed() ? std::vector<std::string>{"D", "S", "C", "MAJ", "D1", "S2", "S3", "S4"}
                        : std::vector<std::string>{"D1", "S2", "S3", "S4"};
      const auto summary = dyad::cmd_run(ctx, defaults);
      for (const auto& r : summary.results) {
        std::cout << dyad::variant_name(r.variant) << " " << dyad::format_double(r.mean) << " "
                  << dyad::format_double(r.sd) << "\n";
      }
      for (const auto& [k, p] : summary.p_values) {
        std::cout << k << " p=" << dyad::format_double(p) << "\n";
      }
    } else if (analyze->parsed()) {
      dyad::cmd_analyze(ctx);
    } else if (exp->parsed()) {
      dyad::cmd_export(ctx);
    }
  } catch (const std::exception& e) {
    log.emit("error", {{"message", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
