#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyad/graph.hpp"
#include "dyad/models.hpp"

namespace dyad {

struct SplitSpec {
  std::vector<std::size_t> train;  // sorted edge indices
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::array<double, 3> fractions{0.6, 0.3, 0.1};
  std::uint64_t seed = 0;

  bool operator==(const SplitSpec&) const = default;
};

// Part sizes by largest remainder; equal remainders favour train, then
// validation, then test.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions);

// Seeded shuffle, then contiguous partition. ValidationError below 10 edges.
SplitSpec split_edges(const DyadGraph& g, const std::array<double, 3>& fractions,
                      std::uint64_t seed);

std::string split_to_json(const SplitSpec& s);
SplitSpec split_from_json(const std::string& text);

enum class F1Average { kBinary, kMacro, kWeighted };

// Binary F1 of the ALLIES class by default; 0 when precision + recall = 0.
double f1_score(std::span<const Label> predictions, std::span<const Label> gold,
                F1Average average = F1Average::kBinary);

// Patience rule on a monitored score: only strict improvements reset it.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true when `score` is a new best.
  bool update(double score, int epoch);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_; }

 private:
  int patience_;
  int bad_epochs_ = 0;
  int best_epoch_ = 0;
  double best_ = -1.0;
};

struct TrainOptions {
  int max_epochs = 30;
  int patience = 3;
  std::size_t batch_size = 512;
  AdamOptions adam;
  // Randomly permutes the exposed training labels among training edges
  // before message passing (loss still uses the true labels).
  bool shuffle_exposed_labels = false;
  // Gold labels for the test F1 when they differ from the graph's labels.
  std::optional<std::vector<Label>> test_gold;
  F1Average average = F1Average::kBinary;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_f1 = 0.0;
};

struct TrainReport {
  Variant variant = Variant::kD;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> curve;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double validation_f1 = 0.0;
  double train_f1 = 0.0;  // restored parameters, on the training edges
  double test_f1 = 0.0;
  double test_ally_fraction = 0.0;
  double wall_time_s = 0.0;
  std::vector<Label> test_predictions;
};

Label to_label(double probability, double threshold);

TrainReport train(const ModelConfig& config, const DyadGraph& g, const GraphFeatures& f,
                  const SplitSpec& split, const TrainOptions& options = {});

struct AggregateResult {
  Variant variant = Variant::kD;
  std::vector<double> f1;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  std::vector<TrainReport> reports;
  std::vector<SplitSpec> splits;
};

double mean_of(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

struct RepeatOptions {
  int n_runs = 10;
  std::uint64_t base_seed = 0;
  std::array<double, 3> fractions{0.6, 0.3, 0.1};
  TrainOptions train;
  int threads = 1;
};

// Run i uses seed base_seed + i for both the split and the initialisation.
AggregateResult run_repeated(const ModelConfig& config, const DyadGraph& g, const GraphFeatures& f,
                             const RepeatOptions& options);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Paired approximate randomisation on |F1(a) - F1(b)|. When 2^m does not
// exceed n_resamples the swap patterns are enumerated exactly instead.
double permutation_test(std::span<const Label> preds_a, std::span<const Label> preds_b,
                        std::span<const Label> gold, int n_resamples, std::uint64_t seed);

struct GridPoint {
  std::size_t node_dim = 64;
  std::size_t edge_dim = 64;
  std::size_t classifier_dim = 64;

  auto operator<=>(const GridPoint&) const = default;
};

std::vector<GridPoint> default_grid();
ModelConfig apply_grid_point(const ModelConfig& base, const GridPoint& p);

struct GridEntry {
  GridPoint point;
  double mean_validation_f1 = 0.0;
  std::size_t parameter_count = 0;
};

struct GridResult {
  GridPoint best;
  ModelConfig best_config;
  std::vector<GridEntry> evaluated;
  std::vector<GridPoint> skipped;  // node and edge widths disagree
};

// Three seeded runs per point; highest mean validation F1 wins, then fewer
// parameters, then the smaller point in (node, edge, classifier) order.
GridResult grid_search(const std::vector<GridPoint>& grid, const ModelConfig& base,
                       const DyadGraph& g, const GraphFeatures& f, const RepeatOptions& options);

}  // namespace dyad
