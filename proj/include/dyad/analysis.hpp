#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dyad/featurizer.hpp"
#include "dyad/graph.hpp"

namespace dyad {

// 1 - cos(a, b); nothing when either vector is all zero.
std::optional<double> cosine_distance(const FeatureVector& a, const FeatureVector& b);

struct SectionPairStat {
  std::string title_a;  // title_a <= title_b
  std::string title_b;
  Label relation = Label::kAllies;
  std::size_t co_occurrence_count = 0;
  double mean_distance = 0.0;
  double sd_distance = 0.0;  // sample sd; 0 with one sample
};

// entity id -> section title -> vector
using SectionVectors = std::map<std::string, std::map<std::string, FeatureVector>>;

struct SectionPairOptions {
  std::size_t top_n = 1000;
  // Rank all pairs together instead of per relation.
  bool pooled = false;
};

struct SectionPairResult {
  std::vector<SectionPairStat> stats;
  std::size_t skipped_zero = 0;  // samples with a zero vector
  std::size_t samples = 0;
  std::vector<double> ally_distances;
  std::vector<double> enemy_distances;
};

SectionPairResult section_pair_stats(const DyadGraph& g, const SectionVectors& sections,
                                     const SectionPairOptions& options = {});

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test. ValidationError with fewer than two
// samples per group.
TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct Projection2D {
  std::string entity;
  double x = 0.0;
  double y = 0.0;
};

struct PcaResult {
  std::vector<Projection2D> points;
  std::pair<double, double> explained_variance;  // top two covariance eigenvalues
  std::vector<double> component1;
  std::vector<double> component2;
};

// Mean-centred PCA onto two components; the largest-magnitude loading of
// each component is positive. ValidationError below 3 vectors or rank 2.
PcaResult pca_top2(const std::vector<std::pair<std::string, FeatureVector>>& vectors);

// k lowest-mean-distance pairs per relation, ties by (title_a, title_b).
std::vector<SectionPairStat> export_plot_data(const std::vector<SectionPairStat>& stats,
                                              std::size_t k = 250);

}  // namespace dyad
