#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dyad/graph.hpp"
#include "dyad/models.hpp"

namespace dyad {

struct SyntheticGraph {
  DyadGraph graph;  // labels as observed (noisy for the balance benchmark)
  GraphFeatures features;
  std::vector<Label> clean_labels;  // planted labels, per edge
  std::vector<int> group;           // planted faction or cluster, per node
};

struct BalanceOptions {
  std::size_t nodes = 200;
  double majority_fraction = 0.7;
  double edge_probability = 0.15;
  double label_noise = 0.05;
  std::size_t node_dim = 16;
  std::size_t edge_dim = 16;
  // Features are drawn from a small pool, independently of the faction.
  std::size_t prototypes = 8;
  std::uint64_t seed = 1;
};

// Two planted factions: ALLIES inside a faction, ENEMIES across, each label
// flipped with probability label_noise.
SyntheticGraph make_balance_benchmark(const BalanceOptions& options);

struct ContentOptions {
  std::size_t nodes = 200;
  std::size_t clusters = 2;
  // Share of nodes in the first cluster; the rest split evenly.
  double majority_fraction = 0.7;
  double edge_probability = 0.15;
  double feature_noise = 0.1;
  std::size_t node_dim = 16;
  std::size_t edge_dim = 16;
  std::size_t prototypes = 8;
  std::uint64_t seed = 1;
};

// Node features are a noisy cluster prototype; ALLIES iff same cluster.
SyntheticGraph make_content_benchmark(const ContentOptions& options);

// Random connected-ish graph with uniform random labels and features.
SyntheticGraph make_random_instance(std::size_t nodes, std::size_t edges, std::size_t node_dim,
                                    std::size_t edge_dim, std::uint64_t seed);

}  // namespace dyad
