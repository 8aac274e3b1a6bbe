#include "dyad/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "dyad/errors.hpp"
#include "dyad/rng.hpp"

namespace dyad {

namespace {

std::string node_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%04zu", i);
  return buf;
}

Matrix prototype_pool(std::size_t count, std::size_t dim, Rng& rng) {
  Matrix pool(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    double norm = 0.0;
    for (double& x : pool.row(r)) {
      x = rng.uniform();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : pool.row(r)) x /= norm;
  }
  return pool;
}

// Unit vectors in random directions (sign-symmetric, unlike prototype_pool).
Matrix direction_pool(std::size_t count, std::size_t dim, Rng& rng) {
  Matrix pool(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    double norm = 0.0;
    for (double& x : pool.row(r)) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : pool.row(r)) x /= norm;
  }
  return pool;
}

Matrix draw_rows(std::size_t n, const Matrix& pool, Rng& rng) {
  Matrix out(n, pool.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = pool.row(rng.below(pool.rows()));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

struct Built {
  DyadGraph graph;
  std::vector<Label> clean;
};

// Edges are (i, j, observed, clean); node names sort in index order, so
// graph edge order equals the (i, j) generation order.
Built build(std::size_t nodes, const std::vector<std::tuple<std::size_t, std::size_t, Label, Label>>& es) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < nodes; ++i) names.push_back(node_name(i));
  std::vector<Dyad> dyads;
  std::vector<Label> clean;
  for (std::size_t k = 0; k < es.size(); ++k) {
    const auto& [i, j, observed, planted] = es[k];
    Dyad d;
    d.u = names[i];
    d.v = names[j];
    d.label = observed;
    d.conflict_ids = {"c" + std::to_string(k)};
    (observed == Label::kAllies ? d.ally_count : d.enemy_count) = 1;
    dyads.push_back(std::move(d));
    clean.push_back(planted);
  }
  return {DyadGraph(std::move(names), std::move(dyads)), std::move(clean)};
}

}  // namespace

SyntheticGraph make_balance_benchmark(const BalanceOptions& o) {
  if (o.nodes < 4) throw ConfigError("balance benchmark needs at least 4 nodes");
  Rng rng(mix_seed(o.seed, 0xba1));
  std::vector<std::size_t> order(o.nodes);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  const auto majority = static_cast<std::size_t>(std::llround(o.majority_fraction * static_cast<double>(o.nodes)));
  std::vector<int> faction(o.nodes, 1);
  for (std::size_t k = 0; k < majority; ++k) faction[order[k]] = 0;

  std::vector<std::tuple<std::size_t, std::size_t, Label, Label>> es;
  for (std::size_t i = 0; i < o.nodes; ++i) {
    for (std::size_t j = i + 1; j < o.nodes; ++j) {
      if (!rng.bernoulli(o.edge_probability)) continue;
      const Label planted = faction[i] == faction[j] ? Label::kAllies : Label::kEnemies;
      Label observed = planted;
      if (rng.bernoulli(o.label_noise)) {
        observed = planted == Label::kAllies ? Label::kEnemies : Label::kAllies;
      }
      es.emplace_back(i, j, observed, planted);
    }
  }
  Built b = build(o.nodes, es);
  SyntheticGraph out{std::move(b.graph), {}, std::move(b.clean), faction};
  const Matrix node_pool = prototype_pool(o.prototypes, o.node_dim, rng);
  const Matrix edge_pool = prototype_pool(o.prototypes, o.edge_dim, rng);
  out.features.node = draw_rows(o.nodes, node_pool, rng);
  out.features.edge = draw_rows(out.graph.edge_count(), edge_pool, rng);
  return out;
}

SyntheticGraph make_content_benchmark(const ContentOptions& o) {
  if (o.clusters < 2) throw ConfigError("content benchmark needs at least 2 clusters");
  Rng rng(mix_seed(o.seed, 0xc0e));
  if (o.majority_fraction <= 0.0 || o.majority_fraction >= 1.0) {
    throw ConfigError("majority_fraction must lie in (0, 1)");
  }
  const auto first = static_cast<std::size_t>(std::llround(o.majority_fraction * static_cast<double>(o.nodes)));
  std::vector<int> cluster(o.nodes, 0);
  for (std::size_t i = first; i < o.nodes; ++i) {
    cluster[i] = 1 + static_cast<int>((i - first) % (o.clusters - 1));
  }
  rng.shuffle(std::span<int>(cluster));

  std::vector<std::tuple<std::size_t, std::size_t, Label, Label>> es;
  for (std::size_t i = 0; i < o.nodes; ++i) {
    for (std::size_t j = i + 1; j < o.nodes; ++j) {
      if (!rng.bernoulli(o.edge_probability)) continue;
      const Label l = cluster[i] == cluster[j] ? Label::kAllies : Label::kEnemies;
      es.emplace_back(i, j, l, l);
    }
  }
  Built b = build(o.nodes, es);
  SyntheticGraph out{std::move(b.graph), {}, std::move(b.clean), cluster};
  const Matrix centres = direction_pool(o.clusters, o.node_dim, rng);
  out.features.node = Matrix(o.nodes, o.node_dim);
  for (std::size_t i = 0; i < o.nodes; ++i) {
    const auto c = centres.row(static_cast<std::size_t>(cluster[i]));
    auto row = out.features.node.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = c[k] + o.feature_noise * rng.normal();
  }
  const Matrix edge_pool = prototype_pool(o.prototypes, o.edge_dim, rng);
  out.features.edge = draw_rows(out.graph.edge_count(), edge_pool, rng);
  return out;
}

SyntheticGraph make_random_instance(std::size_t nodes, std::size_t edges, std::size_t node_dim,
                                    std::size_t edge_dim, std::uint64_t seed) {
  const std::size_t max_edges = nodes * (nodes - 1) / 2;
  if (edges > max_edges) throw ConfigError("too many edges for the node count");
  Rng rng(mix_seed(seed, 0x7a1));
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  // A random spanning path first keeps most instances connected.
  std::vector<std::size_t> order(nodes);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t k = 1; k < nodes && chosen.size() < edges; ++k) {
    chosen.emplace(std::min(order[k - 1], order[k]), std::max(order[k - 1], order[k]));
  }
  while (chosen.size() < edges) {
    const std::size_t a = rng.below(nodes);
    const std::size_t b = rng.below(nodes);
    if (a != b) chosen.emplace(std::min(a, b), std::max(a, b));
  }
  std::vector<std::tuple<std::size_t, std::size_t, Label, Label>> es;
  for (const auto& [a, b] : chosen) {
    const Label l = rng.bernoulli(0.5) ? Label::kAllies : Label::kEnemies;
    es.emplace_back(a, b, l, l);
  }
  Built built = build(nodes, es);
  SyntheticGraph out{std::move(built.graph), {}, std::move(built.clean), std::vector<int>(nodes, 0)};
  out.features.node = Matrix(nodes, node_dim);
  for (double& x : out.features.node.data()) x = rng.uniform(-1.0, 1.0);
  out.features.edge = Matrix(out.graph.edge_count(), edge_dim);
  for (double& x : out.features.edge.data()) x = rng.uniform(-1.0, 1.0);
  return out;
}

}  // namespace dyad
