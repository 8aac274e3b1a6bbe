#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dyad/wikitext.hpp"

namespace dyad {

enum class Label : int { kEnemies = 0, kAllies = 1 };

const char* label_name(Label label);
Label parse_label(const std::string& name);

struct Conflict {
  std::string conflict_id;
  std::vector<std::set<std::string>> belligerents;
};

// Entity ids of every combatant group, after redirect resolution.
Conflict conflict_from_infobox(const InfoboxMilitaryConflict& box);

struct PairLabel {
  std::string u;  // u < v
  std::string v;
  Label label;

  bool operator==(const PairLabel&) const = default;
};

// All unordered entity pairs of one conflict. Throws ValidationError when
// two belligerent sets share an entity or a set is empty.
std::vector<PairLabel> dyads_from_conflict(const Conflict& c);

struct LabeledPair {
  std::string u;
  std::string v;
  Label label;
  std::string conflict_id;
};

struct Dyad {
  std::string u;
  std::string v;
  Label label = Label::kEnemies;
  std::vector<std::string> conflict_ids;
  int ally_count = 0;
  int enemy_count = 0;

  bool operator==(const Dyad&) const = default;
};

struct Incidence {
  std::size_t neighbor;
  std::size_t edge;
};

// Immutable dyad graph. Nodes are sorted by id, edges by (u, v).
class DyadGraph {
 public:
  DyadGraph() = default;
  // Validates the invariants and sorts; nodes not listed but used by an edge
  // are an error.
  DyadGraph(std::vector<std::string> nodes, std::vector<Dyad> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Dyad>& edges() const { return edges_; }
  const Dyad& edge(std::size_t e) const { return edges_[e]; }
  std::pair<std::size_t, std::size_t> endpoints(std::size_t e) const { return ends_[e]; }
  std::span<const Incidence> incident(std::size_t node) const { return adjacency_[node]; }

  // NotFoundError when absent.
  std::size_t node_index(const std::string& id) const;
  std::size_t edge_index(const std::string& a, const std::string& b) const;
  bool has_edge(const std::string& a, const std::string& b) const;

  // Copy with one edge label replaced; the tallies are swapped to match.
  DyadGraph with_label(std::size_t e, Label label) const;

  bool operator==(const DyadGraph& o) const { return nodes_ == o.nodes_ && edges_ == o.edges_; }

 private:
  std::vector<std::string> nodes_;
  std::vector<Dyad> edges_;
  std::map<std::string, std::size_t> node_lookup_;
  std::vector<std::pair<std::size_t, std::size_t>> ends_;
  std::vector<std::vector<Incidence>> adjacency_;
};

// Majority aggregation: ALLIES iff ally_count > enemy_count. A repeated
// (pair, conflict) entry counts once; contradicting labels for the same
// pair and conflict are a ValidationError.
DyadGraph aggregate(const std::vector<LabeledPair>& all_pairs);

// Graph minus one edge, with the endpoints' features masked. With
// mask_endpoints=false the endpoints keep their features (combined model).
class RestrictedView {
 public:
  RestrictedView(const DyadGraph& base, std::size_t excluded_edge, bool mask_endpoints = true);

  const DyadGraph& base() const { return *base_; }
  std::size_t excluded_edge() const { return excluded_; }
  std::pair<std::size_t, std::size_t> target() const { return base_->endpoints(excluded_); }
  bool edge_visible(std::size_t e) const { return e != excluded_; }
  bool node_masked(std::size_t node) const;

  // LeakError for the excluded edge.
  Label label(std::size_t e) const;
  const Dyad& edge(std::size_t e) const;
  // Row of `features` for `node`; LeakError for masked nodes.
  std::span<const double> node_feature(std::size_t node, std::span<const double> features,
                                       std::size_t dim) const;

  template <class F>
  void for_each_neighbor(std::size_t node, F&& f) const {
    for (const Incidence& inc : base_->incident(node)) {
      if (inc.edge != excluded_) f(inc.neighbor, inc.edge);
    }
  }

  std::size_t visible_edge_count() const { return base_->edge_count() - 1; }
  std::size_t feature_visible_node_count() const;

 private:
  const DyadGraph* base_;
  std::size_t excluded_;
  bool mask_endpoints_;
};

// NotFoundError when (a, b) is not an edge.
RestrictedView restricted_view(const DyadGraph& g, const std::string& a, const std::string& b);

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  double ally_fraction = 0.0;
  std::map<std::size_t, std::size_t> degree_histogram;  // degree -> nodes
};

GraphStats graph_stats(const DyadGraph& g);

std::string graph_to_json(const DyadGraph& g);
DyadGraph graph_from_json(const std::string& text);

}  // namespace dyad
