#include "dyad/graph.hpp"

#include <algorithm>

#include <json.hpp>

#include "dyad/errors.hpp"

namespace dyad {

const char* label_name(Label label) { return label == Label::kAllies ? "ALLIES" : "ENEMIES"; }

Label parse_label(const std::string& name) {
  if (name == "ALLIES") return Label::kAllies;
  if (name == "ENEMIES") return Label::kEnemies;
  throw ValidationError("unknown label: " + name);
}

Conflict conflict_from_infobox(const InfoboxMilitaryConflict& box) {
  Conflict c;
  c.conflict_id = std::to_string(box.conflict_id);
  for (const auto& group : box.combatant_groups) {
    std::set<std::string> ids;
    for (const auto& ref : group) ids.insert(entity_id(ref));
    c.belligerents.push_back(std::move(ids));
  }
  return c;
}

std::vector<PairLabel> dyads_from_conflict(const Conflict& c) {
  std::map<std::string, std::size_t> side;
  for (std::size_t g = 0; g < c.belligerents.size(); ++g) {
    if (c.belligerents[g].empty()) {
      throw ValidationError("conflict " + c.conflict_id + ": empty belligerent set");
    }
    for (const auto& id : c.belligerents[g]) {
      if (!side.emplace(id, g).second) {
        throw ValidationError("conflict " + c.conflict_id + ": entity " + id +
                              " appears in more than one belligerent set");
      }
    }
  }
  std::vector<PairLabel> out;
  for (auto a = side.begin(); a != side.end(); ++a) {
    for (auto b = std::next(a); b != side.end(); ++b) {
      out.push_back({a->first, b->first, a->second == b->second ? Label::kAllies : Label::kEnemies});
    }
  }
  return out;
}

DyadGraph::DyadGraph(std::vector<std::string> nodes, std::vector<Dyad> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::sort(nodes_.begin(), nodes_.end());
  if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end()) {
    throw ValidationError("duplicate node id");
  }
  for (auto& e : edges_) {
    if (e.u == e.v) throw ValidationError("self-loop on " + e.u);
    if (e.v < e.u) std::swap(e.u, e.v);
    if ((e.ally_count > e.enemy_count) != (e.label == Label::kAllies)) {
      throw ValidationError("label of " + e.u + " -- " + e.v + " disagrees with its tallies");
    }
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Dyad& a, const Dyad& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  for (std::size_t i = 0; i < nodes_.size(); ++i) node_lookup_.emplace(nodes_[i], i);
  adjacency_.resize(nodes_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (e > 0 && edges_[e].u == edges_[e - 1].u && edges_[e].v == edges_[e - 1].v) {
      throw ValidationError("duplicate edge " + edges_[e].u + " -- " + edges_[e].v);
    }
    const auto iu = node_lookup_.find(edges_[e].u);
    const auto iv = node_lookup_.find(edges_[e].v);
    if (iu == node_lookup_.end() || iv == node_lookup_.end()) {
      throw ValidationError("edge endpoint missing from node set: " + edges_[e].u + " -- " +
                            edges_[e].v);
    }
    ends_.emplace_back(iu->second, iv->second);
    adjacency_[iu->second].push_back({iv->second, e});
    adjacency_[iv->second].push_back({iu->second, e});
  }
}

std::size_t DyadGraph::node_index(const std::string& id) const {
  const auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) throw NotFoundError("unknown node: " + id);
  return it->second;
}

std::size_t DyadGraph::edge_index(const std::string& a, const std::string& b) const {
  const std::string& u = std::min(a, b);
  const std::string& v = std::max(a, b);
  const auto it = std::lower_bound(edges_.begin(), edges_.end(), std::tie(u, v),
                                   [](const Dyad& d, const auto& key) {
                                     return std::tie(d.u, d.v) < key;
                                   });
  if (it == edges_.end() || it->u != u || it->v != v) {
    throw NotFoundError("no edge between " + a + " and " + b);
  }
  return static_cast<std::size_t>(it - edges_.begin());
}

bool DyadGraph::has_edge(const std::string& a, const std::string& b) const {
  try {
    edge_index(a, b);
    return true;
  } catch (const NotFoundError&) {
    return false;
  }
}

DyadGraph DyadGraph::with_label(std::size_t e, Label label) const {
  DyadGraph copy = *this;
  Dyad& d = copy.edges_.at(e);
  if (d.label != label) std::swap(d.ally_count, d.enemy_count);
  d.label = label;
  return copy;
}

DyadGraph aggregate(const std::vector<LabeledPair>& all_pairs) {
  struct Tally {
    std::map<std::string, Label> by_conflict;
  };
  std::map<std::pair<std::string, std::string>, Tally> tallies;
  std::set<std::string> nodes;
  for (const auto& p : all_pairs) {
    if (p.u == p.v) throw ValidationError("self pair on " + p.u);
    auto key = p.u < p.v ? std::make_pair(p.u, p.v) : std::make_pair(p.v, p.u);
    auto& t = tallies[key];
    const auto [it, inserted] = t.by_conflict.emplace(p.conflict_id, p.label);
    if (!inserted && it->second != p.label) {
      throw ValidationError("conflict " + p.conflict_id + " labels " + key.first + " -- " +
                            key.second + " both ways");
    }
    nodes.insert(p.u);
    nodes.insert(p.v);
  }
  std::vector<Dyad> edges;
  edges.reserve(tallies.size());
  for (const auto& [key, t] : tallies) {
    Dyad d;
    d.u = key.first;
    d.v = key.second;
    for (const auto& [cid, label] : t.by_conflict) {
      d.conflict_ids.push_back(cid);
      if (label == Label::kAllies) {
        ++d.ally_count;
      } else {
        ++d.enemy_count;
      }
    }
    d.label = d.ally_count > d.enemy_count ? Label::kAllies : Label::kEnemies;
    edges.push_back(std::move(d));
  }
  return DyadGraph(std::vector<std::string>(nodes.begin(), nodes.end()), std::move(edges));
}

RestrictedView::RestrictedView(const DyadGraph& base, std::size_t excluded_edge,
                               bool mask_endpoints)
    : base_(&base), excluded_(excluded_edge), mask_endpoints_(mask_endpoints) {
  if (excluded_edge >= base.edge_count()) {
    throw NotFoundError("edge index " + std::to_string(excluded_edge) + " out of range");
  }
}

bool RestrictedView::node_masked(std::size_t node) const {
  if (!mask_endpoints_) return false;
  const auto [u, v] = target();
  return node == u || node == v;
}

Label RestrictedView::label(std::size_t e) const { return edge(e).label; }

const Dyad& RestrictedView::edge(std::size_t e) const {
  if (e == excluded_) throw LeakError("hidden edge requested through restricted view");
  return base_->edge(e);
}

std::span<const double> RestrictedView::node_feature(std::size_t node,
                                                     std::span<const double> features,
                                                     std::size_t dim) const {
  if (node_masked(node)) throw LeakError("masked node feature requested through restricted view");
  return features.subspan(node * dim, dim);
}

std::size_t RestrictedView::feature_visible_node_count() const {
  return base_->node_count() - (mask_endpoints_ ? 2 : 0);
}

RestrictedView restricted_view(const DyadGraph& g, const std::string& a, const std::string& b) {
  return RestrictedView(g, g.edge_index(a, b));
}

GraphStats graph_stats(const DyadGraph& g) {
  GraphStats s;
  s.node_count = g.node_count();
  s.edge_count = g.edge_count();
  std::size_t allies = 0;
  for (const auto& e : g.edges()) allies += e.label == Label::kAllies;
  s.ally_fraction = s.edge_count == 0 ? 0.0 : static_cast<double>(allies) / s.edge_count;
  for (std::size_t n = 0; n < g.node_count(); ++n) ++s.degree_histogram[g.incident(n).size()];
  return s;
}

std::string graph_to_json(const DyadGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = g.nodes();
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) {
    nlohmann::ordered_json je;
    je["u"] = e.u;
    je["v"] = e.v;
    je["label"] = label_name(e.label);
    je["ally_count"] = e.ally_count;
    je["enemy_count"] = e.enemy_count;
    je["conflict_ids"] = e.conflict_ids;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j.dump(1) + "\n";
}

DyadGraph graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed graph json: ") + e.what());
  }
  std::vector<Dyad> edges;
  for (const auto& je : j.at("edges")) {
    Dyad d;
    d.u = je.at("u").get<std::string>();
    d.v = je.at("v").get<std::string>();
    d.label = parse_label(je.at("label").get<std::string>());
    d.ally_count = je.at("ally_count").get<int>();
    d.enemy_count = je.at("enemy_count").get<int>();
    d.conflict_ids = je.at("conflict_ids").get<std::vector<std::string>>();
    edges.push_back(std::move(d));
  }
  return DyadGraph(j.at("nodes").get<std::vector<std::string>>(), std::move(edges));
}

}  // namespace dyad
