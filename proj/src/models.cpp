#include "dyad/models.hpp"

#include <algorithm>
#include <cmath>

#include "dyad/errors.hpp"

namespace dyad {

namespace {

bool is_dyadic(Variant v) { return v == Variant::kD || v == Variant::kD1; }
bool uses_gin(Variant v) {
  return v == Variant::kS || v == Variant::kC || v == Variant::kS2 || v == Variant::kS3 ||
         v == Variant::kS4;
}
bool uses_node_encoder(Variant v) {
  return v == Variant::kD || v == Variant::kD1 || v == Variant::kS || v == Variant::kC ||
         v == Variant::kS2;
}
bool uses_edge_encoder(Variant v) {
  return v == Variant::kD || v == Variant::kS || v == Variant::kC || v == Variant::kS3;
}
bool signed_weights(Variant v) {
  return v == Variant::kS || v == Variant::kC || v == Variant::kS4;
}

std::vector<std::size_t> with_input(std::size_t in, const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> out{in};
  out.insert(out.end(), dims.begin(), dims.end());
  return out;
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kD: return "D";
    case Variant::kS: return "S";
    case Variant::kC: return "C";
    case Variant::kMaj: return "MAJ";
    case Variant::kD1: return "D1";
    case Variant::kS2: return "S2";
    case Variant::kS3: return "S3";
    case Variant::kS4: return "S4";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant: " + name);
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = {Variant::kD,  Variant::kS,  Variant::kC,
                                            Variant::kMaj, Variant::kD1, Variant::kS2,
                                            Variant::kS3, Variant::kS4};
  return kAll;
}

FeatureMask feature_mask(Variant v) {
  switch (v) {
    case Variant::kD: return {true, true, true, false, false, false};
    case Variant::kS: return {false, false, false, true, true, true};
    case Variant::kC: return {true, true, true, true, true, true};
    case Variant::kMaj: return {};
    case Variant::kD1: return {true, true, false, false, false, false};
    case Variant::kS2: return {false, false, false, true, false, false};
    case Variant::kS3: return {false, false, false, false, true, false};
    case Variant::kS4: return {false, false, false, false, false, true};
  }
  return {};
}

LabelExposure expose_labels(const DyadGraph& g, std::span<const std::size_t> edges) {
  LabelExposure out(g.edge_count(), 0);
  for (std::size_t e : edges) out.at(e) = g.edge(e).label == Label::kAllies ? 1 : -1;
  return out;
}

Model::Model(ModelConfig config, std::size_t node_feature_dim, std::size_t edge_feature_dim)
    : config_(std::move(config)),
      mask_(feature_mask(config_.variant)),
      node_dim_(node_feature_dim),
      edge_dim_(edge_feature_dim) {
  const Variant v = config_.variant;
  if (v == Variant::kMaj) return;
  if (config_.node_encoder_dims.empty() || config_.classifier_dims.empty()) {
    throw ConfigError("node encoder and classifier need at least one layer");
  }
  embedding_dim_ = config_.node_encoder_dims.back();
  if (uses_edge_encoder(v)) {
    if (config_.edge_encoder_dims.empty() || config_.edge_encoder_dims.back() != embedding_dim_) {
      throw ConfigError("edge encoder output width must equal node encoder output width");
    }
  }
  if (uses_node_encoder(v)) {
    if (node_feature_dim == 0) throw ConfigError(std::string(variant_name(v)) + " needs node features");
    Rng rng(mix_seed(config_.seed, 1));
    node_encoder_ = Mlp("node_encoder", with_input(node_feature_dim, config_.node_encoder_dims), rng);
  }
  if (uses_edge_encoder(v)) {
    if (edge_feature_dim == 0) throw ConfigError(std::string(variant_name(v)) + " needs edge features");
    Rng rng(mix_seed(config_.seed, 2));
    edge_encoder_ = Mlp("edge_encoder", with_input(edge_feature_dim, config_.edge_encoder_dims), rng);
  }
  if (uses_gin(v)) {
    if (config_.gin_steps < 1) throw ConfigError("gin_steps must be at least 1");
    for (int k = 0; k < config_.gin_steps; ++k) {
      Rng rng(mix_seed(config_.seed, 10 + static_cast<std::uint64_t>(k)));
      std::vector<std::size_t> dims{embedding_dim_};
      dims.insert(dims.end(), config_.gin_hidden_dims.begin(), config_.gin_hidden_dims.end());
      dims.push_back(embedding_dim_);
      gin_.emplace_back("gin" + std::to_string(k), dims, rng);
      eps_.emplace_back("gin" + std::to_string(k) + ".eps", Matrix(1, 1, config_.gin_eps));
    }
  }
  Rng rng(mix_seed(config_.seed, 3));
  classifier_ = Mlp("classifier", with_input(embedding_dim_, config_.classifier_dims), rng);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  auto append = [&](Mlp& m) {
    for (Parameter* p : m.parameters()) out.push_back(p);
  };
  append(node_encoder_);
  append(edge_encoder_);
  for (std::size_t k = 0; k < gin_.size(); ++k) {
    append(gin_[k]);
    if (config_.learn_gin_eps) out.push_back(&eps_[k]);
  }
  append(classifier_);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = node_encoder_.parameter_count() + edge_encoder_.parameter_count() +
                  classifier_.parameter_count();
  for (const auto& m : gin_) n += m.parameter_count() + (config_.learn_gin_eps ? 1 : 0);
  return n;
}

void Model::check_inputs(const DyadGraph& g, const GraphFeatures& f) const {
  const Variant v = config_.variant;
  if (uses_node_encoder(v) && (f.node.rows() != g.node_count() || f.node.cols() != node_dim_)) {
    throw ValidationError(std::string(variant_name(v)) + ": node features are " +
                          std::to_string(f.node.rows()) + "x" + std::to_string(f.node.cols()) +
                          ", expected " + std::to_string(g.node_count()) + "x" +
                          std::to_string(node_dim_));
  }
  if (uses_edge_encoder(v) && (f.edge.rows() != g.edge_count() || f.edge.cols() != edge_dim_)) {
    throw ValidationError(std::string(variant_name(v)) + ": edge features are " +
                          std::to_string(f.edge.rows()) + "x" + std::to_string(f.edge.cols()) +
                          ", expected " + std::to_string(g.edge_count()) + "x" +
                          std::to_string(edge_dim_));
  }
}

Tape::Var Model::endpoint_aggregates(Tape& tape, const DyadGraph& g, const GraphFeatures& f,
                                     const LabelExposure& exposure,
                                     std::span<const std::size_t> targets, Tape::Var* gin_out) {
  const Variant v = config_.variant;
  const std::size_t batch = targets.size();
  for (std::size_t t : targets) {
    if (t >= g.edge_count()) throw NotFoundError("target edge " + std::to_string(t) + " out of range");
  }

  if (is_dyadic(v)) {
    Matrix x(2 * batch, node_dim_);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto [u, w] = g.endpoints(targets[i]);
      std::copy(f.node.row(u).begin(), f.node.row(u).end(), x.row(2 * i).begin());
      std::copy(f.node.row(w).begin(), f.node.row(w).end(), x.row(2 * i + 1).begin());
    }
    const Tape::Var nodes = tape.mlp(node_encoder_, tape.input(std::move(x)));
    if (v == Variant::kD1) return nodes;
    Matrix xe(batch, edge_dim_);
    for (std::size_t i = 0; i < batch; ++i) {
      std::copy(f.edge.row(targets[i]).begin(), f.edge.row(targets[i]).end(), xe.row(i).begin());
    }
    const Tape::Var edges = tape.mlp(edge_encoder_, tape.input(std::move(xe)));
    SparseRows mean(2 * batch);
    for (std::size_t r = 0; r < 2 * batch; ++r) mean[r] = {{r, 0.5}, {2 * batch + r / 2, 0.5}};
    return tape.spmm(std::move(mean), tape.concat_rows({nodes, edges}));
  }

  // Systemic and combined: message passing restricted to each target's
  // receptive field, layer K = {u, v}, layer k-1 = layer k plus neighbours.
  const std::size_t steps = gin_.size();
  const bool sign = signed_weights(v);
  std::vector<std::vector<std::size_t>> field(batch);      // layer 0 nodes, prefix-ordered
  std::vector<std::vector<std::size_t>> layer_size(batch);  // |L_k| for k = 0..K
  std::vector<std::int64_t> pos(g.node_count(), -1);
  std::vector<RestrictedView> views;
  views.reserve(batch);

  auto weight_of = [&](std::size_t e) -> double {
    if (!sign) return 1.0;
    return static_cast<double>(exposure[e]);
  };

  std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> nbrs(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    views.emplace_back(g, targets[i], v != Variant::kC);
    const RestrictedView& view = views.back();
    const auto [u, w] = view.target();
    auto& nodes = field[i];
    nodes = {u, w};
    pos[u] = 0;
    pos[w] = 1;
    layer_size[i].assign(steps + 1, 0);
    layer_size[i][steps] = 2;
    std::size_t frontier_begin = 0;
    for (std::size_t k = steps; k > 0; --k) {
      const std::size_t end = nodes.size();
      for (std::size_t j = frontier_begin; j < end; ++j) {
        view.for_each_neighbor(nodes[j], [&](std::size_t n, std::size_t e) {
          if (weight_of(e) == 0.0) return;
          if (pos[n] < 0) {
            pos[n] = static_cast<std::int64_t>(nodes.size());
            nodes.push_back(n);
          }
        });
      }
      frontier_begin = end;
      layer_size[i][k - 1] = nodes.size();
    }
    // Neighbour lists in local indices for every node that gets updated.
    auto& local = nbrs[i];
    local.resize(layer_size[i][0]);
    const std::size_t updated = steps >= 1 ? layer_size[i][1] : 0;
    for (std::size_t j = 0; j < updated; ++j) {
      view.for_each_neighbor(nodes[j], [&](std::size_t n, std::size_t e) {
        const double wt = weight_of(e);
        if (wt != 0.0) local[j].emplace_back(static_cast<std::size_t>(pos[n]), wt);
      });
    }
    for (std::size_t n : nodes) pos[n] = -1;
  }

  // Initial embeddings for layer 0.
  std::size_t rows0 = 0;
  std::vector<std::size_t> offset0(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    offset0[i] = rows0;
    rows0 += layer_size[i][0];
  }
  Tape::Var h;
  if (uses_node_encoder(v)) {
    Matrix x(rows0, node_dim_);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < field[i].size(); ++j) {
        const std::size_t n = field[i][j];
        if (views[i].node_masked(n)) continue;  // zero feature
        const auto row = views[i].node_feature(n, f.node.data(), node_dim_);
        std::copy(row.begin(), row.end(), x.row(offset0[i] + j).begin());
      }
    }
    h = tape.mlp(node_encoder_, tape.input(std::move(x)));
  } else {
    Matrix x(rows0, embedding_dim_);
    const double c = 1.0 / std::sqrt(static_cast<double>(embedding_dim_));
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < field[i].size(); ++j) {
        if (views[i].node_masked(field[i][j])) continue;
        for (double& val : x.row(offset0[i] + j)) val = c;
      }
    }
    h = tape.input(std::move(x));
  }

  // GIN steps. Layer k rows of target i are the first layer_size[i][k]
  // local nodes, stacked target by target.
  std::vector<std::size_t> prev_offset = offset0;
  for (std::size_t k = 1; k <= steps; ++k) {
    SparseRows self_rows;
    SparseRows nbr_rows;
    std::vector<std::size_t> self_index;
    std::vector<std::size_t> offset(batch);
    const double self_weight = 1.0 + config_.gin_eps;
    std::size_t total = 0;
    for (std::size_t i = 0; i < batch; ++i) {
      offset[i] = total;
      for (std::size_t j = 0; j < layer_size[i][k]; ++j) {
        std::vector<std::pair<std::size_t, double>> row;
        if (!config_.learn_gin_eps) row.emplace_back(prev_offset[i] + j, self_weight);
        for (const auto& [n, wt] : nbrs[i][j]) row.emplace_back(prev_offset[i] + n, wt);
        nbr_rows.push_back(std::move(row));
        self_index.push_back(prev_offset[i] + j);
      }
      total += layer_size[i][k];
    }
    Tape::Var agg = tape.spmm(std::move(nbr_rows), h);
    if (config_.learn_gin_eps) {
      const Tape::Var self = tape.gather_rows(h, std::move(self_index));
      agg = tape.add(tape.scale_one_plus(self, tape.param(eps_[k - 1])), agg);
    }
    h = tape.mlp(gin_[k - 1], agg);
    prev_offset = std::move(offset);
  }
  if (gin_out != nullptr) *gin_out = h;

  // Mean-aggregate each endpoint with its encoded visible incident edges
  // (and the target edge for the combined model).
  const bool with_edges = mask_.use_neighbor_edges;
  if (!with_edges && v != Variant::kC) return h;
  std::vector<std::size_t> edge_rows;
  SparseRows mean(2 * batch);
  std::vector<std::vector<std::size_t>> members(2 * batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto [u, w] = views[i].target();
    const std::size_t ends[2] = {u, w};
    for (int s = 0; s < 2; ++s) {
      auto& m = members[2 * i + static_cast<std::size_t>(s)];
      if (with_edges) {
        views[i].for_each_neighbor(ends[s], [&](std::size_t, std::size_t e) {
          m.push_back(edge_rows.size());
          edge_rows.push_back(e);
        });
      }
      if (v == Variant::kC) {
        m.push_back(edge_rows.size());
        edge_rows.push_back(targets[i]);
      }
    }
  }
  if (edge_rows.empty()) return h;
  Matrix xe(edge_rows.size(), edge_dim_);
  for (std::size_t r = 0; r < edge_rows.size(); ++r) {
    std::copy(f.edge.row(edge_rows[r]).begin(), f.edge.row(edge_rows[r]).end(), xe.row(r).begin());
  }
  const Tape::Var encoded = tape.mlp(edge_encoder_, tape.input(std::move(xe)));
  for (std::size_t r = 0; r < 2 * batch; ++r) {
    const double wt = 1.0 / static_cast<double>(1 + members[r].size());
    mean[r].emplace_back(r, wt);
    for (std::size_t m : members[r]) mean[r].emplace_back(2 * batch + m, wt);
  }
  return tape.spmm(std::move(mean), tape.concat_rows({h, encoded}));
}

Tape::Var Model::logits(Tape& tape, const DyadGraph& g, const GraphFeatures& f,
                        const LabelExposure& exposure, std::span<const std::size_t> targets) {
  if (config_.variant == Variant::kMaj) throw ConfigError("MAJ has no trainable scorer");
  if (exposure.size() != g.edge_count()) throw ShapeError("label exposure length mismatch");
  check_inputs(g, f);
  const Tape::Var z = endpoint_aggregates(tape, g, f, exposure, targets, nullptr);
  const Tape::Var c = tape.mlp(classifier_, z);
  std::vector<std::size_t> us;
  std::vector<std::size_t> vs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    us.push_back(2 * i);
    vs.push_back(2 * i + 1);
  }
  return tape.row_dot(tape.gather_rows(c, std::move(us)), tape.gather_rows(c, std::move(vs)));
}

std::vector<double> Model::predict_proba(const DyadGraph& g, const GraphFeatures& f,
                                         const LabelExposure& exposure,
                                         std::span<const std::size_t> targets) {
  std::vector<double> out;
  out.reserve(targets.size());
  if (config_.variant == Variant::kMaj) {
    out.assign(targets.size(), 1.0);
    return out;
  }
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < targets.size(); start += kChunk) {
    const auto chunk = targets.subspan(start, std::min(kChunk, targets.size() - start));
    Tape tape;
    const Tape::Var z = logits(tape, g, f, exposure, chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(sigmoid(tape.value(z)(i, 0)));
  }
  return out;
}

Matrix Model::gin_endpoint_embeddings(const DyadGraph& g, const GraphFeatures& f,
                                      const LabelExposure& exposure, std::size_t target) {
  if (!uses_gin(config_.variant)) throw ConfigError("variant has no GIN");
  check_inputs(g, f);
  Tape tape;
  Tape::Var h = 0;
  const std::size_t targets[1] = {target};
  endpoint_aggregates(tape, g, f, exposure, targets, &h);
  return tape.value(h);
}

double forward_dyadic(Model& model, const DyadGraph& g, std::size_t target,
                      const GraphFeatures& f) {
  if (!is_dyadic(model.config().variant)) throw ConfigError("forward_dyadic needs D or D1");
  const std::size_t targets[1] = {target};
  return model.predict_proba(g, f, LabelExposure(g.edge_count(), 0), targets).front();
}

double forward_systemic(Model& model, const RestrictedView& view, std::size_t target,
                        const GraphFeatures& f, const LabelExposure& exposure) {
  const Variant v = model.config().variant;
  if (!uses_gin(v) || v == Variant::kC) throw ConfigError("forward_systemic needs S, S2, S3 or S4");
  if (view.excluded_edge() != target) {
    throw ValidationError("target edge is visible through the supplied view");
  }
  const std::size_t targets[1] = {target};
  return model.predict_proba(view.base(), f, exposure, targets).front();
}

double forward_combined(Model& model, const DyadGraph& g, std::size_t target,
                        const GraphFeatures& f, const LabelExposure& exposure) {
  if (model.config().variant != Variant::kC) throw ConfigError("forward_combined needs C");
  const std::size_t targets[1] = {target};
  return model.predict_proba(g, f, exposure, targets).front();
}

Label predict_majority(std::span<const Label>) { return Label::kAllies; }

}  // namespace dyad
