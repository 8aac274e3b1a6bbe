#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyad/graph.hpp"
#include "dyad/tensor.hpp"

namespace dyad {

enum class Variant { kD, kS, kC, kMaj, kD1, kS2, kS3, kS4 };

const char* variant_name(Variant v);
// ConfigError for unknown names.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct FeatureMask {
  bool use_u = false;
  bool use_v = false;
  bool use_e = false;
  bool use_neighbor_nodes = false;
  bool use_neighbor_edges = false;
  bool use_neighbor_labels = false;

  bool operator==(const FeatureMask&) const = default;
};

FeatureMask feature_mask(Variant v);

struct ModelConfig {
  Variant variant = Variant::kD;
  // Hidden and output widths; the input width comes from the features.
  // Node and edge encoders must end in the same width (the embedding width).
  std::vector<std::size_t> node_encoder_dims = {64};
  std::vector<std::size_t> edge_encoder_dims = {64};
  std::vector<std::size_t> classifier_dims = {64};
  // Hidden widths of each GIN update MLP; its output is the embedding width.
  std::vector<std::size_t> gin_hidden_dims = {64};
  int gin_steps = 2;
  bool learn_gin_eps = false;
  double gin_eps = 0.0;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

// Row-aligned inputs: node row i is graph node i, edge row j is graph edge j.
// A variant that does not use a group may be given an empty matrix.
struct GraphFeatures {
  Matrix node;
  Matrix edge;
};

// Label knowledge available to a model, per edge: +1 allies, -1 enemies,
// 0 unknown. In the transductive protocol only training edges are known.
using LabelExposure = std::vector<int>;

LabelExposure expose_labels(const DyadGraph& g, std::span<const std::size_t> edges);

class Model {
 public:
  Model(ModelConfig config, std::size_t node_feature_dim, std::size_t edge_feature_dim);

  const ModelConfig& config() const { return config_; }
  const FeatureMask& mask() const { return mask_; }
  std::size_t embedding_dim() const { return embedding_dim_; }

  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;

  Mlp& node_encoder() { return node_encoder_; }
  Mlp& edge_encoder() { return edge_encoder_; }
  Mlp& classifier() { return classifier_; }
  std::vector<Mlp>& gin() { return gin_; }
  Parameter& gin_eps(std::size_t step) { return eps_[step]; }

  // ShapeError/ValidationError if the features do not fit this variant.
  void check_inputs(const DyadGraph& g, const GraphFeatures& f) const;

  // Logits (targets x 1) for a batch of target edges, recorded on `tape`.
  Tape::Var logits(Tape& tape, const DyadGraph& g, const GraphFeatures& f,
                   const LabelExposure& exposure, std::span<const std::size_t> targets);

  // P(ALLIES) for each target.
  std::vector<double> predict_proba(const DyadGraph& g, const GraphFeatures& f,
                                    const LabelExposure& exposure,
                                    std::span<const std::size_t> targets);

  // Embeddings at the two endpoints after the last GIN step (systemic and
  // combined variants), rows u then v.
  Matrix gin_endpoint_embeddings(const DyadGraph& g, const GraphFeatures& f,
                                 const LabelExposure& exposure, std::size_t target);

 private:
  struct Plan;
  Tape::Var endpoint_aggregates(Tape& tape, const DyadGraph& g, const GraphFeatures& f,
                                const LabelExposure& exposure,
                                std::span<const std::size_t> targets, Tape::Var* gin_out);

  ModelConfig config_;
  FeatureMask mask_;
  std::size_t node_dim_;
  std::size_t edge_dim_;
  std::size_t embedding_dim_ = 0;
  Mlp node_encoder_;
  Mlp edge_encoder_;
  std::vector<Mlp> gin_;
  std::vector<Parameter> eps_;
  Mlp classifier_;
};

// Single-target entry points.
double forward_dyadic(Model& model, const DyadGraph& g, std::size_t target,
                      const GraphFeatures& f);
// ValidationError unless `view` hides exactly `target`.
double forward_systemic(Model& model, const RestrictedView& view, std::size_t target,
                        const GraphFeatures& f, const LabelExposure& exposure);
double forward_combined(Model& model, const DyadGraph& g, std::size_t target,
                        const GraphFeatures& f, const LabelExposure& exposure);

// The majority baseline always answers ALLIES.
Label predict_majority(std::span<const Label> training_labels = {});

}  // namespace dyad
