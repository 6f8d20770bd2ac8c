#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adaptdhm/adam.hpp"
#include "adaptdhm/data.hpp"
#include "adaptdhm/embedding.hpp"
#include "adaptdhm/mlp.hpp"
#include "adaptdhm/routing.hpp"

namespace adaptdhm {

enum class ModelKind : uint8_t { adaptdhm, dnn, shared_bottom, star_by_domain };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(std::string_view name);

struct ModelConfig {
  ModelKind kind = ModelKind::adaptdhm;
  size_t embedding_dim = 8;
  std::vector<size_t> hidden = {64, 32, 16};
  RoutingConfig routing;                    // adaptdhm only
  std::vector<std::string> routing_fields;  // empty -> every schema field
  size_t domains = 1;                       // M, needed by the domain-indexed baselines
  AdamConfig adam;
  uint64_t seed = 42;
};

struct TrainOptions {
  // 0 scales the classification gradient away entirely: routing still updates
  // centers but no trainable parameter moves (the stop-gradient contract).
  double loss_weight = 1.0;
  // Keeps cluster branches at their identity initialization; with K=1 the
  // model then trains exactly like the plain DNN.
  bool freeze_branches = false;
};

struct TrainStepReport {
  double loss = 0.0;
  std::vector<uint64_t> cluster_histogram;  // one count per group, sums to batch size
  uint64_t batch_step = 0;
  uint32_t degenerate_clusters = 0;
};

struct ParamCounts {
  uint64_t p_mlp = 0;       // one MLP copy
  uint64_t mlp_copies = 0;  // 1, K+1, M or M+1 depending on kind
  uint64_t mlp_total = 0;
  uint64_t embedding_total = 0;
  uint64_t total = 0;
};

// Per-layer element-wise product of weights, sum of biases. Identical shapes
// required.
MlpParams combine_weights(const MlpParams& shared, const MlpParams& branch);

// The multi-branch CTR model and its baselines.
//
//   adaptdhm        shared net + K cluster branches, instance -> cluster by routing
//   dnn             shared net only
//   shared_bottom   M independent towers picked by domain id, shared embeddings
//   star_by_domain  shared net + M branches picked by domain id (same fusion op)
//
// State is deliberately open: the checkpoint codec and the tests read and
// restore it directly.
struct Model {
  ModelConfig config;
  DatasetSchema schema;

  std::vector<EmbeddingTable> tables;
  std::vector<AdamState> table_adam;

  MlpParams shared;  // unused for shared_bottom
  AdamState shared_adam;

  std::vector<MlpParams> branches;
  std::vector<AdamState> branch_adam;

  ClusterCenters centers;  // adaptdhm only
  std::vector<size_t> routing_field_idx;

  uint64_t step = 0;  // train steps taken (mirrors centers.batch_step for adaptdhm)

  static Model build(const ModelConfig& config, const DatasetSchema& schema);

  size_t group_count() const;
  size_t input_width() const { return total_embedding_width(tables); }
  size_t routing_width() const { return routing_field_idx.size() * config.embedding_dim; }
  bool uses_fusion() const {
    return config.kind == ModelKind::adaptdhm || config.kind == ModelKind::star_by_domain;
  }

  // Probabilities in (0,1), input order preserved. Read-only, safe to call
  // from several threads at once.
  std::vector<double> predict(const Dataset& data, std::span<const uint32_t> idx) const;
  std::vector<double> predict_all(const Dataset& data) const;

  TrainStepReport train_step(const Dataset& data, std::span<const uint32_t> batch, const TrainOptions& opts = {});

  // Hard routed assignment under the current centers (adaptdhm only).
  std::vector<uint32_t> route_assign(const Dataset& data, std::span<const uint32_t> idx) const;

  ParamCounts count_parameters() const;

  // Structural cost surrogate: parameter-update work per step, which is what
  // scales with (K+1) vs M. Forward/backward work is the same for every kind.
  uint64_t param_update_flops_per_step() const;

  // Throws unless the dataset schema matches the model's, field by field.
  void check_compatible(const Dataset& data) const;

  // Embedding rows for the given instances; `routing_only` restricts to the
  // configured routing fields.
  DenseMatrix gather_embeddings(const Dataset& data, std::span<const uint32_t> idx, bool routing_only) const;
};

}  // namespace adaptdhm
