#include "adaptdhm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adaptdhm/error.hpp"
#include "adaptdhm/loss.hpp"
#include "adaptdhm/rng.hpp"

namespace adaptdhm {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::adaptdhm: return "adaptdhm";
    case ModelKind::dnn: return "dnn";
    case ModelKind::shared_bottom: return "shared_bottom";
    case ModelKind::star_by_domain: return "star_by_domain";
  }
  return "unknown";
}

std::optional<ModelKind> model_kind_from_string(std::string_view name) {
  if (name == "adaptdhm") return ModelKind::adaptdhm;
  if (name == "dnn") return ModelKind::dnn;
  if (name == "shared_bottom") return ModelKind::shared_bottom;
  if (name == "star_by_domain") return ModelKind::star_by_domain;
  return std::nullopt;
}

MlpParams combine_weights(const MlpParams& shared, const MlpParams& branch) {
  if (shared.layers.size() != branch.layers.size()) fail("combine_weights: layer count mismatch");
  MlpParams fused;
  fused.layers.reserve(shared.layers.size());
  for (size_t l = 0; l < shared.layers.size(); ++l) {
    const MlpLayer& s = shared.layers[l];
    const MlpLayer& b = branch.layers[l];
    if (!s.weight.same_shape(b.weight) || !s.bias.same_shape(b.bias) || s.act != b.act)
      fail("combine_weights: layer " + std::to_string(l) + " shape mismatch");
    MlpLayer f;
    f.act = s.act;
    f.weight = s.weight;
    for (size_t i = 0; i < f.weight.size(); ++i) f.weight.values[i] *= b.weight.values[i];
    f.bias = s.bias;
    for (size_t i = 0; i < f.bias.size(); ++i) f.bias.values[i] += b.bias.values[i];
    fused.layers.push_back(std::move(f));
  }
  return fused;
}

Model Model::build(const ModelConfig& config, const DatasetSchema& schema) {
  schema.validate();
  require(config.embedding_dim > 0, "model: embedding_dim must be positive");
  require(!config.hidden.empty(), "model: at least one hidden layer required");

  Model m;
  m.config = config;
  m.schema = schema;

  for (const auto& f : schema.fields) {
    Rng rng(derive_seed(config.seed, "embed:" + f.name));
    m.tables.push_back(make_embedding(f.name, f.vocab, config.embedding_dim, rng));
    m.table_adam.emplace_back(f.vocab * config.embedding_dim, config.adam);
  }

  const size_t width = m.input_width();
  const auto identity_branches = [&](size_t count) {
    for (size_t i = 0; i < count; ++i) {
      m.branches.push_back(make_mlp_identity(width, config.hidden));
      m.branch_adam.emplace_back(m.branches.back().param_count(), config.adam);
    }
  };

  switch (config.kind) {
    case ModelKind::dnn: {
      Rng rng(derive_seed(config.seed, "mlp-shared"));
      m.shared = make_mlp(width, config.hidden, rng);
      m.shared_adam = AdamState(m.shared.param_count(), config.adam);
      break;
    }
    case ModelKind::adaptdhm: {
      Rng rng(derive_seed(config.seed, "mlp-shared"));
      m.shared = make_mlp(width, config.hidden, rng);
      m.shared_adam = AdamState(m.shared.param_count(), config.adam);
      identity_branches(config.routing.clusters);
      break;
    }
    case ModelKind::star_by_domain: {
      require(config.domains >= 1, "model: star_by_domain needs domains >= 1");
      Rng rng(derive_seed(config.seed, "mlp-shared"));
      m.shared = make_mlp(width, config.hidden, rng);
      m.shared_adam = AdamState(m.shared.param_count(), config.adam);
      identity_branches(config.domains);
      break;
    }
    case ModelKind::shared_bottom: {
      require(config.domains >= 1, "model: shared_bottom needs domains >= 1");
      for (size_t t = 0; t < config.domains; ++t) {
        Rng rng(derive_seed(config.seed, "tower", t));
        m.branches.push_back(make_mlp(width, config.hidden, rng));
        m.branch_adam.emplace_back(m.branches.back().param_count(), config.adam);
      }
      break;
    }
  }

  if (config.kind == ModelKind::adaptdhm) {
    if (config.routing_fields.empty()) {
      for (size_t f = 0; f < schema.fields.size(); ++f) m.routing_field_idx.push_back(f);
    } else {
      for (const auto& name : config.routing_fields) m.routing_field_idx.push_back(schema.field_index(name));
    }
    RoutingConfig rc = config.routing;
    rc.seed = derive_seed(config.seed, "routing");
    m.centers = init_centers(rc, m.routing_width());
  }
  return m;
}

size_t Model::group_count() const {
  switch (config.kind) {
    case ModelKind::dnn: return 1;
    case ModelKind::adaptdhm: return config.routing.clusters;
    case ModelKind::shared_bottom:
    case ModelKind::star_by_domain: return config.domains;
  }
  return 1;
}

void Model::check_compatible(const Dataset& data) const {
  if (data.schema.fields.size() != schema.fields.size())
    fail("model: dataset has " + std::to_string(data.schema.fields.size()) + " fields, model expects " +
         std::to_string(schema.fields.size()));
  for (size_t f = 0; f < schema.fields.size(); ++f) {
    if (data.schema.fields[f].name != schema.fields[f].name)
      fail("model: dataset field '" + data.schema.fields[f].name + "' does not match model field '" +
           schema.fields[f].name + "'");
    if (data.schema.fields[f].vocab != schema.fields[f].vocab)
      fail("model: vocab mismatch on field '" + schema.fields[f].name + "'");
  }
}

DenseMatrix Model::gather_embeddings(const Dataset& data, std::span<const uint32_t> idx, bool routing_only) const {
  const size_t width = routing_only ? routing_width() : input_width();
  DenseMatrix out(idx.size(), width, 0.0);
  for (size_t r = 0; r < idx.size(); ++r) {
    const Instance& inst = data.instances[idx[r]];
    if (routing_only) {
      size_t off = 0;
      for (const size_t f : routing_field_idx) {
        const EmbeddingTable& t = tables[f];
        if (inst.ids[f] >= t.vocab_size) fail("model: feature id out of range for field '" + t.field_name + "'");
        std::copy_n(t.vectors.row(inst.ids[f]), t.dim, out.row(r) + off);
        off += t.dim;
      }
    } else {
      embed_lookup_row(tables, inst.ids, out.row(r));
    }
  }
  return out;
}

namespace {

// group index per batch row
std::vector<uint32_t> domain_groups(const Model& m, const Dataset& data, std::span<const uint32_t> idx) {
  std::vector<uint32_t> g(idx.size(), 0);
  for (size_t r = 0; r < idx.size(); ++r) {
    const uint32_t d = data.instances[idx[r]].domain;
    if (d >= m.config.domains)
      fail("model: domain id " + std::to_string(d) + " outside configured domain count " +
           std::to_string(m.config.domains));
    g[r] = d;
  }
  return g;
}

struct GroupSlices {
  std::vector<std::vector<uint32_t>> rows;  // batch-row indices per group
};

GroupSlices slice_groups(std::span<const uint32_t> groups, size_t n_groups) {
  GroupSlices s;
  s.rows.resize(n_groups);
  for (size_t r = 0; r < groups.size(); ++r) s.rows[groups[r]].push_back(static_cast<uint32_t>(r));
  return s;
}

DenseMatrix gather_rows(const DenseMatrix& x, const std::vector<uint32_t>& rows) {
  DenseMatrix out(rows.size(), x.cols, 0.0);
  for (size_t r = 0; r < rows.size(); ++r) std::copy_n(x.row(rows[r]), x.cols, out.row(r));
  return out;
}

double clamp_probability(double p) { return std::min(1.0 - 1e-15, std::max(1e-15, p)); }

// zero-filled gradient buffers shaped like a network
struct MlpGradBuf {
  std::vector<DenseMatrix> w;
  std::vector<DenseMatrix> b;

  explicit MlpGradBuf(const MlpParams& like) {
    for (const auto& l : like.layers) {
      w.emplace_back(l.weight.rows, l.weight.cols, 0.0);
      b.emplace_back(l.bias.rows, l.bias.cols, 0.0);
    }
  }
};

void adam_step_mlp(AdamState& state, MlpParams& params, const MlpGradBuf& grads) {
  state.begin_step();
  size_t off = 0;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    state.update(off, layer.weight.values, grads.w[l].values);
    off += layer.weight.size();
    state.update(off, layer.bias.values, grads.b[l].values);
    off += layer.bias.size();
  }
}

}  // namespace

std::vector<double> Model::predict(const Dataset& data, std::span<const uint32_t> idx) const {
  check_compatible(data);
  if (idx.empty()) return {};
  const DenseMatrix x = gather_embeddings(data, idx, false);

  std::vector<uint32_t> groups;
  switch (config.kind) {
    case ModelKind::dnn: groups.assign(idx.size(), 0); break;
    case ModelKind::adaptdhm: {
      const DenseMatrix r = gather_embeddings(data, idx, true);
      groups = assign(infer_route(centers, r));
      break;
    }
    default: groups = domain_groups(*this, data, idx);
  }

  const GroupSlices slices = slice_groups(groups, group_count());
  std::vector<double> probs(idx.size(), 0.0);
  for (size_t g = 0; g < slices.rows.size(); ++g) {
    const auto& rows = slices.rows[g];
    if (rows.empty()) continue;
    MlpParams net;
    const MlpParams* effective = nullptr;
    if (config.kind == ModelKind::dnn) {
      effective = &shared;
    } else if (config.kind == ModelKind::shared_bottom) {
      effective = &branches[g];
    } else {
      net = combine_weights(shared, branches[g]);
      effective = &net;
    }
    const DenseMatrix xg = gather_rows(x, rows);
    const MlpForward fw = mlp_forward(*effective, xg);
    for (size_t r = 0; r < rows.size(); ++r)
      probs[rows[r]] = clamp_probability(stable_sigmoid(fw.output.at(r, 0)));
  }
  return probs;
}

std::vector<double> Model::predict_all(const Dataset& data) const {
  std::vector<uint32_t> idx(data.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<uint32_t>(i);
  return predict(data, idx);
}

std::vector<uint32_t> Model::route_assign(const Dataset& data, std::span<const uint32_t> idx) const {
  require(config.kind == ModelKind::adaptdhm, "route_assign: model has no routing stage");
  check_compatible(data);
  const DenseMatrix r = gather_embeddings(data, idx, true);
  return assign(infer_route(centers, r));
}

TrainStepReport Model::train_step(const Dataset& data, std::span<const uint32_t> batch, const TrainOptions& opts) {
  check_compatible(data);
  if (batch.empty()) fail("train_step: empty batch");

  const DenseMatrix x = gather_embeddings(data, batch, false);

  // 1) clustering stage; center updates happen here and only here, and
  //    nothing below ever differentiates through them
  TrainStepReport report;
  std::vector<uint32_t> groups;
  switch (config.kind) {
    case ModelKind::dnn: groups.assign(batch.size(), 0); break;
    case ModelKind::adaptdhm: {
      const DenseMatrix r = gather_embeddings(data, batch, true);
      const RouteResult routed = route_batch(centers, r, config.routing);
      report.degenerate_clusters = routed.degenerate_events;
      groups = assign(routed.coefficients);
      break;
    }
    default: groups = domain_groups(*this, data, batch);
  }

  report.cluster_histogram.assign(group_count(), 0);
  for (const uint32_t g : groups) ++report.cluster_histogram[g];

  // 2) classification stage, grouped by cluster
  const GroupSlices slices = slice_groups(groups, group_count());
  DenseMatrix logits(batch.size(), 1, 0.0);
  struct GroupPass {
    MlpParams fused;  // effective net the forward ran through (unused for dnn/shared_bottom)
    MlpForward fw;
  };
  std::vector<GroupPass> passes(group_count());
  for (size_t g = 0; g < slices.rows.size(); ++g) {
    const auto& rows = slices.rows[g];
    if (rows.empty()) continue;
    GroupPass& pass = passes[g];
    const MlpParams* effective = nullptr;
    if (config.kind == ModelKind::dnn) {
      effective = &shared;
    } else if (config.kind == ModelKind::shared_bottom) {
      effective = &branches[g];
    } else {
      pass.fused = combine_weights(shared, branches[g]);
      effective = &pass.fused;
    }
    pass.fw = mlp_forward(*effective, gather_rows(x, rows));
    for (size_t r = 0; r < rows.size(); ++r) logits.at(rows[r], 0) = pass.fw.output.at(r, 0);
  }

  DenseMatrix labels(batch.size(), 1, 0.0);
  for (size_t r = 0; r < batch.size(); ++r) labels.at(r, 0) = data.instances[batch[r]].label;

  CeLoss ce = sigmoid_ce(logits, labels);  // throws on non-finite loss
  report.loss = ce.loss;

  // 3) backward + optimizer; skipped entirely at loss weight zero
  if (opts.loss_weight != 0.0) {
    if (opts.loss_weight != 1.0)
      for (double& v : ce.logit_grads.values) v *= opts.loss_weight;

    const bool fusion = uses_fusion();
    std::optional<MlpGradBuf> shared_grads;
    if (config.kind != ModelKind::shared_bottom) shared_grads.emplace(shared);
    std::vector<EmbeddingGrad> embed_grads(tables.size());
    std::vector<std::pair<size_t, MlpGradBuf>> branch_grads;  // (group, grads)

    for (size_t g = 0; g < slices.rows.size(); ++g) {
      const auto& rows = slices.rows[g];
      if (rows.empty()) continue;
      GroupPass& pass = passes[g];

      DenseMatrix upstream(rows.size(), 1, 0.0);
      for (size_t r = 0; r < rows.size(); ++r) upstream.at(r, 0) = ce.logit_grads.at(rows[r], 0);

      const MlpParams& effective = config.kind == ModelKind::dnn      ? shared
                                   : config.kind == ModelKind::shared_bottom ? branches[g]
                                                                             : pass.fused;
      MlpGrads grads = mlp_backward(effective, pass.fw.tape, upstream);

      if (fusion) {
        // product rule through W_f = W_s o W_b: the shared side accumulates
        // across every group, the branch side sees only its own instances
        MlpGradBuf bg(branches[g]);
        for (size_t l = 0; l < shared.layers.size(); ++l) {
          const auto& ws = shared.layers[l].weight.values;
          const auto& wb = branches[g].layers[l].weight.values;
          auto& dws = shared_grads->w[l].values;
          auto& dwb = bg.w[l].values;
          const auto& dwf = grads.weight_grads[l].values;
          for (size_t i = 0; i < dwf.size(); ++i) {
            dws[i] += dwf[i] * wb[i];
            dwb[i] = dwf[i] * ws[i];
          }
          auto& dbs = shared_grads->b[l].values;
          auto& dbb = bg.b[l].values;
          const auto& dbf = grads.bias_grads[l].values;
          for (size_t i = 0; i < dbf.size(); ++i) {
            dbs[i] += dbf[i];
            dbb[i] = dbf[i];
          }
        }
        branch_grads.emplace_back(g, std::move(bg));
      } else if (config.kind == ModelKind::dnn) {
        for (size_t l = 0; l < shared.layers.size(); ++l) {
          auto& dws = shared_grads->w[l].values;
          const auto& dwf = grads.weight_grads[l].values;
          for (size_t i = 0; i < dwf.size(); ++i) dws[i] += dwf[i];
          auto& dbs = shared_grads->b[l].values;
          const auto& dbf = grads.bias_grads[l].values;
          for (size_t i = 0; i < dbf.size(); ++i) dbs[i] += dbf[i];
        }
      } else {
        MlpGradBuf bg(branches[g]);
        for (size_t l = 0; l < branches[g].layers.size(); ++l) {
          bg.w[l] = std::move(grads.weight_grads[l]);
          bg.b[l] = std::move(grads.bias_grads[l]);
        }
        branch_grads.emplace_back(g, std::move(bg));
      }

      // embedding gradients flow only through this classification path
      for (size_t r = 0; r < rows.size(); ++r) {
        const Instance& inst = data.instances[batch[rows[r]]];
        embed_accumulate_grad(tables, inst.ids, grads.input_grad.row(r), embed_grads);
      }
    }

    if (shared_grads) adam_step_mlp(shared_adam, shared, *shared_grads);
    if (!opts.freeze_branches)
      for (auto& [g, bg] : branch_grads) adam_step_mlp(branch_adam[g], branches[g], bg);
    for (size_t f = 0; f < tables.size(); ++f) {
      if (embed_grads[f].empty()) continue;
      table_adam[f].begin_step();
      const size_t dim = tables[f].dim;
      for (const auto& [id, grad] : embed_grads[f]) {
        std::span<double> row(tables[f].vectors.row(id), dim);
        table_adam[f].update(static_cast<size_t>(id) * dim, row, grad);
      }
    }
  }

  ++step;
  report.batch_step = config.kind == ModelKind::adaptdhm ? centers.batch_step : step;
  return report;
}

ParamCounts Model::count_parameters() const {
  ParamCounts pc;
  pc.p_mlp = config.kind == ModelKind::shared_bottom ? branches.front().param_count() : shared.param_count();
  switch (config.kind) {
    case ModelKind::dnn: pc.mlp_copies = 1; break;
    case ModelKind::adaptdhm: pc.mlp_copies = config.routing.clusters + 1; break;
    case ModelKind::shared_bottom: pc.mlp_copies = config.domains; break;
    case ModelKind::star_by_domain: pc.mlp_copies = config.domains + 1; break;
  }
  pc.mlp_total = pc.p_mlp * pc.mlp_copies;
  for (const auto& t : tables) pc.embedding_total += t.vocab_size * t.dim;
  pc.total = pc.mlp_total + pc.embedding_total;
  return pc;
}

uint64_t Model::param_update_flops_per_step() const {
  // ~10 flops per touched parameter per Adam update; every MLP copy counts as
  // touched, which is the structural point: (K+1) copies against M.
  const ParamCounts pc = count_parameters();
  return 10ull * pc.mlp_total;
}

}  // namespace adaptdhm
