#include "adaptdhm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "adaptdhm/error.hpp"
#include "adaptdhm/loss.hpp"
#include "adaptdhm/rng.hpp"

namespace adaptdhm {

namespace {

// Fixed generator internals. The config's `separation` knob scales the
// cluster geometry and the logistic slope; everything else stays pinned so a
// config alone reproduces a dataset byte for byte.
constexpr size_t kPoolSize = 4;    // ids per (indicator field, group) and cluster sharing it
constexpr double kLeak = 0.02;     // chance an indicator id comes from a random cluster's pool
constexpr size_t kGenDim = 4;      // generator-side projection width per field
constexpr size_t kMinSession = 4;  // impressions per session in [4, 11]
constexpr size_t kSessionRange = 8;

// Each indicator field partitions the K_true clusters into G groups (a
// mixed-radix code over the indicator fields, G^n_ind >= K_true), draws one
// id pool per group and contributes a per-group bias to the label logit.
// Distinct codes give every cluster its own multi-field signature, which is
// what makes the planted structure recoverable from co-occurrence statistics
// rather than from a single base-rate axis.
struct GenModel {
  size_t groups = 1;  // G
  std::vector<size_t> indicator_fields;
  std::vector<size_t> pattern_fields;
  std::vector<std::vector<size_t>> group_of;              // [field][cluster] -> group (indicator fields)
  std::vector<std::vector<std::vector<uint32_t>>> pools;  // [field][group][slot]
  std::vector<DenseMatrix> gen_vectors;                   // [field] vocab x kGenDim
  std::vector<std::vector<double>> effects;               // [field] pattern effect per id
  std::vector<double> slope;                              // per cluster, magnitude = separation
  std::vector<std::vector<double>> pattern_weight;        // [cluster][pattern field] unit mixing vector
  std::vector<double> bias;                               // per cluster, sum of its groups' offsets
  DenseMatrix mixing;                                     // k_true x domains, rows sum to 1
};

GenModel build_gen_model(const SynthConfig& cfg, const std::vector<SynthFieldSpec>& fields) {
  GenModel gm;
  Rng rng(derive_seed(cfg.seed, "synth-params"));

  for (size_t f = 0; f < fields.size(); ++f)
    (fields[f].role == FieldRole::cluster_indicator ? gm.indicator_fields : gm.pattern_fields).push_back(f);

  const size_t n_ind = gm.indicator_fields.size();
  gm.groups = 1;
  if (n_ind > 0) {
    while (std::pow(static_cast<double>(gm.groups), static_cast<double>(n_ind)) <
           static_cast<double>(cfg.k_true))
      ++gm.groups;
  }

  gm.group_of.resize(fields.size());
  gm.bias.assign(cfg.k_true, 0.0);
  std::vector<size_t> digit_sum(cfg.k_true, 0);
  if (n_ind == cfg.k_true && cfg.k_true >= 2) {
    // One-vs-rest cyclic code: indicator field fi isolates cluster fi from
    // the rest. Every cluster then owns one un-diluted drift axis, which is
    // what lets co-occurrence statistics spread the clusters in as many
    // directions as there are fields.
    gm.groups = 2;
    for (size_t fi = 0; fi < n_ind; ++fi) {
      const size_t f = gm.indicator_fields[fi];
      gm.group_of[f].resize(cfg.k_true);
      double solo =
          -cfg.bias_scale + 2.0 * cfg.bias_scale * static_cast<double>(fi) / static_cast<double>(cfg.k_true - 1);
      if (std::fabs(solo) < 0.25 * cfg.bias_scale) solo = 0.4 * cfg.bias_scale;  // keep every cluster drifting
      for (size_t k = 0; k < cfg.k_true; ++k) {
        const size_t g = (k == fi) ? 0 : 1;
        gm.group_of[f][k] = g;
        digit_sum[k] += g;
        if (g == 0) gm.bias[k] += solo;
      }
    }
  } else {
    // Mixed-radix code: field fi holds digit fi of the cluster index in base
    // G, with a per-group bias offset.
    for (size_t fi = 0; fi < n_ind; ++fi) {
      const size_t f = gm.indicator_fields[fi];
      gm.group_of[f].resize(cfg.k_true);
      size_t radix = 1;
      for (size_t t = 0; t < fi; ++t) radix *= gm.groups;
      for (size_t k = 0; k < cfg.k_true; ++k) {
        const size_t g = (k / radix) % gm.groups;
        gm.group_of[f][k] = g;
        digit_sum[k] += g;
        gm.bias[k] += gm.groups == 1 ? 0.0
                                     : -cfg.bias_scale + 2.0 * cfg.bias_scale * static_cast<double>(g) /
                                           static_cast<double>(gm.groups - 1);
      }
    }
    if (n_ind == 0 && cfg.k_true > 1) {
      for (size_t k = 0; k < cfg.k_true; ++k) {
        gm.bias[k] =
            -cfg.bias_scale + 2.0 * cfg.bias_scale * static_cast<double>(k) / static_cast<double>(cfg.k_true - 1);
        digit_sum[k] = k;
      }
    }
  }

  // Each cluster ranks by its own direction over the pattern effects
  // (evenly spread on the circle for two pattern fields, alternating sign for
  // one). The same pattern ids therefore imply genuinely conflicting CTR in
  // different clusters, and no additive per-field shift can reconcile them.
  const size_t n_pat = gm.pattern_fields.size();
  for (size_t k = 0; k < cfg.k_true; ++k) {
    gm.slope.push_back(cfg.separation);
    std::vector<double> w(n_pat, 0.0);
    if (n_pat == 1) {
      w[0] = (k % 2 == 0) ? 1.0 : -1.0;
    } else if (n_pat >= cfg.k_true) {
      w[k % n_pat] = 1.0;  // each cluster ranks by its own pattern field
    } else {
      const double theta = 2.0 * 3.14159265358979323846 * static_cast<double>(k) / static_cast<double>(cfg.k_true);
      w[0] = std::cos(theta);
      w[1] = std::sin(theta);
    }
    gm.pattern_weight.push_back(std::move(w));
  }

  gm.pools.resize(fields.size());
  gm.gen_vectors.resize(fields.size());
  gm.effects.resize(fields.size());
  for (size_t f = 0; f < fields.size(); ++f) {
    const SynthFieldSpec& spec = fields[f];
    gm.gen_vectors[f] = DenseMatrix(spec.vocab, kGenDim);
    for (double& v : gm.gen_vectors[f].values) v = rng.normal();

    if (spec.role == FieldRole::cluster_indicator) {
      // pool size scales with the number of clusters drawing from the group,
      // keeping per-id traffic roughly uniform
      std::vector<size_t> members(gm.groups, 0);
      for (size_t k = 0; k < cfg.k_true; ++k) ++members[gm.group_of[f][k]];
      size_t needed = 0;
      for (size_t g = 0; g < gm.groups; ++g) needed += kPoolSize * std::max<size_t>(1, members[g]);
      if (spec.vocab < needed)
        fail("synth: indicator field '" + spec.name + "' vocab too small for " + std::to_string(gm.groups) +
             " cluster groups");
      std::unordered_set<uint32_t> used;  // distinct ids across this field's pools
      gm.pools[f].resize(gm.groups);
      for (size_t g = 0; g < gm.groups; ++g) {
        std::vector<double> mu(kGenDim);
        double norm2 = 0.0;
        for (double& v : mu) {
          v = rng.normal();
          norm2 += v * v;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : mu) v *= inv;

        const size_t pool_size = kPoolSize * std::max<size_t>(1, members[g]);
        for (size_t p = 0; p < pool_size; ++p) {
          uint32_t id;
          do {
            id = static_cast<uint32_t>(rng.below(spec.vocab));
          } while (!used.insert(id).second);
          gm.pools[f][g].push_back(id);
          double* vec = gm.gen_vectors[f].row(id);
          for (size_t t = 0; t < kGenDim; ++t) vec[t] += cfg.separation * mu[t];
        }
      }
    } else {
      gm.effects[f].resize(spec.vocab);
      for (double& v : gm.effects[f]) v = rng.normal();
    }
  }

  gm.mixing = DenseMatrix(cfg.k_true, cfg.domains, 0.0);
  for (size_t k = 0; k < cfg.k_true; ++k) {
    double sum = 0.0;
    for (size_t m = 0; m < cfg.domains; ++m) {
      const double w = std::exp(1.5 * rng.normal());
      gm.mixing.at(k, m) = w;
      sum += w;
    }
    for (size_t m = 0; m < cfg.domains; ++m) gm.mixing.at(k, m) /= sum;
  }
  return gm;
}

size_t sample_categorical(Rng& rng, const double* weights, size_t n) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return n - 1;
}

struct DrawResult {
  std::vector<RawRow> rows;
  Dataset dataset;
  DenseMatrix gen_embeddings;
  std::vector<double> true_ctr;
};

DrawResult draw_instances(const SynthConfig& cfg, const std::vector<SynthFieldSpec>& fields, const GenModel& gm,
                          size_t n, const char* stream, const char* session_prefix) {
  DrawResult out;
  out.dataset.schema = synth_schema(cfg);
  out.dataset.has_planted = true;
  out.gen_embeddings = DenseMatrix(n, kGenDim * fields.size(), 0.0);
  out.true_ctr.reserve(n);
  Rng rng(derive_seed(cfg.seed, stream));

  const double inv_sqrt_pat =
      gm.pattern_fields.empty() ? 0.0 : 1.0 / std::sqrt(static_cast<double>(gm.pattern_fields.size()));
  size_t emitted = 0;
  size_t user = 0;
  while (emitted < n) {
    const size_t k = rng.below(cfg.k_true);
    const size_t domain = sample_categorical(rng, gm.mixing.row(k), cfg.domains);
    const std::string session = std::string(session_prefix) + std::to_string(user);
    const uint32_t session_idx = static_cast<uint32_t>(out.dataset.session_names.size());
    out.dataset.session_names.push_back(session);
    ++user;

    const size_t session_len = kMinSession + rng.below(kSessionRange);
    for (size_t s = 0; s < session_len && emitted < n; ++s) {
      RawRow row;
      row.domain = static_cast<uint32_t>(domain);
      row.session = session;
      row.planted_cluster = static_cast<int32_t>(k);

      Instance inst;
      inst.domain = row.domain;
      inst.session = session_idx;
      inst.planted_cluster = row.planted_cluster;
      inst.ids.resize(fields.size());

      double score = 0.0;
      size_t pat_index = 0;
      for (size_t f = 0; f < fields.size(); ++f) {
        const SynthFieldSpec& spec = fields[f];
        uint32_t raw;
        if (spec.role == FieldRole::cluster_indicator) {
          const size_t from = rng.bernoulli(kLeak) ? rng.below(cfg.k_true) : k;
          const auto& pool = gm.pools[f][gm.group_of[f][from]];
          raw = pool[rng.below(pool.size())];
        } else {
          raw = static_cast<uint32_t>(rng.below(spec.vocab));
          score += gm.pattern_weight[k][pat_index] * gm.effects[f][raw] * inv_sqrt_pat;
          ++pat_index;
        }
        row.raw_values.push_back(std::to_string(raw));
        inst.ids[f] = hash_feature(spec.name, row.raw_values.back(), spec.vocab);
        const double* vec = gm.gen_vectors[f].row(raw);
        double* dst = out.gen_embeddings.row(emitted) + f * kGenDim;
        for (size_t t = 0; t < kGenDim; ++t) dst[t] = vec[t];
      }

      const double p = stable_sigmoid(gm.slope[k] * score + gm.bias[k]);
      out.true_ctr.push_back(p);
      uint8_t label = rng.bernoulli(p) ? 1 : 0;
      if (cfg.label_noise > 0.0 && rng.bernoulli(cfg.label_noise)) label = 1 - label;
      row.label = label;
      inst.label = label;

      out.rows.push_back(std::move(row));
      out.dataset.instances.push_back(std::move(inst));
      ++emitted;
    }
  }
  return out;
}

std::vector<double> compute_expected_ctr(const SynthConfig& cfg, const std::vector<SynthFieldSpec>& fields,
                                         const GenModel& gm) {
  std::vector<double> expected(cfg.k_true, 0.0);
  const size_t npat = gm.pattern_fields.size();
  const double inv_sqrt_pat = npat == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(npat));

  uint64_t combos = 1;
  for (size_t f : gm.pattern_fields) combos *= fields[f].vocab;

  for (size_t k = 0; k < cfg.k_true; ++k) {
    // per-cluster score distribution (each cluster mixes the effects with its
    // own weights)
    std::vector<double> scores;
    if (npat == 0) {
      scores.push_back(0.0);
    } else if (combos <= 4'000'000ull) {
      // exact enumeration over the uniform product distribution of pattern ids
      scores.assign(1, 0.0);
      for (size_t pi = 0; pi < npat; ++pi) {
        const size_t f = gm.pattern_fields[pi];
        std::vector<double> next;
        next.reserve(scores.size() * fields[f].vocab);
        for (const double s : scores)
          for (const double e : gm.effects[f])
            next.push_back(s + gm.pattern_weight[k][pi] * e * inv_sqrt_pat);
        scores = std::move(next);
      }
    } else {
      Rng rng(derive_seed(cfg.seed, "synth-ctr"));
      scores.resize(1'000'000);
      for (double& s : scores) {
        double acc = 0.0;
        for (size_t pi = 0; pi < npat; ++pi)
          acc += gm.pattern_weight[k][pi] * gm.effects[gm.pattern_fields[pi]][rng.below(fields[gm.pattern_fields[pi]].vocab)] *
                 inv_sqrt_pat;
        s = acc;
      }
    }
    double mean = 0.0;
    for (const double s : scores) mean += stable_sigmoid(gm.slope[k] * s + gm.bias[k]);
    mean /= static_cast<double>(scores.size());
    expected[k] = mean * (1.0 - cfg.label_noise) + (1.0 - mean) * cfg.label_noise;
  }
  return expected;
}

}  // namespace

std::vector<SynthFieldSpec> default_synth_fields() {
  return {{"c0", 1000, FieldRole::cluster_indicator},
          {"c1", 1000, FieldRole::cluster_indicator},
          {"c2", 1000, FieldRole::cluster_indicator},
          {"p0", 1000, FieldRole::pattern},
          {"p1", 1000, FieldRole::pattern}};
}

DatasetSchema synth_schema(const SynthConfig& config) {
  DatasetSchema schema;
  const auto fields = config.fields.empty() ? default_synth_fields() : config.fields;
  for (const auto& f : fields) schema.fields.push_back({f.name, f.vocab});
  schema.validate();
  return schema;
}

SynthResult synth_generate(const SynthConfig& config) {
  require(config.k_true >= 1, "synth: k_true must be >= 1");
  require(config.domains >= 1, "synth: domains must be >= 1");
  require(config.separation > 0.0, "synth: separation must be positive");
  require(config.bias_scale > 0.0, "synth: bias_scale must be positive");
  require(config.label_noise >= 0.0 && config.label_noise < 0.5, "synth: label_noise must be in [0, 0.5)");
  require(config.n_train >= 1 && config.n_test >= 1, "synth: need at least one train and test instance");

  const auto fields = config.fields.empty() ? default_synth_fields() : config.fields;
  const GenModel gm = build_gen_model(config, fields);

  SynthResult out;
  DrawResult train = draw_instances(config, fields, gm, config.n_train, "synth-train", "u");
  DrawResult test = draw_instances(config, fields, gm, config.n_test, "synth-test", "v");
  out.train = std::move(train.dataset);
  out.train_rows = std::move(train.rows);
  out.train_gen_embeddings = std::move(train.gen_embeddings);
  out.train_true_ctr = std::move(train.true_ctr);
  out.test = std::move(test.dataset);
  out.test_rows = std::move(test.rows);
  out.expected_ctr = compute_expected_ctr(config, fields, gm);
  return out;
}

}  // namespace adaptdhm
