#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaptdhm/data.hpp"
#include "adaptdhm/dense_matrix.hpp"

namespace adaptdhm {

enum class FieldRole : uint8_t {
  cluster_indicator,  // ids drawn from small per-cluster pools; carries the cluster geometry
  pattern             // ids drawn uniformly, identically in every cluster; carries the ranking signal
};

struct SynthFieldSpec {
  std::string name;
  size_t vocab = 1000;
  FieldRole role = FieldRole::pattern;
};

// Multi-domain generator with K_true planted latent clusters. Observed
// domains are a many-to-few mixture of clusters; labels come from
// cluster-specific logistic functions that genuinely conflict (the slope sign
// alternates per cluster, so the same pattern features imply opposite CTR
// moves in different clusters).
struct SynthConfig {
  size_t k_true = 3;
  size_t domains = 5;  // M observed domains
  size_t n_train = 100000;
  size_t n_test = 20000;
  std::vector<SynthFieldSpec> fields;  // empty -> default 2 indicator + 2 pattern fields, vocab 1000
  // Scales both the indicator-field cluster geometry and the logistic slope
  // magnitude; labels become deterministic in the separation -> inf limit.
  double separation = 2.5;
  // Spread of the per-cluster base-rate offsets. Large values make clusters
  // easy to tell apart from co-occurrence statistics alone; small values put
  // most of the ranking signal into the conflicting per-cluster slopes.
  double bias_scale = 2.0;
  double label_noise = 0.05;  // probability of flipping the drawn label
  uint64_t seed = 1;
};

struct SynthResult {
  Dataset train;
  Dataset test;
  std::vector<RawRow> train_rows;  // raw strings, exactly what write_dataset_csv persists
  std::vector<RawRow> test_rows;

  // Generator-side random projection of each train instance (concatenated
  // per-field id vectors). Calibration only: brute-force k-means on these
  // rows must recover the planted clusters.
  DenseMatrix train_gen_embeddings;
  // Pre-noise Bernoulli parameter of each train instance.
  std::vector<double> train_true_ctr;
  // Per-cluster expected CTR including label noise (exact enumeration over
  // pattern ids when feasible, Monte Carlo otherwise).
  std::vector<double> expected_ctr;
};

DatasetSchema synth_schema(const SynthConfig& config);
std::vector<SynthFieldSpec> default_synth_fields();

SynthResult synth_generate(const SynthConfig& config);

}  // namespace adaptdhm
