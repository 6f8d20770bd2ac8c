#pragma once

#include <map>
#include <string>
#include <vector>

#include "adaptdhm/checkpoint.hpp"
#include "adaptdhm/metrics.hpp"
#include "adaptdhm/model.hpp"
#include "adaptdhm/synth.hpp"

namespace adaptdhm {

// Everything a run needs, loadable from a flat `key = value` config file;
// command-line flags overwrite file values through the same set() path.
// Desk-scale defaults: the paper-scale MLP (512-256-128-64-32) and batch 2048
// stay one config line away.
struct ExperimentConfig {
  ModelKind kind = ModelKind::adaptdhm;
  uint64_t seed = 42;
  size_t epochs = 1;
  size_t batch_size = 1024;
  double learning_rate = 1e-3;
  size_t embedding_dim = 8;
  std::vector<size_t> hidden = {64, 32, 16};
  size_t clusters = 3;
  size_t routing_iterations = 3;
  double ewma_beta = 0.9;
  double init_sigma = 1.0;
  std::vector<std::string> routing_fields;  // empty -> all fields
  std::vector<FieldSpec> fields;            // defaults to the synthetic schema
  size_t domains = 0;                       // 0 -> infer from data
  std::string train_path;
  std::string test_path;
  std::string out_dir = "out";
  size_t threads = 1;    // read-only evaluation only
  double subsample = 1.0;

  // `generate` settings; the generator seed is the run seed
  size_t synth_k_true = 3;
  size_t synth_domains = 5;
  size_t synth_n_train = 100000;
  size_t synth_n_test = 20000;
  std::vector<SynthFieldSpec> synth_fields;  // empty -> generator default
  double synth_separation = 2.5;
  double synth_bias_scale = 2.0;
  double synth_label_noise = 0.05;

  ExperimentConfig();

  static ExperimentConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);  // throws on unknown keys / bad values
  void validate() const;

  std::map<std::string, std::string> echo() const;  // every key, serialized back to text form
  std::string echo_text() const;                    // reparsable `key = value` lines

  SynthConfig synth_config() const;
  ModelConfig model_config(size_t inferred_domains) const;
};

struct EpochReport {
  size_t epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
  std::vector<uint64_t> cluster_histogram;  // summed over the epoch's batches
  MetricReport eval;
};

struct RunReport {
  std::string version;
  std::map<std::string, std::string> config_echo;
  ParamCounts params;
  uint64_t update_flops_per_epoch = 0;
  std::vector<EpochReport> epochs;
  double total_seconds = 0.0;
  std::string checkpoint_path;

  std::string to_json() const;
};

std::string version_string();

// Prediction + ranking metrics on a dataset; purity/ARI included when the
// data carries planted clusters and the model routes. threads parallelizes
// the read-only forward passes, never the metric reduction.
MetricReport evaluate_model(const Model& model, const Dataset& data, size_t threads = 1);

// Orchestration used by the CLI (and tested directly). run_train writes
// checkpoint.bin and report.json into out_dir.
struct TrainResult {
  RunReport report;
  Model model;
  Dataset train;
  Dataset test;
};
TrainResult run_train(const ExperimentConfig& config);

MetricReport run_eval(const std::string& checkpoint_path, const std::string& data_path, size_t threads = 1);

// JSON view of an adaptdhm checkpoint's centers: K x dim values plus the
// K x K pairwise cosine matrix.
std::string inspect_centers_json(const std::string& checkpoint_path);

struct SweepRow {
  size_t k = 0;
  double auc = 0.0;
  double gauc = 0.0;
  double seconds = 0.0;
};
// One AdaptDHM training per K, shared data and seed; writes sweep.csv into
// out_dir and returns the rows.
std::vector<SweepRow> run_sweep_k(const ExperimentConfig& config, const std::vector<size_t>& k_list);

// `generate`: synthesizes train/test CSVs plus a manifest echoing the config.
struct GenerateResult {
  std::string train_path;
  std::string test_path;
  std::string manifest_path;
  size_t n_train = 0;
  size_t n_test = 0;
};
GenerateResult run_generate(const ExperimentConfig& config);

}  // namespace adaptdhm
