// Command-line front end: generate / train / eval / inspect-centers / sweep-k.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adaptdhm/error.hpp"
#include "adaptdhm/experiment.hpp"

namespace {

using adaptdhm::ExperimentConfig;

// Flag values arrive as raw strings and flow through the same
// ExperimentConfig::set() path as config-file lines, so `--key value`
// always beats `key = value`.
struct Override {
  std::string config_key;
  std::string value;
};

void add_config_option(CLI::App* cmd, std::vector<Override>& overrides, const std::string& flag,
                       const std::string& config_key, const std::string& help) {
  cmd->add_option_function<std::string>(
         flag, [&overrides, config_key](const std::string& v) { overrides.push_back({config_key, v}); }, help)
      ->expected(1);
}

ExperimentConfig build_config(const std::string& config_path, const std::vector<Override>& overrides) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ExperimentConfig::from_file(config_path);
  for (const auto& o : overrides) cfg.set(o.config_key, o.value);
  return cfg;
}

std::vector<size_t> parse_k_list(const std::string& text) {
  std::vector<size_t> ks;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t pos = text.find(',', start);
    const std::string part = text.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    if (!part.empty()) ks.push_back(std::stoull(part));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return ks;
}

void write_or_print(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  out << text << "\n";
  if (!out) adaptdhm::fail("cannot write '" + out_path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AdaptDHM multi-distribution CTR model: training, evaluation and dataset tooling"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<Override> overrides;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file");
    add_config_option(cmd, overrides, "--seed", "seed", "RNG seed");
    add_config_option(cmd, overrides, "--out", "out_dir", "output directory");
    add_config_option(cmd, overrides, "--threads", "threads", "threads for read-only evaluation");
  };

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic multi-domain dataset");
  add_common(generate);
  add_config_option(generate, overrides, "--n-train", "synth_n_train", "training rows");
  add_config_option(generate, overrides, "--n-test", "synth_n_test", "test rows");
  add_config_option(generate, overrides, "--k-true", "synth_k_true", "planted cluster count");
  add_config_option(generate, overrides, "--domains", "synth_domains", "observed domain count");
  add_config_option(generate, overrides, "--separation", "synth_separation", "cluster separation scale");
  add_config_option(generate, overrides, "--label-noise", "synth_label_noise", "label flip probability");

  CLI::App* train = app.add_subcommand("train", "train a model and write checkpoint + report");
  add_common(train);
  add_config_option(train, overrides, "--train", "train_path", "training CSV");
  add_config_option(train, overrides, "--test", "test_path", "held-out CSV");
  add_config_option(train, overrides, "--model", "model", "adaptdhm | dnn | shared_bottom | star_by_domain");
  add_config_option(train, overrides, "--epochs", "epochs", "training epochs");
  add_config_option(train, overrides, "--k", "clusters", "cluster count K");
  add_config_option(train, overrides, "--batch-size", "batch_size", "batch size");
  add_config_option(train, overrides, "--learning-rate", "learning_rate", "Adam learning rate");
  add_config_option(train, overrides, "--embedding-dim", "embedding_dim", "embedding width per field");
  add_config_option(train, overrides, "--mlp-hidden", "mlp_hidden", "comma list of hidden widths");
  add_config_option(train, overrides, "--routing-fields", "routing_fields", "fields routed on (default all)");
  add_config_option(train, overrides, "--domains", "domains", "domain count M (0 = infer)");
  add_config_option(train, overrides, "--subsample", "subsample", "training subsample rate in (0,1]");

  std::string ckpt_path, data_path, out_path;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_path, "dataset CSV")->required();
  std::string eval_threads = "1";
  eval->add_option("--threads", eval_threads, "threads for evaluation");
  eval->add_option("--out", out_path, "write the JSON report here instead of stdout");

  CLI::App* inspect = app.add_subcommand("inspect-centers", "dump cluster centers and their cosine matrix");
  inspect->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  inspect->add_option("--out", out_path, "write JSON here instead of stdout");

  std::string k_list_text;
  CLI::App* sweep = app.add_subcommand("sweep-k", "train AdaptDHM for each K and tabulate AUC/GAUC");
  add_common(sweep);
  sweep->add_option("--k-list", k_list_text, "comma list of K values")->required();
  add_config_option(sweep, overrides, "--train", "train_path", "training CSV");
  add_config_option(sweep, overrides, "--test", "test_path", "held-out CSV");
  add_config_option(sweep, overrides, "--epochs", "epochs", "training epochs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const auto res = adaptdhm::run_generate(build_config(config_path, overrides));
      std::cout << "wrote " << res.n_train << " train rows to " << res.train_path << "\n"
                << "wrote " << res.n_test << " test rows to " << res.test_path << "\n"
                << "manifest: " << res.manifest_path << "\n";
    } else if (train->parsed()) {
      const auto res = adaptdhm::run_train(build_config(config_path, overrides));
      const auto& last = res.report.epochs.back();
      std::cout << "trained " << res.report.config_echo.at("model") << " for " << res.report.epochs.size()
                << " epoch(s), final loss " << last.mean_loss;
      if (last.eval.auc) std::cout << ", test AUC " << *last.eval.auc;
      if (last.eval.gauc) std::cout << ", test GAUC " << *last.eval.gauc;
      std::cout << "\ncheckpoint: " << res.report.checkpoint_path << "\n";
    } else if (eval->parsed()) {
      const auto report = adaptdhm::run_eval(ckpt_path, data_path, std::stoull(eval_threads));
      write_or_print(report.to_json(), out_path);
    } else if (inspect->parsed()) {
      write_or_print(adaptdhm::inspect_centers_json(ckpt_path), out_path);
    } else if (sweep->parsed()) {
      const auto ks = parse_k_list(k_list_text);
      const auto rows = adaptdhm::run_sweep_k(build_config(config_path, overrides), ks);
      for (const auto& row : rows)
        std::printf("K=%zu auc=%.6f gauc=%.6f seconds=%.2f\n", row.k, row.auc, row.gauc, row.seconds);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
