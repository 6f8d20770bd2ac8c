#include "adaptdhm/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "adaptdhm/error.hpp"
#include "adaptdhm/rng.hpp"

#ifndef ADAPTDHM_GIT_REV
#define ADAPTDHM_GIT_REV "unknown"
#endif

namespace adaptdhm {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (start <= s.size()) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(trim(s.substr(start)));
      break;
    }
    parts.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  if (!parts.empty() && parts.back().empty()) parts.pop_back();
  return parts;
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
  uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) fail("config: key '" + key + "' needs an integer, got '" + v + "'");
  return out;
}

double parse_f64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::vector<size_t> parse_size_list(const std::string& v, const std::string& key) {
  std::vector<size_t> out;
  for (const auto& part : split(v, ','))
    out.push_back(static_cast<size_t>(parse_u64(part, key)));
  return out;
}

std::vector<FieldSpec> parse_fields(const std::string& v) {
  std::vector<FieldSpec> out;
  for (const auto& part : split(v, ',')) {
    const auto bits = split(part, ':');
    if (bits.size() != 2) fail("config: field spec '" + part + "' must be name:vocab");
    out.push_back({bits[0], static_cast<size_t>(parse_u64(bits[1], "fields"))});
  }
  return out;
}

std::vector<SynthFieldSpec> parse_synth_fields(const std::string& v) {
  std::vector<SynthFieldSpec> out;
  for (const auto& part : split(v, ',')) {
    const auto bits = split(part, ':');
    if (bits.size() != 3) fail("config: synth field spec '" + part + "' must be name:vocab:role");
    FieldRole role;
    if (bits[2] == "indicator")
      role = FieldRole::cluster_indicator;
    else if (bits[2] == "pattern")
      role = FieldRole::pattern;
    else
      fail("config: synth field role '" + bits[2] + "' must be indicator or pattern");
    out.push_back({bits[0], static_cast<size_t>(parse_u64(bits[1], "synth_fields")), role});
  }
  return out;
}

std::string fields_text(const std::vector<FieldSpec>& fields) {
  std::string out;
  for (const auto& f : fields) {
    if (!out.empty()) out += ',';
    out += f.name + ':' + std::to_string(f.vocab);
  }
  return out;
}

std::string synth_fields_text(const std::vector<SynthFieldSpec>& fields) {
  std::string out;
  for (const auto& f : fields) {
    if (!out.empty()) out += ',';
    out += f.name + ':' + std::to_string(f.vocab) + ':' +
           (f.role == FieldRole::cluster_indicator ? "indicator" : "pattern");
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

nlohmann::json metric_json(const MetricReport& r) { return nlohmann::json::parse(r.to_json()); }

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (const auto& f : default_synth_fields()) fields.push_back({f.name, f.vocab});
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const size_t eq = text.find('=');
    if (eq == std::string::npos)
      fail("config: line " + std::to_string(line_no) + " is not 'key = value': '" + text + "'");
    cfg.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "model") {
    const auto k = model_kind_from_string(value);
    if (!k) fail("config: unknown model '" + value + "' (adaptdhm, dnn, shared_bottom, star_by_domain)");
    kind = *k;
  } else if (key == "seed") {
    seed = parse_u64(value, key);
  } else if (key == "epochs") {
    epochs = parse_u64(value, key);
  } else if (key == "batch_size") {
    batch_size = parse_u64(value, key);
  } else if (key == "learning_rate") {
    learning_rate = parse_f64(value, key);
  } else if (key == "embedding_dim") {
    embedding_dim = parse_u64(value, key);
  } else if (key == "mlp_hidden") {
    hidden = parse_size_list(value, key);
  } else if (key == "clusters") {
    clusters = parse_u64(value, key);
  } else if (key == "routing_iterations") {
    routing_iterations = parse_u64(value, key);
  } else if (key == "ewma_beta") {
    ewma_beta = parse_f64(value, key);
  } else if (key == "init_sigma") {
    init_sigma = parse_f64(value, key);
  } else if (key == "routing_fields") {
    routing_fields = split(value, ',');
  } else if (key == "fields") {
    fields = parse_fields(value);
  } else if (key == "domains") {
    domains = parse_u64(value, key);
  } else if (key == "train_path") {
    train_path = value;
  } else if (key == "test_path") {
    test_path = value;
  } else if (key == "out_dir") {
    out_dir = value;
  } else if (key == "threads") {
    threads = parse_u64(value, key);
  } else if (key == "subsample") {
    subsample = parse_f64(value, key);
  } else if (key == "synth_k_true") {
    synth_k_true = parse_u64(value, key);
  } else if (key == "synth_domains") {
    synth_domains = parse_u64(value, key);
  } else if (key == "synth_n_train") {
    synth_n_train = parse_u64(value, key);
  } else if (key == "synth_n_test") {
    synth_n_test = parse_u64(value, key);
  } else if (key == "synth_fields") {
    synth_fields = parse_synth_fields(value);
  } else if (key == "synth_separation") {
    synth_separation = parse_f64(value, key);
  } else if (key == "synth_bias_scale") {
    synth_bias_scale = parse_f64(value, key);
  } else if (key == "synth_label_noise") {
    synth_label_noise = parse_f64(value, key);
  } else {
    fail("config: unknown key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  require(epochs >= 1, "config: epochs must be >= 1");
  require(batch_size >= 1, "config: batch_size must be >= 1");
  require(learning_rate > 0.0, "config: learning_rate must be positive");
  require(embedding_dim >= 1, "config: embedding_dim must be >= 1");
  require(!hidden.empty(), "config: mlp_hidden must not be empty");
  for (size_t h : hidden) require(h >= 1, "config: mlp_hidden entries must be >= 1");
  require(threads >= 1, "config: threads must be >= 1");
  require(subsample > 0.0 && subsample <= 1.0, "config: subsample must be in (0,1]");
  if (kind == ModelKind::adaptdhm) {
    require(clusters >= 1, "config: clusters must be >= 1");
    require(routing_iterations >= 1, "config: routing_iterations must be >= 1");
    require(ewma_beta >= 0.0 && ewma_beta < 1.0, "config: ewma_beta must be in [0,1)");
    require(init_sigma > 0.0, "config: init_sigma must be positive");
  }
  require(!fields.empty(), "config: fields must not be empty");
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::map<std::string, std::string> e;
  e["model"] = std::string(to_string(kind));
  e["seed"] = std::to_string(seed);
  e["epochs"] = std::to_string(epochs);
  e["batch_size"] = std::to_string(batch_size);
  e["learning_rate"] = fmt_double(learning_rate);
  e["embedding_dim"] = std::to_string(embedding_dim);
  std::string h;
  for (size_t v : hidden) {
    if (!h.empty()) h += ',';
    h += std::to_string(v);
  }
  e["mlp_hidden"] = h;
  e["clusters"] = std::to_string(clusters);
  e["routing_iterations"] = std::to_string(routing_iterations);
  e["ewma_beta"] = fmt_double(ewma_beta);
  e["init_sigma"] = fmt_double(init_sigma);
  e["routing_fields"] = join(routing_fields);
  e["fields"] = fields_text(fields);
  e["domains"] = std::to_string(domains);
  e["train_path"] = train_path;
  e["test_path"] = test_path;
  e["out_dir"] = out_dir;
  e["threads"] = std::to_string(threads);
  e["subsample"] = fmt_double(subsample);
  e["synth_k_true"] = std::to_string(synth_k_true);
  e["synth_domains"] = std::to_string(synth_domains);
  e["synth_n_train"] = std::to_string(synth_n_train);
  e["synth_n_test"] = std::to_string(synth_n_test);
  e["synth_fields"] = synth_fields_text(synth_fields.empty() ? default_synth_fields() : synth_fields);
  e["synth_separation"] = fmt_double(synth_separation);
  e["synth_bias_scale"] = fmt_double(synth_bias_scale);
  e["synth_label_noise"] = fmt_double(synth_label_noise);
  return e;
}

std::string ExperimentConfig::echo_text() const {
  std::string out;
  for (const auto& [k, v] : echo()) out += k + " = " + v + "\n";
  return out;
}

SynthConfig ExperimentConfig::synth_config() const {
  SynthConfig sc;
  sc.k_true = synth_k_true;
  sc.domains = synth_domains;
  sc.n_train = synth_n_train;
  sc.n_test = synth_n_test;
  sc.fields = synth_fields;
  sc.separation = synth_separation;
  sc.bias_scale = synth_bias_scale;
  sc.label_noise = synth_label_noise;
  sc.seed = seed;
  return sc;
}

ModelConfig ExperimentConfig::model_config(size_t inferred_domains) const {
  ModelConfig mc;
  mc.kind = kind;
  mc.embedding_dim = embedding_dim;
  mc.hidden = hidden;
  mc.routing.clusters = clusters;
  mc.routing.iterations = routing_iterations;
  mc.routing.ewma_beta = ewma_beta;
  mc.routing.init_sigma = init_sigma;
  mc.routing_fields = routing_fields;
  mc.domains = inferred_domains;
  mc.adam.learning_rate = learning_rate;
  mc.seed = seed;
  return mc;
}

std::string version_string() { return std::string("adaptdhm 0.1.0+") + ADAPTDHM_GIT_REV; }

MetricReport evaluate_model(const Model& model, const Dataset& data, size_t threads) {
  model.check_compatible(data);
  require(data.size() > 0, "evaluate: empty dataset");

  const size_t n = data.size();
  std::vector<double> probs(n, 0.0);
  if (threads <= 1) {
    probs = model.predict_all(data);
  } else {
    const size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> workers;
    for (size_t t = 0; t < threads; ++t) {
      const size_t lo = t * chunk;
      const size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back([&, lo, hi]() {
        std::vector<uint32_t> idx(hi - lo);
        for (size_t i = lo; i < hi; ++i) idx[i - lo] = static_cast<uint32_t>(i);
        const std::vector<double> p = model.predict(data, idx);
        std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(lo));
      });
    }
    for (auto& w : workers) w.join();
  }

  std::vector<EvalRecord> records(n);
  for (size_t i = 0; i < n; ++i)
    records[i] = {probs[i], data.instances[i].label, data.instances[i].session};

  MetricReport report;
  report.auc = auc(records);
  if (const auto g = gauc(records)) {
    report.gauc = g->value;
    report.sessions_used = g->sessions_used;
    report.sessions_skipped = g->sessions_skipped;
  } else {
    report.sessions_skipped = data.session_names.size();
  }

  std::map<uint32_t, std::vector<EvalRecord>> by_domain;
  for (size_t i = 0; i < n; ++i) by_domain[data.instances[i].domain].push_back(records[i]);
  for (const auto& [d, recs] : by_domain)
    if (const auto a = auc(recs)) report.per_domain_auc[d] = *a;

  if (data.has_planted && model.config.kind == ModelKind::adaptdhm) {
    std::vector<uint32_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = static_cast<uint32_t>(i);
    const std::vector<uint32_t> assigned = model.route_assign(data, idx);
    std::vector<uint32_t> planted(n, 0);
    for (size_t i = 0; i < n; ++i)
      planted[i] = static_cast<uint32_t>(std::max<int32_t>(0, data.instances[i].planted_cluster));
    report.purity = cluster_purity(assigned, planted);
    report.ari = adjusted_rand_index(assigned, planted);
  }
  return report;
}

namespace {

Dataset subsample_dataset(const Dataset& ds, double rate, uint64_t seed) {
  if (rate >= 1.0) return ds;
  Dataset out;
  out.schema = ds.schema;
  out.session_names = ds.session_names;
  out.has_planted = ds.has_planted;
  for (const uint32_t i : subsample_indices(ds.size(), rate, seed)) out.instances.push_back(ds.instances[i]);
  return out;
}

}  // namespace

TrainResult run_train(const ExperimentConfig& config) {
  config.validate();
  require(!config.train_path.empty() && !config.test_path.empty(),
          "train: train_path and test_path are required");

  DatasetSchema schema;
  schema.fields = config.fields;
  schema.validate();

  TrainResult result;
  result.train = subsample_dataset(parse_dataset(config.train_path, schema), config.subsample, config.seed);
  result.test = parse_dataset(config.test_path, schema);
  require(result.train.size() > 0, "train: empty training set");
  require(result.test.size() > 0, "train: empty test set");

  size_t domains = config.domains;
  if (domains == 0) domains = std::max(result.train.domain_count(), result.test.domain_count());

  result.model = Model::build(config.model_config(domains), schema);

  RunReport& report = result.report;
  report.version = version_string();
  report.config_echo = config.echo();
  report.params = result.model.count_parameters();
  const size_t steps_per_epoch = (result.train.size() + config.batch_size - 1) / config.batch_size;
  report.update_flops_per_epoch = result.model.param_update_flops_per_step() * steps_per_epoch;

  const auto total_start = Clock::now();
  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    EpochReport er;
    er.epoch = epoch;
    er.cluster_histogram.assign(result.model.group_count(), 0);

    const auto batches =
        make_batches(result.train.size(), config.batch_size, derive_seed(config.seed, "shuffle", epoch), true);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
      const TrainStepReport step = result.model.train_step(result.train, batch);
      loss_sum += step.loss * static_cast<double>(batch.size());
      for (size_t g = 0; g < step.cluster_histogram.size(); ++g)
        er.cluster_histogram[g] += step.cluster_histogram[g];
    }
    er.mean_loss = loss_sum / static_cast<double>(result.train.size());
    er.eval = evaluate_model(result.model, result.test, config.threads);
    er.seconds = elapsed_seconds(epoch_start);
    report.epochs.push_back(std::move(er));
  }
  report.total_seconds = elapsed_seconds(total_start);

  std::filesystem::create_directories(config.out_dir);
  report.checkpoint_path = (std::filesystem::path(config.out_dir) / "checkpoint.bin").string();
  save_checkpoint(report.checkpoint_path, result.model, config.echo_text());
  std::ofstream rep(std::filesystem::path(config.out_dir) / "report.json", std::ios::binary);
  rep << report.to_json() << "\n";
  if (!rep) fail("train: cannot write report.json in '" + config.out_dir + "'");
  return result;
}

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["config"] = config_echo;
  j["parameter_counts"] = {{"p_mlp", params.p_mlp},
                           {"mlp_copies", params.mlp_copies},
                           {"mlp_total", params.mlp_total},
                           {"embedding_total", params.embedding_total},
                           {"total", params.total}};
  j["update_flops_per_epoch"] = update_flops_per_epoch;
  j["checkpoint"] = checkpoint_path;
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& e : epochs) {
    nlohmann::json je;
    je["epoch"] = e.epoch;
    je["mean_loss"] = e.mean_loss;
    je["seconds"] = e.seconds;
    je["cluster_histogram"] = e.cluster_histogram;
    je["eval"] = metric_json(e.eval);
    eps.push_back(std::move(je));
  }
  j["epochs"] = eps;
  j["total_seconds"] = total_seconds;
  return j.dump(2);
}

MetricReport run_eval(const std::string& checkpoint_path, const std::string& data_path, size_t threads) {
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset data = parse_dataset(data_path, ckpt.model.schema);
  return evaluate_model(ckpt.model, data, threads);
}

std::string inspect_centers_json(const std::string& checkpoint_path) {
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.model.config.kind != ModelKind::adaptdhm)
    fail("inspect-centers: checkpoint holds a '" + std::string(to_string(ckpt.model.config.kind)) +
         "' model, which has no cluster centers");

  const ClusterCenters& cc = ckpt.model.centers;
  nlohmann::json j;
  j["k"] = cc.k;
  j["dim"] = cc.dim;
  j["batch_step"] = cc.batch_step;
  nlohmann::json centers = nlohmann::json::array();
  for (size_t row = 0; row < cc.k; ++row) {
    nlohmann::json c = nlohmann::json::array();
    for (size_t t = 0; t < cc.dim; ++t) c.push_back(cc.centers.at(row, t));
    centers.push_back(std::move(c));
  }
  j["centers"] = centers;
  nlohmann::json cosine = nlohmann::json::array();
  for (size_t a = 0; a < cc.k; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (size_t b = 0; b < cc.k; ++b) {
      double dot = 0.0;
      for (size_t t = 0; t < cc.dim; ++t) dot += cc.centers.at(a, t) * cc.centers.at(b, t);
      row.push_back(dot);
    }
    cosine.push_back(std::move(row));
  }
  j["cosine"] = cosine;
  return j.dump(2);
}

std::vector<SweepRow> run_sweep_k(const ExperimentConfig& config, const std::vector<size_t>& k_list) {
  require(!k_list.empty(), "sweep-k: k list must not be empty");
  std::vector<SweepRow> rows;
  for (const size_t k : k_list) {
    ExperimentConfig sub = config;
    sub.kind = ModelKind::adaptdhm;
    sub.clusters = k;
    sub.out_dir = (std::filesystem::path(config.out_dir) / ("k" + std::to_string(k))).string();
    const TrainResult res = run_train(sub);
    const MetricReport& eval = res.report.epochs.back().eval;
    SweepRow row;
    row.k = k;
    row.auc = eval.auc.value_or(std::nan(""));
    row.gauc = eval.gauc.value_or(std::nan(""));
    row.seconds = res.report.total_seconds;
    rows.push_back(row);
  }
  std::filesystem::create_directories(config.out_dir);
  std::ofstream csv(std::filesystem::path(config.out_dir) / "sweep.csv", std::ios::binary);
  csv << "k,auc,gauc,seconds\n";
  for (const auto& row : rows)
    csv << row.k << ',' << fmt_double(row.auc) << ',' << fmt_double(row.gauc) << ',' << fmt_double(row.seconds)
        << '\n';
  if (!csv) fail("sweep-k: cannot write sweep.csv in '" + config.out_dir + "'");
  return rows;
}

GenerateResult run_generate(const ExperimentConfig& config) {
  const SynthConfig sc = config.synth_config();
  const SynthResult synth = synth_generate(sc);

  std::filesystem::create_directories(config.out_dir);
  GenerateResult out;
  out.train_path = (std::filesystem::path(config.out_dir) / "train.csv").string();
  out.test_path = (std::filesystem::path(config.out_dir) / "test.csv").string();
  out.manifest_path = (std::filesystem::path(config.out_dir) / "manifest.json").string();
  out.n_train = synth.train.size();
  out.n_test = synth.test.size();

  write_dataset_csv(out.train_path, synth.train.schema, synth.train_rows, true);
  write_dataset_csv(out.test_path, synth.test.schema, synth.test_rows, true);

  nlohmann::json j;
  j["synth_config"] = {{"k_true", sc.k_true},
                       {"domains", sc.domains},
                       {"n_train", sc.n_train},
                       {"n_test", sc.n_test},
                       {"fields", synth_fields_text(sc.fields.empty() ? default_synth_fields() : sc.fields)},
                       {"separation", sc.separation},
                       {"bias_scale", sc.bias_scale},
                       {"label_noise", sc.label_noise},
                       {"seed", sc.seed}};
  j["train_path"] = out.train_path;
  j["test_path"] = out.test_path;
  j["n_train"] = out.n_train;
  j["n_test"] = out.n_test;
  j["expected_ctr_per_cluster"] = synth.expected_ctr;
  j["version"] = version_string();
  std::ofstream mf(out.manifest_path, std::ios::binary);
  mf << j.dump(2) << "\n";
  if (!mf) fail("generate: cannot write manifest '" + out.manifest_path + "'");
  return out;
}

}  // namespace adaptdhm
