#include "adaptdhm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "adaptdhm/error.hpp"

namespace adaptdhm {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'H', 'M'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) fail("checkpoint: cannot open '" + path + "' for writing");
  }

  void u8(uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void matrix(const DenseMatrix& m) {
    u64(m.rows);
    u64(m.cols);
    for (double x : m.values) f64(x);
  }
  void close(const std::string& path) {
    out_.flush();
    if (!out_) fail("checkpoint: write failed for '" + path + "'");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) fail("checkpoint: cannot open '" + path + "'");
  }

  uint8_t u8() {
    const int c = in_.get();
    if (c == EOF) fail("checkpoint: truncated file '" + path_ + "'");
    return static_cast<uint8_t>(c);
  }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(u8()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const uint64_t n = u64();
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<uint64_t>(in_.gcount()) != n) fail("checkpoint: truncated string in '" + path_ + "'");
    return s;
  }
  std::vector<double> doubles() {
    const uint64_t n = u64();
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  DenseMatrix matrix() {
    DenseMatrix m;
    m.rows = u64();
    m.cols = u64();
    m.values.resize(m.rows * m.cols);
    for (auto& x : m.values) x = f64();
    return m;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

void write_mlp(Writer& w, const MlpParams& p) {
  w.u64(p.layers.size());
  for (const auto& l : p.layers) {
    w.u8(static_cast<uint8_t>(l.act));
    w.matrix(l.weight);
    w.matrix(l.bias);
  }
}

MlpParams read_mlp(Reader& r) {
  MlpParams p;
  const uint64_t n = r.u64();
  for (uint64_t i = 0; i < n; ++i) {
    MlpLayer l;
    l.act = static_cast<Activation>(r.u8());
    l.weight = r.matrix();
    l.bias = r.matrix();
    p.layers.push_back(std::move(l));
  }
  return p;
}

void write_adam(Writer& w, const AdamState& a) {
  const AdamConfig& c = a.config();
  w.f64(c.learning_rate);
  w.f64(c.beta1);
  w.f64(c.beta2);
  w.f64(c.epsilon);
  w.doubles(a.first_moment());
  w.doubles(a.second_moment());
  w.u64(a.steps());
}

AdamState read_adam(Reader& r) {
  AdamConfig c;
  c.learning_rate = r.f64();
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.epsilon = r.f64();
  std::vector<double> m = r.doubles();
  std::vector<double> v = r.doubles();
  const uint64_t steps = r.u64();
  AdamState a(m.size(), c);
  a.restore(std::move(m), std::move(v), steps);
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const std::string& config_echo) {
  Writer w(path);
  w.u8(kMagic[0]);
  w.u8(kMagic[1]);
  w.u8(kMagic[2]);
  w.u8(kMagic[3]);
  w.u32(kCheckpointVersion);

  const ModelConfig& c = model.config;
  w.u8(static_cast<uint8_t>(c.kind));
  w.u64(c.embedding_dim);
  w.u64(c.hidden.size());
  for (size_t h : c.hidden) w.u64(h);
  w.u64(c.routing.clusters);
  w.u64(c.routing.iterations);
  w.f64(c.routing.ewma_beta);
  w.f64(c.routing.init_sigma);
  w.u64(c.routing.seed);
  w.u64(c.routing_fields.size());
  for (const auto& f : c.routing_fields) w.str(f);
  w.u64(c.domains);
  w.f64(c.adam.learning_rate);
  w.f64(c.adam.beta1);
  w.f64(c.adam.beta2);
  w.f64(c.adam.epsilon);
  w.u64(c.seed);

  const DatasetSchema& s = model.schema;
  w.str(s.label_column);
  w.str(s.domain_column);
  w.str(s.session_column);
  w.u64(s.fields.size());
  for (const auto& f : s.fields) {
    w.str(f.name);
    w.u64(f.vocab);
  }

  w.u64(model.tables.size());
  for (size_t f = 0; f < model.tables.size(); ++f) {
    const EmbeddingTable& t = model.tables[f];
    w.str(t.field_name);
    w.u64(t.vocab_size);
    w.u64(t.dim);
    w.matrix(t.vectors);
    write_adam(w, model.table_adam[f]);
  }

  const bool has_shared = model.config.kind != ModelKind::shared_bottom;
  w.u8(has_shared ? 1 : 0);
  if (has_shared) {
    write_mlp(w, model.shared);
    write_adam(w, model.shared_adam);
  }

  w.u64(model.branches.size());
  for (size_t b = 0; b < model.branches.size(); ++b) {
    write_mlp(w, model.branches[b]);
    write_adam(w, model.branch_adam[b]);
  }

  const bool has_centers = model.config.kind == ModelKind::adaptdhm;
  w.u8(has_centers ? 1 : 0);
  if (has_centers) {
    w.u64(model.centers.k);
    w.u64(model.centers.dim);
    w.matrix(model.centers.centers);
    w.u64(model.centers.batch_step);
  }

  w.u64(model.routing_field_idx.size());
  for (size_t i : model.routing_field_idx) w.u64(i);
  w.u64(model.step);
  w.str(config_echo);
  w.close(path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  for (char& m : magic) m = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) fail("checkpoint: '" + path + "' is not a checkpoint file");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail("checkpoint: unsupported version " + std::to_string(version) + " in '" + path + "'");

  LoadedCheckpoint out;
  Model& m = out.model;

  m.config.kind = static_cast<ModelKind>(r.u8());
  m.config.embedding_dim = r.u64();
  m.config.hidden.resize(r.u64());
  for (auto& h : m.config.hidden) h = r.u64();
  m.config.routing.clusters = r.u64();
  m.config.routing.iterations = r.u64();
  m.config.routing.ewma_beta = r.f64();
  m.config.routing.init_sigma = r.f64();
  m.config.routing.seed = r.u64();
  m.config.routing_fields.resize(r.u64());
  for (auto& f : m.config.routing_fields) f = r.str();
  m.config.domains = r.u64();
  m.config.adam.learning_rate = r.f64();
  m.config.adam.beta1 = r.f64();
  m.config.adam.beta2 = r.f64();
  m.config.adam.epsilon = r.f64();
  m.config.seed = r.u64();

  m.schema.label_column = r.str();
  m.schema.domain_column = r.str();
  m.schema.session_column = r.str();
  m.schema.fields.resize(r.u64());
  for (auto& f : m.schema.fields) {
    f.name = r.str();
    f.vocab = r.u64();
  }

  const uint64_t n_tables = r.u64();
  for (uint64_t f = 0; f < n_tables; ++f) {
    EmbeddingTable t;
    t.field_name = r.str();
    t.vocab_size = r.u64();
    t.dim = r.u64();
    t.vectors = r.matrix();
    m.tables.push_back(std::move(t));
    m.table_adam.push_back(read_adam(r));
  }

  if (r.u8()) {
    m.shared = read_mlp(r);
    m.shared_adam = read_adam(r);
  }

  const uint64_t n_branches = r.u64();
  for (uint64_t b = 0; b < n_branches; ++b) {
    m.branches.push_back(read_mlp(r));
    m.branch_adam.push_back(read_adam(r));
  }

  if (r.u8()) {
    m.centers.k = r.u64();
    m.centers.dim = r.u64();
    m.centers.centers = r.matrix();
    m.centers.batch_step = r.u64();
  }

  m.routing_field_idx.resize(r.u64());
  for (auto& i : m.routing_field_idx) i = r.u64();
  m.step = r.u64();
  out.config_echo = r.str();
  return out;
}

}  // namespace adaptdhm
