#include "adaptdhm/data.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "adaptdhm/error.hpp"
#include "adaptdhm/hash.hpp"
#include "adaptdhm/rng.hpp"

namespace adaptdhm {

size_t DatasetSchema::field_index(std::string_view name) const {
  for (size_t i = 0; i < fields.size(); ++i)
    if (fields[i].name == name) return i;
  fail("schema: unknown field '" + std::string(name) + "'");
}

void DatasetSchema::validate() const {
  require(!fields.empty(), "schema: at least one feature field required");
  std::unordered_set<std::string> seen;
  for (const auto& f : fields) {
    if (f.vocab < 2) fail("schema: field '" + f.name + "' needs vocab >= 2");
    if (!seen.insert(f.name).second) fail("schema: duplicate field name '" + f.name + "'");
  }
}

size_t Dataset::domain_count() const {
  size_t m = 0;
  for (const auto& inst : instances) m = std::max(m, static_cast<size_t>(inst.domain) + 1);
  return m;
}

uint32_t hash_feature(std::string_view field, std::string_view raw, size_t vocab) {
  uint64_t h = fnv1a64(field);
  h = fnv1a64(":", h);
  h = fnv1a64(raw, h);
  return static_cast<uint32_t>(h % static_cast<uint64_t>(vocab));
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

uint64_t parse_uint(std::string_view s, const char* what, size_t line_no) {
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(std::string("parse: bad ") + what + " '" + std::string(s) + "' at line " + std::to_string(line_no));
  return v;
}

}  // namespace

Dataset parse_dataset(const std::string& path, const DatasetSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) fail("parse: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail("parse: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> expected = {schema.label_column, schema.domain_column, schema.session_column};
  for (const auto& f : schema.fields) expected.push_back(f.name);

  const auto header = split_csv_line(line);
  bool with_planted = false;
  if (header.size() == expected.size() + 1 && header.back() == "planted_cluster") {
    with_planted = true;
  } else if (header.size() != expected.size()) {
    fail("parse: header has " + std::to_string(header.size()) + " columns, schema expects " +
         std::to_string(expected.size()) + " in '" + path + "'");
  }
  for (size_t i = 0; i < expected.size(); ++i)
    if (header[i] != expected[i])
      fail("parse: header column " + std::to_string(i) + " is '" + std::string(header[i]) + "', expected '" +
           expected[i] + "'");

  Dataset ds;
  ds.schema = schema;
  ds.has_planted = with_planted;
  std::unordered_map<std::string, uint32_t> session_ids;

  const size_t ncols = expected.size() + (with_planted ? 1 : 0);
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != ncols)
      fail("parse: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " columns, expected " +
           std::to_string(ncols));

    Instance inst;
    const uint64_t label = parse_uint(cells[0], "label", line_no);
    if (label > 1) fail("parse: label not in {0,1} at line " + std::to_string(line_no));
    inst.label = static_cast<uint8_t>(label);
    inst.domain = static_cast<uint32_t>(parse_uint(cells[1], "domain_id", line_no));

    const std::string session(cells[2]);
    const auto [it, inserted] = session_ids.try_emplace(session, static_cast<uint32_t>(ds.session_names.size()));
    if (inserted) ds.session_names.push_back(session);
    inst.session = it->second;

    inst.ids.resize(schema.fields.size());
    for (size_t f = 0; f < schema.fields.size(); ++f)
      inst.ids[f] = hash_feature(schema.fields[f].name, cells[3 + f], schema.fields[f].vocab);

    if (with_planted) inst.planted_cluster = static_cast<int32_t>(parse_uint(cells.back(), "planted_cluster", line_no));
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

void write_dataset_csv(const std::string& path, const DatasetSchema& schema, const std::vector<RawRow>& rows,
                       bool with_planted) {
  std::ofstream out(path, std::ios::binary);  // binary: byte-identical output on every platform
  if (!out) fail("write: cannot open '" + path + "'");
  out << schema.label_column << ',' << schema.domain_column << ',' << schema.session_column;
  for (const auto& f : schema.fields) out << ',' << f.name;
  if (with_planted) out << ",planted_cluster";
  out << '\n';
  for (const auto& r : rows) {
    out << static_cast<int>(r.label) << ',' << r.domain << ',' << r.session;
    for (const auto& v : r.raw_values) out << ',' << v;
    if (with_planted) out << ',' << r.planted_cluster;
    out << '\n';
  }
  if (!out) fail("write: failed writing '" + path + "'");
}

std::vector<std::vector<uint32_t>> make_batches(size_t n, size_t batch_size, uint64_t seed, bool shuffle) {
  require(batch_size >= 1, "make_batches: batch_size must be >= 1");
  std::vector<uint32_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
  if (shuffle) {
    Rng rng(derive_seed(seed, "batch-shuffle"));
    rng.shuffle(order);
  }
  std::vector<std::vector<uint32_t>> batches;
  for (size_t start = 0; start < n; start += batch_size) {
    const size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

std::vector<uint32_t> subsample_indices(size_t n, double rate, uint64_t seed) {
  require(rate > 0.0 && rate <= 1.0, "subsample: rate must be in (0,1]");
  if (rate >= 1.0) {
    std::vector<uint32_t> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = static_cast<uint32_t>(i);
    return all;
  }
  Rng rng(derive_seed(seed, "subsample"));
  std::vector<uint32_t> keep;
  for (size_t i = 0; i < n; ++i)
    if (rng.uniform() < rate) keep.push_back(static_cast<uint32_t>(i));
  return keep;
}

}  // namespace adaptdhm
