#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace adaptdhm {

struct FieldSpec {
  std::string name;
  size_t vocab = 0;  // hash-vocab size, >= 2
};

struct DatasetSchema {
  std::vector<FieldSpec> fields;
  std::string label_column = "label";
  std::string domain_column = "domain_id";
  std::string session_column = "session_id";

  size_t field_index(std::string_view name) const;  // throws on unknown field
  void validate() const;
};

// One labeled impression. Feature ids are already hashed into their field's
// vocab; session is an index into Dataset::session_names.
struct Instance {
  uint8_t label = 0;
  uint32_t domain = 0;
  uint32_t session = 0;
  int32_t planted_cluster = -1;  // synthetic data only, -1 when absent
  std::vector<uint32_t> ids;     // one per schema field, in schema order
};

struct Dataset {
  DatasetSchema schema;
  std::vector<Instance> instances;
  std::vector<std::string> session_names;
  bool has_planted = false;

  size_t size() const { return instances.size(); }
  size_t domain_count() const;
};

// The fixed ingestion hash: fnv1a64("<field>:<raw>") % vocab. Stable across
// runs and platforms; golden values are pinned in tests.
uint32_t hash_feature(std::string_view field, std::string_view raw, size_t vocab);

// CSV with header `label,domain_id,session_id,<field...>[,planted_cluster]`.
// Raw categorical cells are hashed; malformed rows report their line number.
Dataset parse_dataset(const std::string& path, const DatasetSchema& schema);

// Writes the same format parse_dataset reads. Feature columns hold the raw
// strings recorded at generation time.
struct RawRow {
  uint8_t label;
  uint32_t domain;
  std::string session;
  std::vector<std::string> raw_values;  // one per field
  int32_t planted_cluster = -1;
};
void write_dataset_csv(const std::string& path, const DatasetSchema& schema, const std::vector<RawRow>& rows,
                       bool with_planted);

// Deterministic epoch batching: a seeded Fisher-Yates permutation (identity
// when shuffle is off) cut into batch_size slices, final short batch kept.
std::vector<std::vector<uint32_t>> make_batches(size_t n, size_t batch_size, uint64_t seed, bool shuffle);

// Deterministic subsample of [0, n): keeps each index with the given rate.
std::vector<uint32_t> subsample_indices(size_t n, double rate, uint64_t seed);

}  // namespace adaptdhm
