#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adaptdhm/dense_matrix.hpp"
#include "adaptdhm/rng.hpp"

namespace adaptdhm {

struct EmbeddingTable {
  std::string field_name;
  size_t vocab_size = 0;
  size_t dim = 0;
  DenseMatrix vectors;  // vocab_size x dim
};

EmbeddingTable make_embedding(std::string field_name, size_t vocab_size, size_t dim, Rng& rng);

size_t total_embedding_width(const std::vector<EmbeddingTable>& tables);

// Concatenates one vector per table, in table order, into out (which must
// have total_embedding_width columns available at the given row pointer).
void embed_lookup_row(const std::vector<EmbeddingTable>& tables, std::span<const uint32_t> ids, double* out);

// Per-table sparse gradient: row id -> accumulated row gradient. std::map so
// the apply order is deterministic.
using EmbeddingGrad = std::map<uint32_t, std::vector<double>>;

// Adds a concatenated-row gradient back onto per-table row gradients.
// Repeated ids within a batch accumulate additively.
void embed_accumulate_grad(const std::vector<EmbeddingTable>& tables, std::span<const uint32_t> ids,
                           const double* row_grad, std::vector<EmbeddingGrad>& grads);

}  // namespace adaptdhm
