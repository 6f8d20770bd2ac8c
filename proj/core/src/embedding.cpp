#include "adaptdhm/embedding.hpp"

#include <cmath>
#include <cstring>

#include "adaptdhm/error.hpp"

namespace adaptdhm {

EmbeddingTable make_embedding(std::string field_name, size_t vocab_size, size_t dim, Rng& rng) {
  require(vocab_size >= 2, "embedding: vocab_size must be >= 2");
  require(dim > 0, "embedding: dim must be positive");
  EmbeddingTable t;
  t.field_name = std::move(field_name);
  t.vocab_size = vocab_size;
  t.dim = dim;
  t.vectors = DenseMatrix(vocab_size, dim);
  // Small uniform init, CTR-style: lookup rows start near zero and the
  // structure the optimizer writes into them dominates the noise quickly.
  for (double& v : t.vectors.values) v = rng.uniform(-0.01, 0.01);
  return t;
}

size_t total_embedding_width(const std::vector<EmbeddingTable>& tables) {
  size_t w = 0;
  for (const auto& t : tables) w += t.dim;
  return w;
}

void embed_lookup_row(const std::vector<EmbeddingTable>& tables, std::span<const uint32_t> ids, double* out) {
  if (ids.size() != tables.size()) fail("embed_lookup: id count does not match table count");
  size_t off = 0;
  for (size_t f = 0; f < tables.size(); ++f) {
    const EmbeddingTable& t = tables[f];
    if (ids[f] >= t.vocab_size)
      fail("embed_lookup: id " + std::to_string(ids[f]) + " out of range for field '" + t.field_name + "'");
    std::memcpy(out + off, t.vectors.row(ids[f]), t.dim * sizeof(double));
    off += t.dim;
  }
}

void embed_accumulate_grad(const std::vector<EmbeddingTable>& tables, std::span<const uint32_t> ids,
                           const double* row_grad, std::vector<EmbeddingGrad>& grads) {
  if (ids.size() != tables.size()) fail("embed_accumulate_grad: id count does not match table count");
  if (grads.size() != tables.size()) fail("embed_accumulate_grad: grad accumulator count mismatch");
  size_t off = 0;
  for (size_t f = 0; f < tables.size(); ++f) {
    const EmbeddingTable& t = tables[f];
    if (ids[f] >= t.vocab_size)
      fail("embed_accumulate_grad: id out of range for field '" + t.field_name + "'");
    auto [it, inserted] = grads[f].try_emplace(ids[f], t.dim, 0.0);
    std::vector<double>& acc = it->second;
    for (size_t c = 0; c < t.dim; ++c) acc[c] += row_grad[off + c];
    off += t.dim;
  }
}

}  // namespace adaptdhm
