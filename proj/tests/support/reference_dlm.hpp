#pragma once

// Straight-line reference of the batch routing procedure, kept independent of
// the library implementation on purpose. Tests compare adaptdhm::route_batch
// against this transcription.

#include <cmath>
#include <vector>

namespace refdlm {

// embeddings: n rows of width d, centers: k rows of width d (unit norm, in/out).
// Returns the n*k coefficient matrix of the final iteration; `centers` is left
// EWMA-blended and re-normalized.
inline std::vector<double> route(std::vector<double>& centers, const std::vector<double>& embeddings,
                                 std::size_t n, std::size_t k, std::size_t d, std::size_t iterations,
                                 double beta) {
  std::vector<double> inherited = centers;
  std::vector<double> r(n * k, 0.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(k, 0.0);
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < d; ++t) s[j] += centers[j * d + t] * embeddings[i * d + t];
      double mx = s[0];
      for (double v : s) mx = std::max(mx, v);
      double z = 0.0;
      for (std::size_t j = 0; j < k; ++j) z += std::exp(s[j] - mx);
      for (std::size_t j = 0; j < k; ++j) r[i * k + j] = std::exp(s[j] - mx) / z;
    }
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> sum(d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < d; ++t) sum[t] += r[i * k + j] * embeddings[i * d + t];
      double norm = 0.0;
      for (double v : sum) norm += v * v;
      norm = std::sqrt(norm);
      if (norm >= 1e-12)
        for (std::size_t t = 0; t < d; ++t) centers[j * d + t] = sum[t] / norm;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> blend(d, 0.0);
    double norm = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      blend[t] = beta * inherited[j * d + t] + (1.0 - beta) * centers[j * d + t];
      norm += blend[t] * blend[t];
    }
    norm = std::sqrt(norm);
    if (norm >= 1e-12)
      for (std::size_t t = 0; t < d; ++t) centers[j * d + t] = blend[t] / norm;
    else
      for (std::size_t t = 0; t < d; ++t) centers[j * d + t] = inherited[j * d + t];
  }
  return r;
}

}  // namespace refdlm
