#include "adaptdhm/routing.hpp"

#include <cmath>
#include <string>

#include "adaptdhm/error.hpp"
#include "adaptdhm/rng.hpp"

namespace adaptdhm {

namespace {

constexpr double kDegenerateNorm = 1e-12;

void normalize_row_or_keep(DenseMatrix& m, size_t r, const double* fallback) {
  double norm = row_norm(m, r);
  if (norm < kDegenerateNorm) {
    for (size_t c = 0; c < m.cols; ++c) m.at(r, c) = fallback[c];
    return;
  }
  for (size_t c = 0; c < m.cols; ++c) m.at(r, c) /= norm;
}

}  // namespace

ClusterCenters init_centers(const RoutingConfig& config, size_t dim) {
  if (config.clusters == 0) fail("init_centers: K must be >= 1");
  if (dim == 0) fail("init_centers: dim must be >= 1");
  require(config.iterations >= 1, "init_centers: iterations must be >= 1");
  require(config.ewma_beta >= 0.0 && config.ewma_beta < 1.0, "init_centers: beta must be in [0,1)");
  require(config.init_sigma > 0.0, "init_centers: sigma must be positive");

  ClusterCenters cc;
  cc.k = config.clusters;
  cc.dim = dim;
  cc.batch_step = 0;
  cc.centers = DenseMatrix(cc.k, dim);
  Rng rng(derive_seed(config.seed, "centers"));
  for (size_t j = 0; j < cc.k; ++j) {
    double norm2 = 0.0;
    do {
      for (size_t c = 0; c < dim; ++c) {
        const double v = config.init_sigma * rng.normal();
        cc.centers.at(j, c) = v;
        norm2 += v * v;
      }
    } while (norm2 < kDegenerateNorm);
    const double inv = 1.0 / std::sqrt(norm2);
    for (size_t c = 0; c < dim; ++c) cc.centers.at(j, c) *= inv;
  }
  return cc;
}

DenseMatrix similarity_scores(const ClusterCenters& centers, const DenseMatrix& embeddings) {
  if (embeddings.cols != centers.dim)
    fail("similarity_scores: embedding width " + std::to_string(embeddings.cols) + " != center dim " +
         std::to_string(centers.dim));
  DenseMatrix s(embeddings.rows, centers.k, 0.0);
  for (size_t i = 0; i < embeddings.rows; ++i) {
    const double* e = embeddings.row(i);
    for (size_t j = 0; j < centers.k; ++j) {
      const double* c = centers.centers.row(j);
      double dot = 0.0;
      for (size_t t = 0; t < centers.dim; ++t) dot += c[t] * e[t];
      s.at(i, j) = dot;
    }
  }
  return s;
}

DistributionCoefficients distribution_coefficients(const DenseMatrix& scores) {
  require(scores.all_finite(), "distribution_coefficients: non-finite scores");
  DistributionCoefficients r(scores.rows, scores.cols, 0.0);
  for (size_t i = 0; i < scores.rows; ++i) {
    const double* srow = scores.row(i);
    double mx = srow[0];
    for (size_t j = 1; j < scores.cols; ++j) mx = std::max(mx, srow[j]);
    double z = 0.0;
    double* rrow = r.row(i);
    for (size_t j = 0; j < scores.cols; ++j) {
      rrow[j] = std::exp(srow[j] - mx);
      z += rrow[j];
    }
    for (size_t j = 0; j < scores.cols; ++j) rrow[j] /= z;
  }
  return r;
}

RecomputeResult recompute_centers(const DistributionCoefficients& coeffs, const DenseMatrix& embeddings,
                                  const DenseMatrix& previous) {
  if (coeffs.rows != embeddings.rows) fail("recompute_centers: row count mismatch");
  if (previous.rows != coeffs.cols || previous.cols != embeddings.cols)
    fail("recompute_centers: previous centers shape mismatch");

  RecomputeResult out;
  out.centers = DenseMatrix(coeffs.cols, embeddings.cols, 0.0);
  for (size_t i = 0; i < embeddings.rows; ++i) {
    const double* e = embeddings.row(i);
    const double* r = coeffs.row(i);
    for (size_t j = 0; j < coeffs.cols; ++j) {
      const double w = r[j];
      double* c = out.centers.row(j);
      for (size_t t = 0; t < embeddings.cols; ++t) c[t] += w * e[t];
    }
  }
  for (size_t j = 0; j < out.centers.rows; ++j) {
    if (row_norm(out.centers, j) < kDegenerateNorm) out.degenerate.push_back(static_cast<uint32_t>(j));
    normalize_row_or_keep(out.centers, j, previous.row(j));
  }
  return out;
}

RouteResult route_batch(ClusterCenters& centers, const DenseMatrix& embeddings, const RoutingConfig& config) {
  if (embeddings.rows == 0) fail("route_batch: empty batch");
  if (embeddings.cols != centers.dim) fail("route_batch: embedding width != center dim");
  require(config.iterations >= 1, "route_batch: iterations must be >= 1");

  const DenseMatrix inherited = centers.centers;
  RouteResult out;
  // Statement order follows the routing procedure exactly: scores and
  // coefficients are computed against the centers standing at the top of the
  // iteration; centers are recomputed afterwards. The returned coefficients
  // are the final iteration's, i.e. measured against the (I-1)-times refined
  // centers.
  for (size_t it = 0; it < config.iterations; ++it) {
    const DenseMatrix scores = similarity_scores(centers, embeddings);
    out.coefficients = distribution_coefficients(scores);
    RecomputeResult rec = recompute_centers(out.coefficients, embeddings, centers.centers);
    out.degenerate_events += static_cast<uint32_t>(rec.degenerate.size());
    centers.centers = std::move(rec.centers);
  }

  // Cross-batch EWMA inheritance, then back onto the unit sphere.
  const double beta = config.ewma_beta;
  for (size_t j = 0; j < centers.k; ++j) {
    for (size_t t = 0; t < centers.dim; ++t)
      centers.centers.at(j, t) = beta * inherited.at(j, t) + (1.0 - beta) * centers.centers.at(j, t);
    if (row_norm(centers.centers, j) < kDegenerateNorm) ++out.degenerate_events;
    normalize_row_or_keep(centers.centers, j, inherited.row(j));
  }
  ++centers.batch_step;
  return out;
}

std::vector<uint32_t> assign(const DistributionCoefficients& coeffs) {
  std::vector<uint32_t> idx(coeffs.rows, 0);
  for (size_t i = 0; i < coeffs.rows; ++i) {
    const double* r = coeffs.row(i);
    uint32_t best = 0;
    for (size_t j = 1; j < coeffs.cols; ++j)
      if (r[j] > r[best]) best = static_cast<uint32_t>(j);
    idx[i] = best;
  }
  return idx;
}

DistributionCoefficients infer_route(const ClusterCenters& centers, const DenseMatrix& embeddings) {
  return distribution_coefficients(similarity_scores(centers, embeddings));
}

}  // namespace adaptdhm
