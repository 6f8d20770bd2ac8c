#pragma once

#include <cstdint>
#include <vector>

#include "adaptdhm/dense_matrix.hpp"

namespace adaptdhm {

struct RoutingConfig {
  size_t clusters = 3;    // K
  size_t iterations = 3;  // refinement passes per batch
  double ewma_beta = 0.9;
  double init_sigma = 1.0;
  uint64_t seed = 0;
};

// Persistent unit-norm cluster centers. They are model state, not SGD
// parameters: batch routing updates them in place and nothing ever
// backpropagates into them.
struct ClusterCenters {
  size_t k = 0;
  size_t dim = 0;
  DenseMatrix centers;  // k x dim, every row unit norm
  uint64_t batch_step = 0;
};

// Row-stochastic n x K matrix of soft assignments.
using DistributionCoefficients = DenseMatrix;

ClusterCenters init_centers(const RoutingConfig& config, size_t dim);

// Raw dot products between instance embeddings and the unit centers. The
// embeddings are deliberately not normalized: with unit centers the cosine
// numerator is exactly this dot product, and magnitude then acts as a
// confidence scale in the softmax.
DenseMatrix similarity_scores(const ClusterCenters& centers, const DenseMatrix& embeddings);

// Row-wise softmax with max subtraction.
DistributionCoefficients distribution_coefficients(const DenseMatrix& scores);

struct RecomputeResult {
  DenseMatrix centers;                   // k x dim, unit rows
  std::vector<uint32_t> degenerate;      // clusters whose weighted sum had ~zero norm
};

// Coefficient-weighted sum of embeddings per cluster, L2-normalized. A
// cluster whose weighted sum is numerically zero keeps its previous center.
RecomputeResult recompute_centers(const DistributionCoefficients& coeffs, const DenseMatrix& embeddings,
                                  const DenseMatrix& previous);

struct RouteResult {
  DistributionCoefficients coefficients;  // from the final iteration
  uint32_t degenerate_events = 0;
};

// One batch of dynamic routing: I iterations of score/softmax/recompute
// against the inherited centers, then an EWMA blend of old and new centers,
// re-normalized. Mutates `centers` (values and batch_step). Produces no
// gradient information of any kind.
RouteResult route_batch(ClusterCenters& centers, const DenseMatrix& embeddings, const RoutingConfig& config);

// Hard assignment: argmax per row, ties toward the lowest cluster index.
std::vector<uint32_t> assign(const DistributionCoefficients& coeffs);

// Inference-time routing: a single score/softmax pass against frozen centers.
DistributionCoefficients infer_route(const ClusterCenters& centers, const DenseMatrix& embeddings);

}  // namespace adaptdhm
