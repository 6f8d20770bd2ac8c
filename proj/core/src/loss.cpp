#include "adaptdhm/loss.hpp"

#include <cmath>
#include <string>

#include "adaptdhm/error.hpp"

namespace adaptdhm {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  // max(z, 0) + log1p(exp(-|z|))
  return (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

CeLoss sigmoid_ce(const DenseMatrix& logits, const DenseMatrix& labels) {
  if (!logits.same_shape(labels)) fail("sigmoid_ce: logits and labels shapes differ");
  require(logits.size() > 0, "sigmoid_ce: empty input");

  const double n = static_cast<double>(logits.size());
  CeLoss out;
  out.logit_grads = DenseMatrix(logits.rows, logits.cols, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double y = labels.values[i];
    if (y != 0.0 && y != 1.0)
      fail("sigmoid_ce: label " + std::to_string(y) + " at index " + std::to_string(i) + " is not in {0,1}");
    const double z = logits.values[i];
    // -(y log p + (1-y) log(1-p)) == softplus(z) - y*z
    total += softplus(z) - y * z;
    out.logit_grads.values[i] = (stable_sigmoid(z) - y) / n;
  }
  out.loss = total / n;
  if (!std::isfinite(out.loss)) fail("sigmoid_ce: non-finite loss");
  return out;
}

}  // namespace adaptdhm
