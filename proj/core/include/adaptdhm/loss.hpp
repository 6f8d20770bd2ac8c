#pragma once

#include "adaptdhm/dense_matrix.hpp"

namespace adaptdhm {

double stable_sigmoid(double z);
double softplus(double z);  // log(1 + e^z) without overflow

struct CeLoss {
  double loss = 0.0;
  DenseMatrix logit_grads;
};

// Fused sigmoid + cross entropy. Takes logits, never probabilities, so the
// loss stays finite for any finite input. Gradient is (sigmoid(z) - y) / N.
CeLoss sigmoid_ce(const DenseMatrix& logits, const DenseMatrix& labels);

}  // namespace adaptdhm
