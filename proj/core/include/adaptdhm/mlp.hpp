#pragma once

#include <cstdint>
#include <vector>

#include "adaptdhm/dense_matrix.hpp"
#include "adaptdhm/rng.hpp"

namespace adaptdhm {

enum class Activation : uint8_t { relu, none };

struct MlpLayer {
  DenseMatrix weight;  // in_width x out_width
  DenseMatrix bias;    // 1 x out_width
  Activation act = Activation::relu;
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  size_t in_width() const { return layers.front().weight.rows; }
  size_t out_width() const { return layers.back().weight.cols; }
  size_t param_count() const;
  // Cheap structural fingerprint used to pair tapes with the params that
  // produced them.
  uint64_t shape_signature() const;
};

// Hidden stack with ReLU plus a width-1 linear head. He-uniform weights,
// zero biases.
MlpParams make_mlp(size_t in_width, const std::vector<size_t>& hidden_widths, Rng& rng);

// Same shape, weights all one and biases all zero. Fusing this against a
// shared net by element-wise product reproduces the shared net exactly, which
// is how cluster branches start out.
MlpParams make_mlp_identity(size_t in_width, const std::vector<size_t>& hidden_widths);

// Pre-activations and per-layer inputs recorded by the forward pass.
struct MlpTape {
  std::vector<DenseMatrix> inputs;    // input to layer l
  std::vector<DenseMatrix> pre_acts;  // z of layer l
  uint64_t shape_sig = 0;
  size_t batch_rows = 0;
};

struct MlpForward {
  DenseMatrix output;
  MlpTape tape;
};

struct MlpGrads {
  std::vector<DenseMatrix> weight_grads;
  std::vector<DenseMatrix> bias_grads;
  DenseMatrix input_grad;
};

MlpForward mlp_forward(const MlpParams& params, const DenseMatrix& input);

// Manual backprop through the recorded tape. The tape must come from an
// mlp_forward call on params of the same shape.
MlpGrads mlp_backward(const MlpParams& params, const MlpTape& tape, const DenseMatrix& output_grad);

}  // namespace adaptdhm
