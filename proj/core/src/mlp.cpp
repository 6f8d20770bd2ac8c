#include "adaptdhm/mlp.hpp"

#include <cmath>
#include <string>

#include "adaptdhm/error.hpp"
#include "adaptdhm/hash.hpp"

namespace adaptdhm {

size_t MlpParams::param_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

uint64_t MlpParams::shape_signature() const {
  uint64_t h = kFnv64Offset;
  for (const auto& l : layers) {
    h = splitmix64(h ^ l.weight.rows);
    h = splitmix64(h ^ l.weight.cols);
    h = splitmix64(h ^ static_cast<uint64_t>(l.act));
  }
  return h;
}

MlpParams make_mlp(size_t in_width, const std::vector<size_t>& hidden_widths, Rng& rng) {
  require(in_width > 0, "make_mlp: in_width must be positive");
  MlpParams p;
  size_t prev = in_width;
  std::vector<size_t> widths = hidden_widths;
  widths.push_back(1);  // prediction head
  for (size_t i = 0; i < widths.size(); ++i) {
    const size_t w = widths[i];
    require(w > 0, "make_mlp: layer width must be positive");
    MlpLayer layer;
    layer.weight = DenseMatrix(prev, w);
    layer.bias = DenseMatrix(1, w, 0.0);
    layer.act = (i + 1 == widths.size()) ? Activation::none : Activation::relu;
    const double limit = std::sqrt(6.0 / static_cast<double>(prev));
    for (double& v : layer.weight.values) v = rng.uniform(-limit, limit);
    p.layers.push_back(std::move(layer));
    prev = w;
  }
  return p;
}

MlpParams make_mlp_identity(size_t in_width, const std::vector<size_t>& hidden_widths) {
  MlpParams p;
  size_t prev = in_width;
  std::vector<size_t> widths = hidden_widths;
  widths.push_back(1);
  for (size_t i = 0; i < widths.size(); ++i) {
    MlpLayer layer;
    layer.weight = DenseMatrix(prev, widths[i], 1.0);
    layer.bias = DenseMatrix(1, widths[i], 0.0);
    layer.act = (i + 1 == widths.size()) ? Activation::none : Activation::relu;
    p.layers.push_back(std::move(layer));
    prev = widths[i];
  }
  return p;
}

MlpForward mlp_forward(const MlpParams& params, const DenseMatrix& input) {
  require(!params.layers.empty(), "mlp_forward: empty network");
  if (input.cols != params.in_width())
    fail("mlp_forward: input width " + std::to_string(input.cols) + " does not match layer 0 input width " +
         std::to_string(params.in_width()));

  MlpForward fw;
  fw.tape.shape_sig = params.shape_signature();
  fw.tape.batch_rows = input.rows;

  DenseMatrix cur = input;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const MlpLayer& layer = params.layers[l];
    if (cur.cols != layer.weight.rows)
      fail("mlp_forward: width mismatch entering layer " + std::to_string(l));
    fw.tape.inputs.push_back(cur);
    DenseMatrix z = matmul(cur, layer.weight);
    for (size_t r = 0; r < z.rows; ++r) {
      double* zr = z.row(r);
      for (size_t c = 0; c < z.cols; ++c) zr[c] += layer.bias.values[c];
    }
    fw.tape.pre_acts.push_back(z);
    if (layer.act == Activation::relu) {
      for (double& v : z.values) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(z);
  }
  fw.output = std::move(cur);
  return fw;
}

MlpGrads mlp_backward(const MlpParams& params, const MlpTape& tape, const DenseMatrix& output_grad) {
  if (tape.shape_sig != params.shape_signature())
    fail("mlp_backward: tape does not belong to these parameters");
  if (tape.inputs.size() != params.layers.size())
    fail("mlp_backward: tape layer count mismatch");
  if (output_grad.rows != tape.batch_rows || output_grad.cols != params.out_width())
    fail("mlp_backward: output_grad shape mismatch");

  const size_t nl = params.layers.size();
  MlpGrads g;
  g.weight_grads.resize(nl);
  g.bias_grads.resize(nl);

  DenseMatrix delta = output_grad;  // dL/d(post-activation of layer l)
  for (size_t li = nl; li-- > 0;) {
    const MlpLayer& layer = params.layers[li];
    const DenseMatrix& z = tape.pre_acts[li];
    const DenseMatrix& x = tape.inputs[li];

    if (layer.act == Activation::relu) {
      for (size_t i = 0; i < delta.size(); ++i)
        if (z.values[i] <= 0.0) delta.values[i] = 0.0;
    }

    // dW = x^T * delta, db = column sums of delta
    DenseMatrix dw(layer.weight.rows, layer.weight.cols, 0.0);
    for (size_t r = 0; r < x.rows; ++r) {
      const double* xr = x.row(r);
      const double* dr = delta.row(r);
      for (size_t i = 0; i < x.cols; ++i) {
        const double xv = xr[i];
        if (xv == 0.0) continue;
        double* dwrow = dw.row(i);
        for (size_t j = 0; j < delta.cols; ++j) dwrow[j] += xv * dr[j];
      }
    }
    DenseMatrix db(1, layer.bias.cols, 0.0);
    for (size_t r = 0; r < delta.rows; ++r) {
      const double* dr = delta.row(r);
      for (size_t j = 0; j < delta.cols; ++j) db.values[j] += dr[j];
    }

    // dX = delta * W^T
    DenseMatrix dx(delta.rows, layer.weight.rows, 0.0);
    for (size_t r = 0; r < delta.rows; ++r) {
      const double* dr = delta.row(r);
      double* dxr = dx.row(r);
      for (size_t j = 0; j < delta.cols; ++j) {
        const double dv = dr[j];
        if (dv == 0.0) continue;
        for (size_t i = 0; i < layer.weight.rows; ++i) dxr[i] += dv * layer.weight.at(i, j);
      }
    }

    g.weight_grads[li] = std::move(dw);
    g.bias_grads[li] = std::move(db);
    delta = std::move(dx);
  }
  g.input_grad = std::move(delta);
  return g;
}

}  // namespace adaptdhm
