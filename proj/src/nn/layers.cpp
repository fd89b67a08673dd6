// src/nn/layers.cpp
#include "fpg/nn/layers.hpp"

#include "fpg/error.hpp"

namespace fpg::nn {

Tensor linear(const Tensor& x, const Linear& layer) {
  Tensor y = matmul(x, layer.weight);
  if (layer.bias.defined()) {
    y = add(y, layer.bias);
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const LayerNormWeights& ln) {
  return layer_norm(x, ln.gain, ln.bias, 1e-5);
}

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruWeights& w) {
  if (x.rows() != 1 || h_prev.rows() != 1) {
    throw Error("gru_cell expects a single input row and a single state row");
  }
  if (w.u_z.shape()[0] != h_prev.cols() || w.w_z.shape()[0] != x.cols()) {
    throw Error("gru_cell: weight shapes do not match input/state widths");
  }
  const Tensor z = sigmoid(add(add(matmul(x, w.w_z), matmul(h_prev, w.u_z)), w.b_z));
  const Tensor r = sigmoid(add(add(matmul(x, w.w_r), matmul(h_prev, w.u_r)), w.b_r));
  const Tensor c = tanh(add(add(matmul(x, w.w_h), matmul(mul(r, h_prev), w.u_h)), w.b_h));
  // (1 - z) * h + z * c  ==  h + z * (c - h)
  return add(h_prev, mul(z, sub(c, h_prev)));
}

Tensor gru_sequence(const Tensor& xs, const GruWeights& w) {
  const std::size_t steps = xs.rows();
  const std::size_t width = w.u_z.shape()[0];
  Tensor h = Tensor::zeros({1, width});
  std::vector<Tensor> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    h = gru_cell(slice_rows(xs, t, 1), h, w);
    states.push_back(h);
  }
  return concat_rows(states);
}

Tensor DropoutContext::apply(const Tensor& x) const {
  if (rate == 0.0 || rng == nullptr) {
    return x;
  }
  return dropout(x, rate, *rng);
}

AttentionResult multi_head_attention(const Tensor& queries, const Tensor& keys_values,
                                     const AttentionWeights& w, std::size_t heads,
                                     double score_scale, const SoftmaxMask& mask) {
  const Tensor q = linear(queries, w.query);
  const Tensor k = linear(keys_values, w.key);
  const Tensor v = linear(keys_values, w.value);
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw Error("attention width must be divisible by the head count");
  }
  const std::size_t dh = d / heads;
  AttentionResult result;
  std::vector<Tensor> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
    const Tensor kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
    const Tensor vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
    const Tensor scores = scale(matmul(qh, transpose(kh)), score_scale);
    Tensor probs = softmax_masked(scores, mask);
    outputs.push_back(matmul(probs, vh));
    result.head_probs.push_back(std::move(probs));
  }
  const Tensor merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  result.output = linear(merged, w.output);
  return result;
}

Tensor feed_forward(const Tensor& x, const FeedForwardWeights& w, const DropoutContext& dropout) {
  return linear(dropout.apply(gelu(linear(x, w.inner))), w.outer);
}

}  // namespace fpg::nn
