// include/fpg/nn/layers.hpp
//
// Composite building blocks assembled from the primitives in ops.hpp. All
// weights use the row-vector convention: y = x W + b with W [d_in, d_out].
#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "fpg/nn/ops.hpp"
#include "fpg/nn/tensor.hpp"

namespace fpg::nn {

struct Linear {
  Tensor weight;
  Tensor bias;  // may be undefined
};

Tensor linear(const Tensor& x, const Linear& layer);

struct LayerNormWeights {
  Tensor gain;
  Tensor bias;
};

Tensor layer_norm(const Tensor& x, const LayerNormWeights& ln);

// z = sigmoid(x W_z + h U_z + b_z)
// r = sigmoid(x W_r + h U_r + b_r)
// c = tanh(x W_h + (r * h) U_h + b_h)
// h' = (1 - z) * h + z * c
struct GruWeights {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;
};

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruWeights& w);

// Runs the cell over the rows of xs [L, d_in] from a zero state and returns
// the stacked hidden states [L, d_h].
Tensor gru_sequence(const Tensor& xs, const GruWeights& w);

// Optional stochastic regularization shared by the blocks of one forward pass.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  Tensor apply(const Tensor& x) const;
};

struct AttentionWeights {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct AttentionResult {
  Tensor output;                   // [Lq, d]
  std::vector<Tensor> head_probs;  // one [Lq, Lk] distribution matrix per head
};

// Scaled dot-product attention with `heads` heads over column slices of the
// projected queries/keys/values. `score_scale` multiplies QK^T.
AttentionResult multi_head_attention(const Tensor& queries, const Tensor& keys_values,
                                     const AttentionWeights& w, std::size_t heads,
                                     double score_scale, const SoftmaxMask& mask);

struct FeedForwardWeights {
  Linear inner;
  Linear outer;
};

Tensor feed_forward(const Tensor& x, const FeedForwardWeights& w, const DropoutContext& dropout);

}  // namespace fpg::nn
