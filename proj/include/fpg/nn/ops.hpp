// include/fpg/nn/ops.hpp
//
// Differentiable primitives. Unless stated otherwise an operation treats its
// operands through the 2-D view (rows x cols, cols = last dimension).
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fpg/nn/tensor.hpp"

namespace fpg::nn {

// Which (row, column) entries of a score matrix take part in a softmax.
// Default-constructed masks allow everything.
class SoftmaxMask {
 public:
  SoftmaxMask() = default;

  // Same allowed columns for every row.
  static SoftmaxMask columns(const std::vector<bool>& allowed);
  // Lower-triangular: row r may see columns 0..r.
  static SoftmaxMask causal(std::size_t n);
  static SoftmaxMask full(std::size_t rows, std::size_t cols, const std::vector<bool>& allowed);

  bool allows_all() const { return kind_ == Kind::all; }
  bool allowed(std::size_t row, std::size_t col) const;
  // Number of columns the mask was built for (0 for an all-allowing mask).
  std::size_t width() const { return cols_; }

 private:
  enum class Kind { all, columns, causal, full };
  Kind kind_ = Kind::all;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
// add and mul: b must have a's shape, or be a row vector with a.cols() entries
// (broadcast). sub needs equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// tanh approximation of GELU.
Tensor gelu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
// Gradient is zero where the input lies outside [lo, hi].
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// [rows, cols] -> [rows, 1]
Tensor row_sum(const Tensor& a);

Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);

// Embedding lookup: rows of table [V, d] selected by ids -> [ids.size(), d].
Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids);

// Row-wise softmax with max-shift. Masked entries come out exactly 0.
// Throws "degenerate attention row" if a row has no allowed entry and on NaN.
Tensor softmax_masked(const Tensor& logits, const SoftmaxMask& mask = {});

// Normalizes each row with population variance.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// log softmax(logits[t])[targets[t]] for every row t -> [t].
Tensor target_log_probs(const Tensor& logits, std::span<const std::int32_t> targets);

// Mean over rows whose target != ignore_id of -log softmax(logits)[target].
Tensor cross_entropy_from_logits(const Tensor& logits, std::span<const std::int32_t> targets,
                                 std::int32_t ignore_id);

// Inverted dropout. Identity when rate == 0.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

}  // namespace fpg::nn
