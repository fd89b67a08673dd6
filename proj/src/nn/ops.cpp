// src/nn/ops.cpp
#include "fpg/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fpg/error.hpp"

namespace fpg::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using detail::Node;

// Gradient buffer of input i, or nullptr when that input needs no gradient.
double* input_grad(Node& node, std::size_t i) {
  Node& in = *node.inputs[i];
  if (!in.requires_grad) {
    return nullptr;
  }
  return in.grad_buffer().data();
}

const std::vector<double>& input_value(const Node& node, std::size_t i) {
  return node.inputs[i]->value;
}

void require(bool cond, const std::string& what) {
  if (!cond) {
    throw Error(what);
  }
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = f(x[i]);
  }
  return make_result(a.shape(), std::move(out), {a}, [dfdx](Node& node) {
    double* g = input_grad(node, 0);
    if (g == nullptr) {
      return;
    }
    const auto& x = input_value(node, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] += node.grad[i] * dfdx(x[i], node.value[i]);
    }
  });
}

}  // namespace

// ---------------------------------------------------------------- masks ----

SoftmaxMask SoftmaxMask::columns(const std::vector<bool>& allowed) {
  SoftmaxMask m;
  m.kind_ = Kind::columns;
  m.cols_ = allowed.size();
  m.bits_.assign(allowed.begin(), allowed.end());
  return m;
}

SoftmaxMask SoftmaxMask::causal(std::size_t n) {
  SoftmaxMask m;
  m.kind_ = Kind::causal;
  m.cols_ = n;
  return m;
}

SoftmaxMask SoftmaxMask::full(std::size_t rows, std::size_t cols, const std::vector<bool>& allowed) {
  require(allowed.size() == rows * cols, "mask size does not match rows x cols");
  SoftmaxMask m;
  m.kind_ = Kind::full;
  m.cols_ = cols;
  m.bits_.assign(allowed.begin(), allowed.end());
  return m;
}

bool SoftmaxMask::allowed(std::size_t row, std::size_t col) const {
  switch (kind_) {
    case Kind::all:
      return true;
    case Kind::columns:
      return bits_[col] != 0;
    case Kind::causal:
      return col <= row;
    case Kind::full:
      return bits_[row * cols_ + col] != 0;
  }
  return true;
}

// ---------------------------------------------------------- arithmetic ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(b.rank() == 2, "matmul: right operand must be 2-D, got " + shape_string(b.shape()));
  require(a.rank() <= 2, "matmul: left operand must be 1-D or 2-D");
  const std::size_t m = a.rank() == 1 ? 1 : a.shape()[0];
  const std::size_t k = a.cols();
  const std::size_t n = b.shape()[1];
  require(b.shape()[0] == k, "matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                                 shape_string(b.shape()));
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Shape shape = a.rank() == 1 ? Shape{n} : matrix_shape(m, n);
  return make_result(std::move(shape), std::move(out), {a, b}, [m, k, n](Node& node) {
    ConstMap dc(node.grad.data(), m, n);
    if (double* ga = input_grad(node, 0)) {
      MutMap(ga, m, k).noalias() += dc * ConstMap(input_value(node, 1).data(), k, n).transpose();
    }
    if (double* gb = input_grad(node, 1)) {
      MutMap(gb, k, n).noalias() += ConstMap(input_value(node, 0).data(), m, k).transpose() * dc;
    }
  });
}

namespace {

enum class Broadcast { none, row };

Broadcast check_binary(const Tensor& a, const Tensor& b, const char* name) {
  if (a.shape() == b.shape()) {
    return Broadcast::none;
  }
  if (b.numel() == a.cols() && b.rows() == 1) {
    return Broadcast::row;
  }
  throw Error(std::string(name) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
              shape_string(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast bc = check_binary(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  const std::size_t cols = a.cols();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] + (bc == Broadcast::row ? y[i % cols] : y[i]);
  }
  return make_result(a.shape(), std::move(out), {a, b}, [bc, cols](Node& node) {
    if (double* ga = input_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        ga[i] += node.grad[i];
      }
    }
    if (double* gb = input_grad(node, 1)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        gb[bc == Broadcast::row ? i % cols : i] += node.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shapes differ");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - y[i];
  }
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& node) {
    if (double* ga = input_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        ga[i] += node.grad[i];
      }
    }
    if (double* gb = input_grad(node, 1)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        gb[i] -= node.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = check_binary(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  const std::size_t cols = a.cols();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] * (bc == Broadcast::row ? y[i % cols] : y[i]);
  }
  return make_result(a.shape(), std::move(out), {a, b}, [bc, cols](Node& node) {
    const auto& x = input_value(node, 0);
    const auto& y = input_value(node, 1);
    if (double* ga = input_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        ga[i] += node.grad[i] * (bc == Broadcast::row ? y[i % cols] : y[i]);
      }
    }
    if (double* gb = input_grad(node, 1)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        gb[bc == Broadcast::row ? i % cols : i] += node.grad[i] * x[i];
      }
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(c * (x + k * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
      });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    require(x > 0.0, "log of a non-positive value");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ----------------------------------------------------------- reductions ----

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) {
    s += x;
  }
  return make_result({1}, {s}, {a}, [](Node& node) {
    if (double* g = input_grad(node, 0)) {
      const std::size_t n = input_value(node, 0).size();
      for (std::size_t i = 0; i < n; ++i) {
        g[i] += node.grad[0];
      }
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor row_sum(const Tensor& a) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const auto x = a.data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r] += x[r * cols + c];
    }
  }
  return make_result(matrix_shape(rows, 1), std::move(out), {a}, [rows, cols](Node& node) {
    if (double* g = input_grad(node, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          g[r * cols + c] += node.grad[r];
        }
      }
    }
  });
}

// ------------------------------------------------------------- layout ----

Tensor transpose(const Tensor& a) {
  require(a.rank() <= 2, "transpose: tensor must be 1-D or 2-D");
  const std::size_t rows = a.rank() == 1 ? 1 : a.shape()[0];
  const std::size_t cols = a.cols();
  std::vector<double> out(rows * cols);
  MutMap(out.data(), cols, rows) = ConstMap(a.data().data(), rows, cols).transpose();
  return make_result(matrix_shape(cols, rows), std::move(out), {a}, [rows, cols](Node& node) {
    if (double* g = input_grad(node, 0)) {
      MutMap(g, rows, cols) += ConstMap(node.grad.data(), cols, rows).transpose();
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape: element count changes");
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& node) {
    if (double* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        g[i] += node.grad[i];
      }
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    require(p.cols() == cols, "concat_rows: column counts differ");
    offsets.push_back(rows * cols);
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return make_result(matrix_shape(rows, cols), std::move(out), parts, [offsets](Node& node) {
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (double* g = input_grad(node, i)) {
        const std::size_t n = node.inputs[i]->value.size();
        for (std::size_t j = 0; j < n; ++j) {
          g[j] += node.grad[offsets[i] + j];
        }
      }
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    offsets.push_back(cols);
    widths.push_back(p.cols());
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto x = parts[i].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.begin() + r * widths[i], widths[i], out.begin() + r * cols + offsets[i]);
    }
  }
  return make_result(matrix_shape(rows, cols), std::move(out), parts,
                     [rows, cols, offsets, widths](Node& node) {
                       for (std::size_t i = 0; i < node.inputs.size(); ++i) {
                         if (double* g = input_grad(node, i)) {
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < widths[i]; ++c) {
                               g[r * widths[i] + c] += node.grad[r * cols + offsets[i] + c];
                             }
                           }
                         }
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t cols = a.cols();
  require(count > 0 && begin + count <= a.rows(), "slice_rows: range out of bounds");
  const auto x = a.data();
  std::vector<double> out(x.begin() + begin * cols, x.begin() + (begin + count) * cols);
  return make_result(matrix_shape(count, cols), std::move(out), {a}, [begin, cols](Node& node) {
    if (double* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < node.grad.size(); ++i) {
        g[begin * cols + i] += node.grad[i];
      }
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  require(count > 0 && begin + count <= cols, "slice_cols: range out of bounds");
  const auto x = a.data();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.begin() + r * cols + begin, count, out.begin() + r * count);
  }
  return make_result(matrix_shape(rows, count), std::move(out), {a},
                     [rows, cols, begin, count](Node& node) {
                       if (double* g = input_grad(node, 0)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < count; ++c) {
                             g[r * cols + begin + c] += node.grad[r * count + c];
                           }
                         }
                       }
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int32_t> ids) {
  require(table.rank() == 2, "gather_rows: table must be 2-D");
  require(!ids.empty(), "gather_rows: no ids");
  const std::size_t vocab = table.shape()[0];
  const std::size_t d = table.shape()[1];
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  const auto x = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < vocab,
            "gather_rows: id " + std::to_string(idx[i]) + " out of range");
    std::copy_n(x.begin() + idx[i] * d, d, out.begin() + i * d);
  }
  Shape shape = matrix_shape(idx.size(), d);
  return make_result(std::move(shape), std::move(out), {table},
                     [idx = std::move(idx), d](Node& node) {
                       if (double* g = input_grad(node, 0)) {
                         for (std::size_t i = 0; i < idx.size(); ++i) {
                           for (std::size_t c = 0; c < d; ++c) {
                             g[idx[i] * d + c] += node.grad[i * d + c];
                           }
                         }
                       }
                     });
}

// ---------------------------------------------------- normalization ----

Tensor softmax_masked(const Tensor& logits, const SoftmaxMask& mask) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  require(mask.allows_all() || mask.width() == cols, "softmax_masked: mask width does not match logits");
  const auto x = logits.data();
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = x[r * cols + c];
      require(!std::isnan(v), "softmax_masked: NaN in input");
      if (mask.allowed(r, c)) {
        any = true;
        mx = std::max(mx, v);
      }
    }
    require(any, "degenerate attention row");
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask.allowed(r, c)) {
        out[r * cols + c] = std::exp(x[r * cols + c] - mx);
        z += out[r * cols + c];
      }
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] /= z;
    }
  }
  return make_result(logits.shape(), std::move(out), {logits}, [rows, cols](Node& node) {
    double* g = input_grad(node, 0);
    if (g == nullptr) {
      return;
    }
    const auto& y = node.value;
    const auto& dy = node.grad;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        dot += y[r * cols + c] * dy[r * cols + c];
      }
      for (std::size_t c = 0; c < cols; ++c) {
        g[r * cols + c] += y[r * cols + c] * (dy[r * cols + c] - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t rows = x.rows();
  const std::size_t d = x.cols();
  require(gain.numel() == d && bias.numel() == d, "layer_norm: gain/bias width mismatch");
  const auto in = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  std::vector<double> xhat(rows * d);
  std::vector<double> inv_std(rows);
  std::vector<double> out(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      mu += in[r * d + c];
    }
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = in[r * d + c] - mu;
      var += diff * diff;
    }
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat[r * d + c] = (in[r * d + c] - mu) * inv_std[r];
      out[r * d + c] = gv[c] * xhat[r * d + c] + bv[c];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& node) {
        const auto& gv = input_value(node, 1);
        const auto& dy = node.grad;
        if (double* gx = input_grad(node, 0)) {
          std::vector<double> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dxhat = 0.0;
            double mean_dxhat_xhat = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              dxhat[c] = dy[r * d + c] * gv[c];
              mean_dxhat += dxhat[c];
              mean_dxhat_xhat += dxhat[c] * xhat[r * d + c];
            }
            mean_dxhat /= static_cast<double>(d);
            mean_dxhat_xhat /= static_cast<double>(d);
            for (std::size_t c = 0; c < d; ++c) {
              gx[r * d + c] += inv_std[r] * (dxhat[c] - mean_dxhat - xhat[r * d + c] * mean_dxhat_xhat);
            }
          }
        }
        if (double* gg = input_grad(node, 1)) {
          for (std::size_t i = 0; i < dy.size(); ++i) {
            gg[i % d] += dy[i] * xhat[i];
          }
        }
        if (double* gb = input_grad(node, 2)) {
          for (std::size_t i = 0; i < dy.size(); ++i) {
            gb[i % d] += dy[i];
          }
        }
      });
}

// --------------------------------------------------------------- losses ----

namespace {

// Per-row softmax probabilities and log-sum-exp.
void row_softmax(std::span<const double> x, std::size_t rows, std::size_t cols,
                 std::vector<double>& probs, std::vector<double>& lse) {
  probs.resize(rows * cols);
  lse.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      require(!std::isnan(x[r * cols + c]), "NaN in logits");
      mx = std::max(mx, x[r * cols + c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] = std::exp(x[r * cols + c] - mx);
      z += probs[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] /= z;
    }
    lse[r] = mx + std::log(z);
  }
}

}  // namespace

Tensor target_log_probs(const Tensor& logits, std::span<const std::int32_t> targets) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  require(targets.size() == rows, "target_log_probs: one target per row required");
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  for (std::int32_t t : tgt) {
    require(t >= 0 && static_cast<std::size_t>(t) < cols, "target_log_probs: target out of range");
  }
  std::vector<double> probs;
  std::vector<double> lse;
  row_softmax(logits.data(), rows, cols, probs, lse);
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = logits.data()[r * cols + tgt[r]] - lse[r];
  }
  return make_result({rows}, std::move(out), {logits},
                     [rows, cols, tgt = std::move(tgt), probs = std::move(probs)](Node& node) {
                       if (double* g = input_grad(node, 0)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           const double gr = node.grad[r];
                           for (std::size_t c = 0; c < cols; ++c) {
                             g[r * cols + c] -= gr * probs[r * cols + c];
                           }
                           g[r * cols + tgt[r]] += gr;
                         }
                       }
                     });
}

Tensor cross_entropy_from_logits(const Tensor& logits, std::span<const std::int32_t> targets,
                                 std::int32_t ignore_id) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  require(targets.size() == rows, "cross_entropy: one target per row required");
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  std::size_t count = 0;
  for (std::int32_t t : tgt) {
    if (t == ignore_id) {
      continue;
    }
    require(t >= 0 && static_cast<std::size_t>(t) < cols, "cross_entropy: target out of range");
    ++count;
  }
  require(count > 0, "cross_entropy: every target position is ignored");
  std::vector<double> probs;
  std::vector<double> lse;
  row_softmax(logits.data(), rows, cols, probs, lse);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tgt[r] != ignore_id) {
      total += lse[r] - logits.data()[r * cols + tgt[r]];
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  return make_result({1}, {total * inv}, {logits},
                     [rows, cols, inv, ignore_id, tgt = std::move(tgt), probs = std::move(probs)](Node& node) {
                       if (double* g = input_grad(node, 0)) {
                         const double gr = node.grad[0] * inv;
                         for (std::size_t r = 0; r < rows; ++r) {
                           if (tgt[r] == ignore_id) {
                             continue;
                           }
                           for (std::size_t c = 0; c < cols; ++c) {
                             g[r * cols + c] += gr * probs[r * cols + c];
                           }
                           g[r * cols + tgt[r]] -= gr;
                         }
                       }
                     });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout rate must lie in [0, 1)");
  if (rate == 0.0) {
    return a;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const double factor = 1.0 / (1.0 - rate);
  std::vector<double> m(a.numel());
  for (double& v : m) {
    v = keep(rng) ? factor : 0.0;
  }
  return mul(a, Tensor::from(a.shape(), std::move(m)));
}

}  // namespace fpg::nn
