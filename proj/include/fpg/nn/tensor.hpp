// include/fpg/nn/tensor.hpp
//
// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle to a node. Leaves (parameters, constants) live
// outside any tape. Every primitive evaluated while a TapeScope is active and
// at least one input requires a gradient is appended to that tape; creation
// order is a valid topological order, so backward() simply walks the tape in
// reverse. Tapes are rebuilt on every forward pass and are single-threaded;
// the active tape is thread-local so independent replicas can run side by
// side.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fpg::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Lazily allocates the gradient buffer.
  std::vector<double>& grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // A leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // 2-D view: cols is the last dimension, rows the product of the rest.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Mutable access for leaves only (optimizer updates, finite differences).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  std::uint64_t node_id() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const std::shared_ptr<detail::Node>& node);
  std::size_t size() const { return nodes_.size(); }
  bool contains(const Tensor& t) const;
  void clear();

  // Accumulates d(loss)/d(x) into every reachable tensor that requires a
  // gradient. Throws if loss is not a scalar.
  void backward(const Tensor& loss);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::uint64_t next_id_ = 1;
};

// Makes a tape the active recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// backward on the active tape.
void backward(const Tensor& loss);

// Builds the output of a primitive. When recording is on and some input
// requires a gradient, the node is appended to the active tape together with
// its backward closure; otherwise the result is a plain constant.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward);

}  // namespace fpg::nn
