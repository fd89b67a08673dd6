// src/nn/tensor.cpp
#include "fpg/nn/tensor.hpp"

#include <spdlog/spdlog.h>

#include <sstream>
#include <utility>

#include "fpg/error.hpp"

namespace fpg::nn {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? ", " : "") << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) {
    grad.assign(value.size(), 0.0);
  }
  return grad;
}

namespace {

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  if (shape.empty()) {
    throw Error("tensor shape must have at least one dimension");
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }
  if (shape_numel(shape) != values.size()) {
    throw Error("tensor data length " + std::to_string(values.size()) +
                " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  std::vector<double> values(shape_numel(shape), value);
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(new_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  auto node = new_node(std::move(shape), std::move(values));
  node->requires_grad = true;
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
  if (!node_) {
    throw Error("use of an undefined tensor");
  }
  return node_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const { return numel() / cols(); }

std::size_t Tensor::cols() const { return shape().back(); }

std::span<const double> Tensor::data() const {
  shape();
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  shape();
  if (node_->backward) {
    throw Error("only leaf tensors may be modified in place");
  }
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw Error("item() requires a single-element tensor, got " + shape_string(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols()) {
    throw Error("tensor index out of range");
  }
  return node_->value[row * cols() + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) {
    node_->grad.clear();
  }
}

std::uint64_t Tensor::node_id() const { return node_ ? node_->id : 0; }

void Tape::record(const std::shared_ptr<detail::Node>& node) {
  node->id = next_id_++;
  nodes_.push_back(node);
}

bool Tape::contains(const Tensor& t) const {
  if (!t.defined() || t.node_id() == 0) {
    return false;
  }
  const std::uint64_t id = t.node_id();
  // ids are assigned in recording order
  std::size_t lo = 0;
  std::size_t hi = nodes_.size();
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (nodes_[mid]->id < id) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo < nodes_.size() && nodes_[lo] == t.node();
}

void Tape::clear() { nodes_.clear(); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    spdlog::warn("backward called on a detached graph; all gradients are zero");
    return;
  }
  if (!loss.node()->backward) {
    // loss is itself a parameter
    loss.node()->grad_buffer()[0] += 1.0;
    return;
  }
  if (!contains(loss)) {
    throw Error("loss was not recorded on this tape");
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node& node = **it;
    if (node.grad.empty() || !node.backward) {
      continue;
    }
    node.backward(node);
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (tape == nullptr) {
    if (loss.defined() && loss.numel() == 1 && !loss.requires_grad()) {
      spdlog::warn("backward called on a detached graph; all gradients are zero");
      return;
    }
    throw Error("backward requires an active tape");
  }
  tape->backward(loss);
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward) {
  auto node = new_node(std::move(shape), std::move(value));
  Tape* tape = active_tape();
  if (tape == nullptr) {
    return Tensor(std::move(node));
  }
  bool needs = false;
  for (const Tensor& in : inputs) {
    needs = needs || in.requires_grad();
  }
  if (!needs) {
    return Tensor(std::move(node));
  }
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (Tensor& in : inputs) {
    node->inputs.push_back(in.node());
  }
  node->backward = std::move(backward);
  tape->record(node);
  return Tensor(std::move(node));
}

}  // namespace fpg::nn
