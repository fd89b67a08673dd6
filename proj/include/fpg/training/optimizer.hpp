// include/fpg/training/optimizer.hpp
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fpg/error.hpp"
#include "fpg/model/parameters.hpp"

namespace fpg::training {

// Raised before any parameter is touched when a gradient is NaN or infinite.
class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(const std::string& parameter)
      : Error("non-finite gradient in " + parameter), parameter_(parameter) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// AdamW with bias correction and decoupled, lr-scaled weight decay. Only
// parameters flagged trainable are touched; decay applies to those whose
// `decay` flag is set.
class AdamW {
 public:
  explicit AdamW(const model::ParameterStore& params, AdamWOptions options = {});

  // Throws NonFiniteGradient (leaving everything unchanged) on a NaN/inf gradient.
  void step(model::ParameterStore& params, const std::vector<bool>& trainable, double lr, double weight_decay);

  std::uint64_t steps() const { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  void save(const std::filesystem::path& path, const model::ParameterStore& params) const;
  void load(const std::filesystem::path& path, const model::ParameterStore& params);

 private:
  AdamWOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Scales the trainable gradients so their joint L2 norm is at most max_norm.
// Returns the norm before scaling.
double clip_grad_norm(model::ParameterStore& params, const std::vector<bool>& trainable, double max_norm);

}  // namespace fpg::training
