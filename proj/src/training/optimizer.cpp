// src/training/optimizer.cpp
#include "fpg/training/optimizer.hpp"

#include <cmath>
#include <json.hpp>

namespace fpg::training {

AdamW::AdamW(const model::ParameterStore& params, AdamWOptions options) : options_(options) {
  for (const auto& p : params.all()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step(model::ParameterStore& params, const std::vector<bool>& trainable, double lr, double weight_decay) {
  auto& all = params.all();
  if (all.size() != m_.size() || trainable.size() != all.size()) {
    throw Error("optimizer state does not match the parameter set");
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!trainable[i] || !all[i].tensor.has_grad()) {
      continue;
    }
    for (double g : all[i].tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NonFiniteGradient(all[i].name);
      }
    }
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!trainable[i]) {
      continue;
    }
    auto values = all[i].tensor.mutable_data();
    const bool has_grad = all[i].tensor.has_grad();
    const auto grad = has_grad ? all[i].tensor.grad() : std::span<const double>{};
    const double decay = all[i].decay ? weight_decay : 0.0;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = has_grad ? grad[k] : 0.0;
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + options_.eps);
      values[k] -= lr * (update + decay * values[k]);
    }
  }
}

double clip_grad_norm(model::ParameterStore& params, const std::vector<bool>& trainable, double max_norm) {
  auto& all = params.all();
  double sq = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (trainable[i] && all[i].tensor.has_grad()) {
      for (double g : all[i].tensor.grad()) {
        sq += g * g;
      }
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (trainable[i] && all[i].tensor.has_grad()) {
        auto& g = all[i].tensor.node()->grad;
        for (double& x : g) {
          x *= factor;
        }
      }
    }
  }
  return norm;
}

void AdamW::save(const std::filesystem::path& path, const model::ParameterStore& params) const {
  model::ParameterStore state;
  const auto& all = params.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    state.add("m/" + all[i].name, all[i].tensor.shape(), all[i].partition, false, m_[i]);
    state.add("v/" + all[i].name, all[i].tensor.shape(), all[i].partition, false, v_[i]);
  }
  const nlohmann::json header = {
      {"steps", steps_}, {"beta1", options_.beta1}, {"beta2", options_.beta2}, {"eps", options_.eps}};
  model::write_parameter_file(path, header.dump(), state);
}

void AdamW::load(const std::filesystem::path& path, const model::ParameterStore& params) {
  const auto file = model::read_parameter_file(path);
  const auto header = nlohmann::json::parse(file.header_json);
  const auto& all = params.all();
  if (file.entries.size() != 2 * all.size()) {
    throw Error("optimizer state in " + path.string() + " does not match the model");
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& m = file.entries[2 * i];
    const auto& v = file.entries[2 * i + 1];
    if (m.name != "m/" + all[i].name || v.name != "v/" + all[i].name) {
      throw Error("optimizer state in " + path.string() + " does not match the model at " + all[i].name);
    }
    m_[i] = m.values;
    v_[i] = v.values;
  }
  steps_ = header.at("steps").get<std::uint64_t>();
  options_.beta1 = header.at("beta1").get<double>();
  options_.beta2 = header.at("beta2").get<double>();
  options_.eps = header.at("eps").get<double>();
}

}  // namespace fpg::training
