// Small models and random inputs shared by the unit and acceptance tests.
#pragma once

#include <random>
#include <vector>

#include "fpg/model/config.hpp"
#include "fpg/nn/tensor.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::testkit {

// d_e=8, 1 head, 1 block, M=6, T=4, N=2.
inline model::ModelConfig grad_config(model::HistoryEncoderKind kind = model::HistoryEncoderKind::gru) {
  model::ModelConfig c;
  c.d_model = 8;
  c.n_heads = 1;
  c.n_blocks = 1;
  c.max_body_len = 6;
  c.max_headline_len = 4;
  c.max_history = 2;
  c.vocab_size = 10;
  c.ffn_multiplier = 2;
  c.history_encoder = kind;
  c.init_std = 0.3;
  return c;
}

inline model::ModelConfig small_config(model::HistoryEncoderKind kind = model::HistoryEncoderKind::gru) {
  model::ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_blocks = 2;
  c.max_body_len = 10;
  c.max_headline_len = 6;
  c.max_history = 4;
  c.vocab_size = 20;
  c.ffn_multiplier = 2;
  c.history_encoder = kind;
  c.init_std = 0.2;
  return c;
}

// Random non-reserved ids, padded to `capacity`, optionally ending in EOS.
inline text::TokenSeq random_seq(std::mt19937_64& rng, std::size_t vocab, std::size_t len, std::size_t capacity,
                                 bool eos = false) {
  std::uniform_int_distribution<int> pick(static_cast<int>(text::kNumReserved), static_cast<int>(vocab) - 1);
  text::TokenSeq s;
  s.ids.assign(capacity, text::kPad);
  for (std::size_t i = 0; i < len; ++i) {
    s.ids[i] = pick(rng);
  }
  if (eos) {
    s.ids[len - 1] = text::kEos;
  }
  s.true_length = len;
  return s;
}

inline std::size_t random_len(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) {
    x = g(rng);
  }
  return v;
}

inline nn::Tensor random_parameter(std::mt19937_64& rng, nn::Shape shape, double scale = 1.0) {
  const std::size_t n = nn::shape_numel(shape);
  return nn::Tensor::parameter(std::move(shape), random_values(rng, n, scale));
}

}  // namespace fpg::testkit
