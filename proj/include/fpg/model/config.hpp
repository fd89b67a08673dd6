// include/fpg/model/config.hpp
#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace fpg::model {

enum class HistoryEncoderKind { gru, cnn, sa };

std::string_view to_string(HistoryEncoderKind kind);
HistoryEncoderKind history_encoder_from_string(std::string_view name);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_blocks = 2;
  std::size_t max_headline_len = 16;  // T
  std::size_t max_body_len = 64;      // M
  std::size_t max_history = 8;        // N
  std::size_t vocab_size = 2000;
  std::size_t ffn_multiplier = 4;
  HistoryEncoderKind history_encoder = HistoryEncoderKind::gru;
  double dropout = 0.0;
  double init_std = 0.02;

  // 12 heads, 6 blocks, width 768 as in the published setup.
  static ModelConfig paper_scale();

  // Throws fpg::Error naming the offending field.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(std::string_view json);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace fpg::model
