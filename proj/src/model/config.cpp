// src/model/config.cpp
#include "fpg/model/config.hpp"

#include <json.hpp>

#include "fpg/error.hpp"

namespace fpg::model {

using nlohmann::json;

std::string_view to_string(HistoryEncoderKind kind) {
  switch (kind) {
    case HistoryEncoderKind::gru:
      return "gru";
    case HistoryEncoderKind::cnn:
      return "cnn";
    case HistoryEncoderKind::sa:
      return "sa";
  }
  return "gru";
}

HistoryEncoderKind history_encoder_from_string(std::string_view name) {
  if (name == "gru") {
    return HistoryEncoderKind::gru;
  }
  if (name == "cnn") {
    return HistoryEncoderKind::cnn;
  }
  if (name == "sa") {
    return HistoryEncoderKind::sa;
  }
  throw Error("history_encoder must be one of gru|cnn|sa, got '" + std::string(name) + "'");
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.d_model = 768;
  c.n_heads = 12;
  c.n_blocks = 6;
  c.dropout = 0.1;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error("invalid model config field '" + field + "': " + why);
  };
  if (d_model == 0) {
    fail("d_model", "must be positive");
  }
  if (n_heads == 0 || d_model % n_heads != 0) {
    fail("n_heads", "must divide d_model");
  }
  if (n_blocks == 0) {
    fail("n_blocks", "must be positive");
  }
  if (max_headline_len < 2) {
    fail("max_headline_len", "must be at least 2");
  }
  if (max_body_len < 1) {
    fail("max_body_len", "must be positive");
  }
  if (max_history < 1) {
    fail("max_history", "must be positive");
  }
  if (vocab_size < 5) {
    fail("vocab_size", "must exceed the reserved tokens");
  }
  if (ffn_multiplier == 0) {
    fail("ffn_multiplier", "must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    fail("dropout", "must lie in [0, 1)");
  }
  if (init_std <= 0.0) {
    fail("init_std", "must be positive");
  }
}

std::string ModelConfig::to_json() const {
  json j = {{"d_model", d_model},
            {"n_heads", n_heads},
            {"n_blocks", n_blocks},
            {"max_headline_len", max_headline_len},
            {"max_body_len", max_body_len},
            {"max_history", max_history},
            {"vocab_size", vocab_size},
            {"ffn_multiplier", ffn_multiplier},
            {"history_encoder", std::string(to_string(history_encoder))},
            {"dropout", dropout},
            {"init_std", init_std}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  ModelConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("model config is not valid JSON: ") + e.what());
  }
  auto read = [&](const char* key, auto& field) {
    if (!j.contains(key)) {
      return;
    }
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw Error(std::string("invalid model config field '") + key + "'");
    }
  };
  read("d_model", c.d_model);
  read("n_heads", c.n_heads);
  read("n_blocks", c.n_blocks);
  read("max_headline_len", c.max_headline_len);
  read("max_body_len", c.max_body_len);
  read("max_history", c.max_history);
  read("vocab_size", c.vocab_size);
  read("ffn_multiplier", c.ffn_multiplier);
  read("dropout", c.dropout);
  read("init_std", c.init_std);
  if (j.contains("history_encoder")) {
    c.history_encoder = history_encoder_from_string(j.at("history_encoder").get<std::string>());
  }
  c.validate();
  return c;
}

}  // namespace fpg::model
