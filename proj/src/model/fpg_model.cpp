// src/model/fpg_model.cpp
#include "fpg/model/fpg_model.hpp"

#include <cmath>
#include <json.hpp>

#include "fpg/error.hpp"
#include "fpg/nn/ops.hpp"

namespace fpg::model {

using nn::Tensor;
using text::TokenId;
using text::TokenSeq;

FpgModel::FpgModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  build(seed);
}

nn::Linear FpgModel::make_linear(const std::string& name, std::size_t in, std::size_t out, Partition p,
                                 std::mt19937_64& rng) {
  nn::Linear layer;
  layer.weight = params_.add_normal(name + ".w", {in, out}, p, config_.init_std, rng);
  layer.bias = params_.add_constant(name + ".b", {out}, p, 0.0);
  return layer;
}

nn::LayerNormWeights FpgModel::make_layer_norm(const std::string& name, Partition p) {
  return {params_.add_constant(name + ".gain", {config_.d_model}, p, 1.0),
          params_.add_constant(name + ".bias", {config_.d_model}, p, 0.0)};
}

nn::AttentionWeights FpgModel::make_attention(const std::string& name, Partition p, std::mt19937_64& rng) {
  const std::size_t d = config_.d_model;
  return {make_linear(name + ".q", d, d, p, rng), make_linear(name + ".k", d, d, p, rng),
          make_linear(name + ".v", d, d, p, rng), make_linear(name + ".o", d, d, p, rng)};
}

void FpgModel::build(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d_model;
  const std::size_t ffn = d * config_.ffn_multiplier;
  const double sd = config_.init_std;
  constexpr auto core = Partition::core;
  constexpr auto personal = Partition::personal;

  token_embedding_ = params_.add_normal("embed.token", {config_.vocab_size, d}, core, sd, rng, false);
  encoder_positions_ = params_.add_normal("embed.enc_pos", {config_.max_body_len, d}, core, sd, rng, false);
  decoder_positions_ = params_.add_normal("embed.dec_pos", {config_.max_headline_len, d}, core, sd, rng, false);

  for (std::size_t i = 0; i < config_.n_blocks; ++i) {
    const std::string p = "enc." + std::to_string(i);
    EncoderBlock b;
    b.self_ln = make_layer_norm(p + ".self_ln", core);
    b.self_attn = make_attention(p + ".self", core, rng);
    b.hist_ln = make_layer_norm(p + ".hist_ln", personal);
    b.hist_attn = make_attention(p + ".hist", personal, rng);
    b.ffn_ln = make_layer_norm(p + ".ffn_ln", core);
    b.ffn = {make_linear(p + ".ffn.inner", d, ffn, core, rng), make_linear(p + ".ffn.outer", ffn, d, core, rng)};
    encoder_.push_back(std::move(b));
  }
  encoder_final_ln_ = make_layer_norm("enc.final_ln", core);

  for (std::size_t i = 0; i < config_.n_blocks; ++i) {
    const std::string p = "dec." + std::to_string(i);
    DecoderBlock b;
    b.self_ln = make_layer_norm(p + ".self_ln", core);
    b.self_attn = make_attention(p + ".self", core, rng);
    b.cross_ln = make_layer_norm(p + ".cross_ln", core);
    b.cross_attn = make_attention(p + ".cross", core, rng);
    b.ffn_ln = make_layer_norm(p + ".ffn_ln", core);
    b.ffn = {make_linear(p + ".ffn.inner", d, ffn, core, rng), make_linear(p + ".ffn.outer", ffn, d, core, rng)};
    decoder_.push_back(std::move(b));
  }
  decoder_final_ln_ = make_layer_norm("dec.final_ln", core);
  output_ = make_linear("out", d, config_.vocab_size, core, rng);

  switch (config_.history_encoder) {
    case HistoryEncoderKind::gru: {
      auto m = [&](const char* n) { return params_.add_normal(std::string("hist.gru.") + n, {d, d}, personal, sd, rng); };
      auto b = [&](const char* n) { return params_.add_constant(std::string("hist.gru.") + n, {d}, personal, 0.0); };
      gru_.w_z = m("w_z");
      gru_.u_z = m("u_z");
      gru_.b_z = b("b_z");
      gru_.w_r = m("w_r");
      gru_.u_r = m("u_r");
      gru_.b_r = b("b_r");
      gru_.w_h = m("w_h");
      gru_.u_h = m("u_h");
      gru_.b_h = b("b_h");
      break;
    }
    case HistoryEncoderKind::cnn:
      conv_ = make_linear("hist.cnn", 3 * d, d, personal, rng);
      break;
    case HistoryEncoderKind::sa:
      history_self_attn_ = make_attention("hist.sa", personal, rng);
      break;
  }
  word_score_ = make_linear("hist.attn", d, d, personal, rng);
}

namespace {

nlohmann::json header_json(const ModelConfig& config, int completed_stage) {
  return {{"config", nlohmann::json::parse(config.to_json())}, {"completed_stage", completed_stage}};
}

struct Header {
  ModelConfig config;
  int completed_stage = 0;
};

Header parse_header(const std::string& text, const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(text);
    Header h;
    h.config = ModelConfig::from_json(j.at("config").dump());
    h.completed_stage = j.value("completed_stage", 0);
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad parameter file header in " + path.string() + ": " + e.what());
  }
}

}  // namespace

void FpgModel::save(const std::filesystem::path& path) const {
  write_parameter_file(path, header_json(config_, completed_stage_).dump(), params_);
}

void FpgModel::load(const std::filesystem::path& path) {
  const ParameterFile file = read_parameter_file(path);
  const Header header = parse_header(file.header_json, path);
  if (!(header.config == config_)) {
    throw Error("config mismatch loading " + path.string() + ": file has " + header.config.to_json() +
                ", model has " + config_.to_json());
  }
  if (file.entries.size() != params_.size()) {
    throw Error("parameter count mismatch loading " + path.string());
  }
  for (std::size_t i = 0; i < file.entries.size(); ++i) {
    const auto& e = file.entries[i];
    auto& p = params_.all()[i];
    if (e.name != p.name || e.shape != p.tensor.shape() || e.partition != p.partition) {
      throw Error("parameter layout mismatch at " + e.name + " loading " + path.string());
    }
    std::copy(e.values.begin(), e.values.end(), p.tensor.mutable_data().begin());
  }
  completed_stage_ = header.completed_stage;
}

FpgModel FpgModel::from_file(const std::filesystem::path& path) {
  const Header header = parse_header(read_parameter_file(path).header_json, path);
  FpgModel model(header.config, 0);
  model.load(path);
  return model;
}

namespace {

Tensor embed(const Tensor& table, const Tensor& positions, std::span<const TokenId> ids) {
  return nn::add(nn::gather_rows(table, ids), nn::slice_rows(positions, 0, ids.size()));
}

void trace(const ForwardContext& ctx, const std::vector<Tensor>& probs) {
  if (ctx.attention != nullptr) {
    ctx.attention->insert(ctx.attention->end(), probs.begin(), probs.end());
  }
}

nn::DropoutContext dropout_for(const ModelConfig& config, const ForwardContext& ctx) {
  return {ctx.dropout_rng != nullptr ? config.dropout : 0.0, ctx.dropout_rng};
}

double head_scale(const ModelConfig& config) {
  return 1.0 / std::sqrt(static_cast<double>(config.d_model / config.n_heads));
}

}  // namespace

Tensor FpgModel::encode_headline(std::span<const TokenId> ids, const ForwardContext& ctx,
                                 std::vector<Tensor>& word_attention) const {
  if (ids.empty()) {
    throw Error("history headline has no tokens");
  }
  const std::size_t len = ids.size();
  const Tensor x = nn::gather_rows(token_embedding_, ids);
  Tensor h;
  switch (config_.history_encoder) {
    case HistoryEncoderKind::gru:
      h = nn::gru_sequence(x, gru_);
      break;
    case HistoryEncoderKind::cnn: {
      // Window 3 with zero padding at both ends of the true-length sequence.
      const Tensor zero = Tensor::zeros({1, config_.d_model});
      const Tensor prev = len == 1 ? zero : nn::concat_rows({zero, nn::slice_rows(x, 0, len - 1)});
      const Tensor next = len == 1 ? zero : nn::concat_rows({nn::slice_rows(x, 1, len - 1), zero});
      h = nn::tanh(nn::linear(nn::concat_cols({prev, x, next}), conv_));
      break;
    }
    case HistoryEncoderKind::sa: {
      auto attn = nn::multi_head_attention(x, x, history_self_attn_, config_.n_heads, head_scale(config_), {});
      trace(ctx, attn.head_probs);
      h = attn.output;
      break;
    }
  }
  // Literal word score: score_j = h_j . tanh(V_a h_j + b_a).
  const Tensor scores = nn::row_sum(nn::mul(h, nn::tanh(nn::linear(h, word_score_))));
  const Tensor a = nn::softmax_masked(nn::reshape(scores, {1, len}));
  word_attention.push_back(a);
  trace(ctx, {a});
  return nn::matmul(a, h);
}

HistoryEncoding FpgModel::encode_history(const std::vector<TokenSeq>& history, const ForwardContext& ctx) const {
  if (history.empty()) {
    throw Error("history required");
  }
  const std::size_t n = config_.max_history;
  const std::size_t first = history.size() > n ? history.size() - n : 0;
  HistoryEncoding out;
  std::vector<Tensor> rows;
  for (std::size_t i = first; i < history.size(); ++i) {
    const auto ids = history[i].tokens();
    rows.push_back(encode_headline(ids.size() > config_.max_headline_len ? ids.first(config_.max_headline_len) : ids,
                                   ctx, out.word_attention));
  }
  out.present.assign(n, false);
  std::fill_n(out.present.begin(), rows.size(), true);
  if (rows.size() < n) {
    rows.push_back(Tensor::zeros({n - rows.size(), config_.d_model}));
  }
  out.reps = nn::concat_rows(rows);
  return out;
}

Tensor compute_user_embedding(const Tensor& e_u, const Tensor& alpha) { return nn::matmul(alpha, e_u); }

EncodedState FpgModel::encode(const TokenSeq& body, const std::vector<TokenSeq>& history, Conditioning mode,
                              const ForwardContext& ctx) const {
  auto ids = body.tokens();
  if (ids.empty()) {
    throw Error("body has no tokens");
  }
  if (ids.size() > config_.max_body_len) {
    ids = ids.first(config_.max_body_len);
  }
  const nn::DropoutContext drop = dropout_for(config_, ctx);
  const bool personal = mode == Conditioning::personalized;

  EncodedState state;
  nn::SoftmaxMask history_mask;
  if (personal) {
    HistoryEncoding hist = encode_history(history, ctx);
    state.e_u = hist.reps;
    state.history_present = hist.present;
    history_mask = nn::SoftmaxMask::columns(hist.present);
  }

  Tensor x = drop.apply(embed(token_embedding_, encoder_positions_, ids));
  for (std::size_t b = 0; b < encoder_.size(); ++b) {
    const EncoderBlock& blk = encoder_[b];
    const Tensor xn = nn::layer_norm(x, blk.self_ln);
    auto self = nn::multi_head_attention(xn, xn, blk.self_attn, config_.n_heads, head_scale(config_), {});
    trace(ctx, self.head_probs);
    x = nn::add(x, drop.apply(self.output));

    if (personal) {
      // Queries from the body, keys and values from E_u, scale 1/sqrt(d_e).
      const double s = 1.0 / std::sqrt(static_cast<double>(config_.d_model));
      auto cross = nn::multi_head_attention(nn::layer_norm(x, blk.hist_ln), state.e_u, blk.hist_attn,
                                            config_.n_heads, s, history_mask);
      trace(ctx, cross.head_probs);
      x = nn::add(x, drop.apply(cross.output));
      if (b == 0) {
        // Mean over heads and body positions of the first block's cross attention.
        const std::size_t rows = ids.size();
        const Tensor avg_rows = Tensor::filled({1, rows}, 1.0 / static_cast<double>(rows));
        Tensor acc;
        for (const Tensor& p : cross.head_probs) {
          const Tensor r = nn::matmul(avg_rows, p);
          acc = acc.defined() ? nn::add(acc, r) : r;
        }
        state.alpha = cross.head_probs.size() == 1 ? acc
                                                   : nn::scale(acc, 1.0 / static_cast<double>(cross.head_probs.size()));
      }
    }

    x = nn::add(x, drop.apply(nn::feed_forward(nn::layer_norm(x, blk.ffn_ln), blk.ffn, drop)));
  }
  state.x_enc = nn::layer_norm(x, encoder_final_ln_);
  if (personal) {
    state.u = compute_user_embedding(state.e_u, state.alpha);
  }
  return state;
}

Tensor FpgModel::decode(const EncodedState& state, std::span<const TokenId> prefix, Conditioning mode,
                        const ForwardContext& ctx) const {
  if (prefix.empty()) {
    throw Error("decoder prefix must start with the BOS slot");
  }
  if (prefix.size() > config_.max_headline_len) {
    throw Error("decoder prefix of length " + std::to_string(prefix.size()) + " exceeds the headline limit " +
                std::to_string(config_.max_headline_len));
  }
  const nn::DropoutContext drop = dropout_for(config_, ctx);
  const std::size_t t = prefix.size();

  Tensor tokens;
  if (mode == Conditioning::personalized) {
    if (!state.u.defined()) {
      throw Error("personalized decoding needs a user embedding");
    }
    // The user embedding takes the BOS slot.
    tokens = t == 1 ? state.u
                    : nn::concat_rows({state.u, nn::gather_rows(token_embedding_, prefix.subspan(1))});
  } else {
    const TokenId bos = text::kBos;
    tokens = t == 1 ? nn::gather_rows(token_embedding_, {&bos, 1})
                    : nn::concat_rows({nn::gather_rows(token_embedding_, {&bos, 1}),
                                       nn::gather_rows(token_embedding_, prefix.subspan(1))});
  }
  Tensor y = drop.apply(nn::add(tokens, nn::slice_rows(decoder_positions_, 0, t)));

  const nn::SoftmaxMask causal = nn::SoftmaxMask::causal(t);
  for (const DecoderBlock& blk : decoder_) {
    const Tensor yn = nn::layer_norm(y, blk.self_ln);
    auto self = nn::multi_head_attention(yn, yn, blk.self_attn, config_.n_heads, head_scale(config_), causal);
    trace(ctx, self.head_probs);
    y = nn::add(y, drop.apply(self.output));

    auto cross = nn::multi_head_attention(nn::layer_norm(y, blk.cross_ln), state.x_enc, blk.cross_attn,
                                          config_.n_heads, head_scale(config_), {});
    trace(ctx, cross.head_probs);
    y = nn::add(y, drop.apply(cross.output));

    y = nn::add(y, drop.apply(nn::feed_forward(nn::layer_norm(y, blk.ffn_ln), blk.ffn, drop)));
  }
  return nn::linear(nn::layer_norm(y, decoder_final_ln_), output_);
}

Tensor FpgModel::forward(const TokenSeq& body, const std::vector<TokenSeq>& history,
                         std::span<const TokenId> prefix, Conditioning mode, const ForwardContext& ctx) const {
  return decode(encode(body, history, mode, ctx), prefix, mode, ctx);
}

namespace {

// Row indices whose target is not PAD.
std::vector<std::int32_t> real_positions(std::span<const TokenId> targets) {
  std::vector<std::int32_t> rows;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] != text::kPad) {
      rows.push_back(static_cast<std::int32_t>(i));
    }
  }
  if (rows.empty()) {
    throw Error("target has no non-PAD tokens");
  }
  return rows;
}

Tensor clamped_target_probs(const Tensor& logits, std::span<const TokenId> targets) {
  if (logits.rows() != targets.size()) {
    throw Error("logits rows and target length differ");
  }
  const auto rows = real_positions(targets);
  std::vector<TokenId> kept;
  for (auto r : rows) {
    kept.push_back(targets[static_cast<std::size_t>(r)]);
  }
  const Tensor lp = nn::target_log_probs(nn::gather_rows(logits, rows), kept);
  constexpr double eps = 1e-12;
  return nn::clamp(nn::exp(lp), eps, 1.0 - eps);
}

}  // namespace

Tensor loss_nll(const Tensor& logits, std::span<const TokenId> targets) {
  if (logits.rows() != targets.size()) {
    throw Error("logits rows and target length differ");
  }
  real_positions(targets);
  return nn::cross_entropy_from_logits(logits, targets, text::kPad);
}

Tensor loss_contrastive(const Tensor& logits_pos, std::span<const TokenId> targets_pos, const Tensor& logits_neg,
                        std::span<const TokenId> targets_neg) {
  const Tensor p_pos = clamped_target_probs(logits_pos, targets_pos);
  const Tensor p_neg = clamped_target_probs(logits_neg, targets_neg);
  const Tensor pos_term = nn::mean(nn::log(p_pos));
  const Tensor neg_term = nn::mean(nn::log(nn::add_scalar(nn::scale(p_neg, -1.0), 1.0)));
  return nn::scale(nn::add(pos_term, neg_term), -1.0);
}

double mean_token_log_prob(const Tensor& logits, std::span<const TokenId> targets) {
  const auto rows = real_positions(targets);
  std::vector<TokenId> kept;
  for (auto r : rows) {
    kept.push_back(targets[static_cast<std::size_t>(r)]);
  }
  const Tensor lp = nn::target_log_probs(nn::gather_rows(logits, rows), kept);
  double total = 0.0;
  for (double v : lp.data()) {
    total += v;
  }
  return total / static_cast<double>(kept.size());
}

TeacherForcing teacher_forcing(const TokenSeq& headline) {
  const auto ids = headline.tokens();
  if (ids.empty()) {
    throw Error("target has no non-PAD tokens");
  }
  TeacherForcing tf;
  tf.inputs.push_back(text::kBos);
  tf.inputs.insert(tf.inputs.end(), ids.begin(), ids.end() - 1);
  tf.targets.assign(ids.begin(), ids.end());
  return tf;
}

}  // namespace fpg::model
