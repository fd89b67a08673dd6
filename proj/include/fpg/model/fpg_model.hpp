// include/fpg/model/fpg_model.hpp
//
// The personalized encoder-decoder. Inputs are token sequences trimmed to
// their true lengths, so padding never reaches an attention layer; absent
// history slots are represented by zero rows of E_u that are masked in the
// history-cross attention.
//
// Two conditioning modes share one parameter set:
//   personalized  history encoder + history-cross sub-layers active and the
//                 BOS slot of the decoder carries the user embedding u;
//   plain         both bypassed: a standard encoder-decoder with a true BOS
//                 embedding (pretraining stage and the no-history ablation).
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fpg/model/config.hpp"
#include "fpg/model/parameters.hpp"
#include "fpg/nn/layers.hpp"
#include "fpg/nn/tensor.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::model {

enum class Conditioning { personalized, plain };

// Optional per-pass settings. `attention` collects every attention
// distribution computed during the pass (one matrix per head and layer).
struct ForwardContext {
  std::mt19937_64* dropout_rng = nullptr;
  std::vector<nn::Tensor>* attention = nullptr;
};

struct HistoryEncoding {
  nn::Tensor reps;            // E_u [N, d]; rows >= present count are zero
  std::vector<bool> present;  // length N
  std::vector<nn::Tensor> word_attention;  // a_j per headline, [1, len]
};

struct EncodedState {
  nn::Tensor x_enc;  // [body length, d]
  // Personalized mode only.
  nn::Tensor e_u;    // [N, d]
  nn::Tensor alpha;  // [1, N]
  nn::Tensor u;      // [1, d]
  std::vector<bool> history_present;
};

class FpgModel {
 public:
  FpgModel(const ModelConfig& config, std::uint64_t seed);

  // Reads config and parameters from a parameter file.
  static FpgModel from_file(const std::filesystem::path& path);

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  // Last finished training stage (0 = untrained). Persisted with the parameters.
  int completed_stage() const { return completed_stage_; }
  void set_completed_stage(int stage) { completed_stage_ = stage; }

  void save(const std::filesystem::path& path) const;
  // Overwrites this model's parameters; throws if the file's config differs.
  void load(const std::filesystem::path& path);

  // Word-attention summary of every clicked headline. Throws "history required" when empty and
  // keeps only the most recent N entries.
  HistoryEncoding encode_history(const std::vector<text::TokenSeq>& history, const ForwardContext& ctx = {}) const;

  EncodedState encode(const text::TokenSeq& body, const std::vector<text::TokenSeq>& history, Conditioning mode,
                      const ForwardContext& ctx = {}) const;

  // Logits [prefix length, vocab] for a decoder prefix whose first id is the
  // BOS slot. Throws when the prefix is longer than the headline limit.
  nn::Tensor decode(const EncodedState& state, std::span<const text::TokenId> prefix, Conditioning mode,
                    const ForwardContext& ctx = {}) const;

  nn::Tensor forward(const text::TokenSeq& body, const std::vector<text::TokenSeq>& history,
                     std::span<const text::TokenId> prefix, Conditioning mode, const ForwardContext& ctx = {}) const;

 private:
  struct EncoderBlock {
    nn::LayerNormWeights self_ln;
    nn::AttentionWeights self_attn;
    nn::LayerNormWeights hist_ln;  // personal
    nn::AttentionWeights hist_attn;  // personal
    nn::LayerNormWeights ffn_ln;
    nn::FeedForwardWeights ffn;
  };
  struct DecoderBlock {
    nn::LayerNormWeights self_ln;
    nn::AttentionWeights self_attn;
    nn::LayerNormWeights cross_ln;
    nn::AttentionWeights cross_attn;
    nn::LayerNormWeights ffn_ln;
    nn::FeedForwardWeights ffn;
  };

  void build(std::uint64_t seed);
  nn::Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Partition p, std::mt19937_64& rng);
  nn::LayerNormWeights make_layer_norm(const std::string& name, Partition p);
  nn::AttentionWeights make_attention(const std::string& name, Partition p, std::mt19937_64& rng);
  nn::Tensor encode_headline(std::span<const text::TokenId> ids, const ForwardContext& ctx,
                             std::vector<nn::Tensor>& word_attention) const;

  ModelConfig config_;
  ParameterStore params_;
  int completed_stage_ = 0;

  nn::Tensor token_embedding_;
  nn::Tensor encoder_positions_;
  nn::Tensor decoder_positions_;
  std::vector<EncoderBlock> encoder_;
  nn::LayerNormWeights encoder_final_ln_;
  std::vector<DecoderBlock> decoder_;
  nn::LayerNormWeights decoder_final_ln_;
  nn::Linear output_;

  // History encoder (personal partition).
  nn::GruWeights gru_;
  nn::Linear conv_;  // window 3: [3d, d]
  nn::AttentionWeights history_self_attn_;
  nn::Linear word_score_;  // V_a, b_a
};

// u = alpha E_u with alpha [1, N] and E_u [N, d].
nn::Tensor compute_user_embedding(const nn::Tensor& e_u, const nn::Tensor& alpha);

// Mean over non-PAD positions of -log softmax(logits)[target]. Throws when
// every target is PAD.
nn::Tensor loss_nll(const nn::Tensor& logits, std::span<const text::TokenId> targets);

// Token-level contrastive loss:
//   -mean_t log p(y+_t) - mean_t log(1 - p(y-_t)),  p clamped to [1e-12, 1 - 1e-12].
nn::Tensor loss_contrastive(const nn::Tensor& logits_pos, std::span<const text::TokenId> targets_pos,
                            const nn::Tensor& logits_neg, std::span<const text::TokenId> targets_neg);

// Mean per-token log-probability of the non-PAD targets.
double mean_token_log_prob(const nn::Tensor& logits, std::span<const text::TokenId> targets);

// Teacher forcing for an encoded headline (y_1..y_k, EOS): decoder input
// [BOS, y_1..y_k] and targets [y_1..y_k, EOS], both trimmed to true length.
struct TeacherForcing {
  std::vector<text::TokenId> inputs;
  std::vector<text::TokenId> targets;
};
TeacherForcing teacher_forcing(const text::TokenSeq& headline);

}  // namespace fpg::model
