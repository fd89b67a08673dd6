// include/fpg/decoding/beam_search.hpp
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fpg/model/fpg_model.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::decoding {

struct BeamOptions {
  std::size_t beam_width = 3;
  std::size_t max_len = 0;  // 0: the model's headline limit
  double length_penalty = 1.0;
  model::Conditioning conditioning = model::Conditioning::personalized;
};

struct Hypothesis {
  std::vector<text::TokenId> tokens;  // generated ids, EOS included when finished by it
  double log_prob = 0.0;
  bool finished = false;
};

struct DecodeResult {
  std::vector<text::TokenId> tokens;  // without EOS
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length^penalty
};

// Final ranking key of a hypothesis.
double normalized_score(double log_prob, std::size_t length, double length_penalty);

// Ranks a and b: higher score first, then the lexicographically smaller id sequence.
bool ranks_before(const Hypothesis& a, const Hypothesis& b, double length_penalty);

// Next-token log-probabilities for a decoder prefix (BOS slot first). PAD,
// BOS and UNK are never generated.
std::vector<double> next_token_log_probs(const model::FpgModel& model, const model::EncodedState& state,
                                         const std::vector<text::TokenId>& prefix, model::Conditioning mode);

// Hypotheses finish at EOS or after max_len tokens; unfinished ones are
// pruned to the beam width by cumulative log-probability after every step.
DecodeResult beam_search(const model::FpgModel& model, const text::TokenSeq& body,
                         const std::vector<text::TokenSeq>& history, const BeamOptions& options);

DecodeResult greedy_decode(const model::FpgModel& model, const text::TokenSeq& body,
                           const std::vector<text::TokenSeq>& history, std::size_t max_len,
                           model::Conditioning mode);

struct Prediction {
  std::string user_id;
  std::string news_id;
  std::string generated_headline;
  double score = 0.0;
  bool operator==(const Prediction&) const = default;
};

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace fpg::decoding
