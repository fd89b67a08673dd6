// include/fpg/training/samples.hpp
//
// Token-level views of the prepared datasets, ready for the model.
#pragma once

#include <string>
#include <vector>

#include "fpg/data/builders.hpp"
#include "fpg/data/records.hpp"
#include "fpg/model/config.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::training {

struct Sample {
  std::string user_id;  // empty for pretraining pairs
  std::string news_id;
  text::TokenSeq body;                  // length M, no EOS
  std::vector<text::TokenSeq> history;  // length T each, no EOS, oldest first
  text::TokenSeq target;                // length T, ends with EOS
  std::vector<text::TokenSeq> negatives;
  std::vector<data::CorruptionKind> negative_kinds;
};

text::TokenSeq encode_body(const std::string& body, const text::Vocab& vocab, const model::ModelConfig& config);
text::TokenSeq encode_headline(const std::string& headline, const text::Vocab& vocab,
                               const model::ModelConfig& config);
text::TokenSeq encode_target(const std::string& headline, const text::Vocab& vocab, const model::ModelConfig& config);
std::vector<text::TokenSeq> encode_history(const std::vector<std::string>& history_ids, const data::Corpus& corpus,
                                           const text::Vocab& vocab, const model::ModelConfig& config);

std::vector<Sample> pretrain_samples(const std::vector<data::PretrainPair>& pairs, const text::Vocab& vocab,
                                     const model::ModelConfig& config);
std::vector<Sample> training_samples(const std::vector<data::TrainExample>& examples, const data::Corpus& corpus,
                                     const text::Vocab& vocab, const model::ModelConfig& config);
std::vector<Sample> contrastive_samples(const std::vector<data::ContrastivePair>& pairs, const data::Corpus& corpus,
                                        const text::Vocab& vocab, const model::ModelConfig& config);

}  // namespace fpg::training
