// src/training/samples.cpp
#include "fpg/training/samples.hpp"

namespace fpg::training {

text::TokenSeq encode_body(const std::string& body, const text::Vocab& vocab, const model::ModelConfig& config) {
  return text::encode(body, vocab, config.max_body_len, false);
}

text::TokenSeq encode_headline(const std::string& headline, const text::Vocab& vocab,
                               const model::ModelConfig& config) {
  return text::encode(headline, vocab, config.max_headline_len, false);
}

text::TokenSeq encode_target(const std::string& headline, const text::Vocab& vocab,
                             const model::ModelConfig& config) {
  return text::encode(headline, vocab, config.max_headline_len, true);
}

std::vector<text::TokenSeq> encode_history(const std::vector<std::string>& history_ids, const data::Corpus& corpus,
                                           const text::Vocab& vocab, const model::ModelConfig& config) {
  std::vector<text::TokenSeq> out;
  out.reserve(history_ids.size());
  for (const auto& id : history_ids) {
    out.push_back(encode_headline(corpus.at(id).headline, vocab, config));
  }
  return out;
}

std::vector<Sample> pretrain_samples(const std::vector<data::PretrainPair>& pairs, const text::Vocab& vocab,
                                     const model::ModelConfig& config) {
  std::vector<Sample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Sample s;
    s.news_id = p.news_id;
    s.body = encode_body(p.body, vocab, config);
    s.target = encode_target(p.headline, vocab, config);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> training_samples(const std::vector<data::TrainExample>& examples, const data::Corpus& corpus,
                                     const text::Vocab& vocab, const model::ModelConfig& config) {
  std::vector<Sample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    Sample s;
    s.user_id = e.user_id;
    s.news_id = e.candidate_news_id;
    s.body = encode_body(corpus.at(e.candidate_news_id).body, vocab, config);
    s.history = encode_history(e.history_ids, corpus, vocab, config);
    s.target = encode_target(e.target_headline, vocab, config);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> contrastive_samples(const std::vector<data::ContrastivePair>& pairs, const data::Corpus& corpus,
                                        const text::Vocab& vocab, const model::ModelConfig& config) {
  std::vector<Sample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Sample s;
    s.user_id = p.user_id;
    s.news_id = p.candidate_news_id;
    s.body = encode_body(corpus.at(p.candidate_news_id).body, vocab, config);
    s.history = encode_history(p.history_ids, corpus, vocab, config);
    s.target = encode_target(p.positive, vocab, config);
    for (const auto& n : p.negatives) {
      s.negatives.push_back(encode_target(n.headline, vocab, config));
      s.negative_kinds.push_back(n.kind);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fpg::training
