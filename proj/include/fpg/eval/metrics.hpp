// include/fpg/eval/metrics.hpp
//
// Coverage (ROUGE F1), personalization (cosine similarity to the clicked
// headlines) and a rule-based factual-consistency proxy. All metrics operate
// on the text module's tokenization; scores lie in [0, 1].
#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpg::eval {

// Clipped n-gram overlap F1, n in {1, 2}. Empty operands score 0.
double rouge_n(std::string_view hypothesis, std::string_view reference, int n);
// LCS-based F1.
double rouge_l(std::string_view hypothesis, std::string_view reference);

using SparseVector = std::unordered_map<std::string, double>;

double cosine(const SparseVector& a, const SparseVector& b);

// Maps a text to a vector for cosine similarity.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual SparseVector embed(std::string_view text) const = 0;
};

// Term frequency times smoothed idf, idf(t) = ln((1 + D) / (1 + df(t))) + 1,
// with document frequencies taken from the evaluation corpus.
class TfidfEmbedder : public TextEmbedder {
 public:
  explicit TfidfEmbedder(std::span<const std::string> documents);
  SparseVector embed(std::string_view text) const override;
  double idf(std::string_view token) const;

 private:
  std::unordered_map<std::string, double> idf_;
  double unseen_idf_ = 1.0;
};

struct PersonalizationScores {
  double p_max = 0.0;
  double p_avg = 0.0;
};

// Max and mean cosine similarity between `generated` and each clicked
// headline. Throws on an empty history.
PersonalizationScores personalization_scores(std::string_view generated,
                                             std::span<const std::string> history,
                                             const TextEmbedder& embedder);

// Claims a headline makes that can be checked against the body.
struct Claims {
  std::vector<std::vector<std::string>> entities;  // capitalized spans, original casing
  std::vector<std::string> numerals;
  std::vector<std::string> negations;  // negation markers, lowercase
};

Claims extract_claims(std::string_view headline);

bool is_negation_word(std::string_view lower_token);
bool is_auxiliary_word(std::string_view lower_token);
bool is_stopword(std::string_view lower_token);
bool is_numeral(std::string_view token);
bool is_capitalized(std::string_view token);

inline constexpr std::size_t kNegationWindow = 10;

// 1 - unsupported / total over the headline's entity, numeral and negation
// claims; 1.0 when the headline makes no claim. A rule-based stand-in for a
// learned factual-consistency classifier, reported as "FactProxy".
double fact_consistency_proxy(std::string_view headline, std::string_view body);

// Whether any negation marker in the body lies within kNegationWindow tokens
// of a content word the headline shares with the body.
bool negation_supported(std::string_view headline, std::string_view body);

using FactScorer = std::function<double(std::string_view headline, std::string_view body)>;

}  // namespace fpg::eval
