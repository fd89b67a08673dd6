// src/eval/metrics.cpp
#include "fpg/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "fpg/error.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::eval {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) {
    return counts;
  }
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return counts;
}

double f1(double overlap, double hyp_total, double ref_total) {
  if (overlap <= 0.0 || hyp_total <= 0.0 || ref_total <= 0.0) {
    return 0.0;
  }
  const double p = overlap / hyp_total;
  const double r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

}  // namespace

double rouge_n(std::string_view hypothesis, std::string_view reference, int n) {
  if (n != 1 && n != 2) {
    throw Error("rouge_n supports n = 1 or 2");
  }
  const auto hyp = ngrams(text::tokenize(hypothesis), static_cast<std::size_t>(n));
  const auto ref = ngrams(text::tokenize(reference), static_cast<std::size_t>(n));
  std::size_t hyp_total = 0;
  std::size_t ref_total = 0;
  std::size_t overlap = 0;
  for (const auto& [gram, count] : hyp) {
    hyp_total += count;
    if (auto it = ref.find(gram); it != ref.end()) {
      overlap += std::min(count, it->second);
    }
  }
  for (const auto& [gram, count] : ref) {
    ref_total += count;
  }
  return f1(static_cast<double>(overlap), static_cast<double>(hyp_total), static_cast<double>(ref_total));
}

double rouge_l(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = text::tokenize(hypothesis);
  const auto ref = text::tokenize(reference);
  if (hyp.empty() || ref.empty()) {
    return 0.0;
  }
  std::vector<std::size_t> prev(ref.size() + 1, 0);
  std::vector<std::size_t> cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return f1(static_cast<double>(prev[ref.size()]), static_cast<double>(hyp.size()),
            static_cast<double>(ref.size()));
}

double cosine(const SparseVector& a, const SparseVector& b) {
  const SparseVector& small = a.size() <= b.size() ? a : b;
  const SparseVector& large = a.size() <= b.size() ? b : a;
  // accumulate in key order so the result does not depend on hash layout
  std::map<std::string, double> ordered(small.begin(), small.end());
  double dot = 0.0;
  for (const auto& [key, value] : ordered) {
    if (auto it = large.find(key); it != large.end()) {
      dot += value * it->second;
    }
  }
  auto norm = [](const SparseVector& v) {
    std::map<std::string, double> ordered(v.begin(), v.end());
    double s = 0.0;
    for (const auto& [key, value] : ordered) {
      s += value * value;
    }
    return std::sqrt(s);
  };
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return std::clamp(dot / (na * nb), 0.0, 1.0);
}

TfidfEmbedder::TfidfEmbedder(std::span<const std::string> documents) {
  std::unordered_map<std::string, std::size_t> df;
  for (const std::string& doc : documents) {
    const auto tokens = text::tokenize(doc);
    for (const std::string& t : std::set<std::string>(tokens.begin(), tokens.end())) {
      ++df[t];
    }
  }
  const double n_docs = static_cast<double>(documents.size());
  for (const auto& [token, count] : df) {
    idf_[token] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0;
  }
  unseen_idf_ = std::log(1.0 + n_docs) + 1.0;
}

double TfidfEmbedder::idf(std::string_view token) const {
  auto it = idf_.find(std::string(token));
  return it == idf_.end() ? unseen_idf_ : it->second;
}

SparseVector TfidfEmbedder::embed(std::string_view text) const {
  SparseVector v;
  for (const std::string& t : text::tokenize(text)) {
    v[t] += 1.0;
  }
  for (auto& [token, weight] : v) {
    weight *= idf(token);
  }
  return v;
}

PersonalizationScores personalization_scores(std::string_view generated,
                                             std::span<const std::string> history,
                                             const TextEmbedder& embedder) {
  if (history.empty()) {
    throw Error("personalization scores need a non-empty click history");
  }
  const SparseVector gv = embedder.embed(generated);
  PersonalizationScores s;
  double total = 0.0;
  for (const std::string& clicked : history) {
    const double sim = cosine(gv, embedder.embed(clicked));
    s.p_max = std::max(s.p_max, sim);
    total += sim;
  }
  s.p_avg = std::min(total / static_cast<double>(history.size()), s.p_max);
  return s;
}

// ------------------------------------------------------------ fact proxy ----

namespace {

const std::unordered_set<std::string>& negation_words() {
  static const std::unordered_set<std::string> words = {
      "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "without", "cannot"};
  return words;
}

const std::unordered_set<std::string>& auxiliary_words() {
  static const std::unordered_set<std::string> words = {
      "is",   "are",  "was",   "were",   "be",  "been",  "being", "am",
      "will", "would", "can",  "could",  "shall", "should", "may", "might",
      "must", "do",   "does",  "did",    "has", "have",  "had"};
  return words;
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "the",  "and",  "or",   "but",  "of",   "to",   "in",   "on",   "at",
      "for",  "with", "by",   "from", "as",   "into", "over", "after", "before", "up",
      "down", "out",  "this", "that", "these", "those", "it",  "its",  "his",  "her",
      "their", "he",  "she",  "they", "we",   "you",  "i",    "s",    "t"};
  return words;
}

bool has_alpha(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
}

bool is_content_word(std::string_view lower) {
  return has_alpha(lower) && !is_stopword(lower) && !is_negation_word(lower) && !is_auxiliary_word(lower);
}

bool contains_span(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) {
    return false;
  }
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

}  // namespace

bool is_negation_word(std::string_view lower_token) {
  return negation_words().contains(std::string(lower_token));
}

bool is_auxiliary_word(std::string_view lower_token) {
  return auxiliary_words().contains(std::string(lower_token));
}

bool is_stopword(std::string_view lower_token) { return stopwords().contains(std::string(lower_token)); }

bool is_numeral(std::string_view token) {
  return !token.empty() &&
         std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_capitalized(std::string_view token) {
  return !token.empty() && std::isupper(static_cast<unsigned char>(token.front())) != 0;
}

Claims extract_claims(std::string_view headline) {
  const std::vector<std::string> words = text::split_words(headline);
  Claims claims;
  std::set<std::string> seen_entities;
  std::set<std::string> seen_numerals;
  std::set<std::string> seen_negations;
  std::vector<std::string> span;
  auto flush = [&] {
    if (span.empty()) {
      return;
    }
    std::string key;
    for (const auto& w : span) {
      key += text::to_lower(w) + ' ';
    }
    if (seen_entities.insert(key).second) {
      claims.entities.push_back(span);
    }
    span.clear();
  };
  for (const std::string& w : words) {
    if (is_capitalized(w) && !is_negation_word(text::to_lower(w))) {
      span.push_back(w);
      continue;
    }
    flush();
    if (is_numeral(w)) {
      if (seen_numerals.insert(w).second) {
        claims.numerals.push_back(w);
      }
    }
  }
  flush();
  for (const std::string& w : words) {
    const std::string lower = text::to_lower(w);
    if (is_negation_word(lower) && seen_negations.insert(lower).second) {
      claims.negations.push_back(lower);
    }
  }
  return claims;
}

bool negation_supported(std::string_view headline, std::string_view body) {
  const auto body_tokens = text::tokenize(body);
  std::unordered_set<std::string> head_content;
  for (const std::string& t : text::tokenize(headline)) {
    if (is_content_word(t)) {
      head_content.insert(t);
    }
  }
  for (std::size_t i = 0; i < body_tokens.size(); ++i) {
    if (!head_content.contains(body_tokens[i])) {
      continue;
    }
    const std::size_t lo = i >= kNegationWindow ? i - kNegationWindow : 0;
    const std::size_t hi = std::min(body_tokens.size(), i + kNegationWindow + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (is_negation_word(body_tokens[j])) {
        return true;
      }
    }
  }
  return false;
}

double fact_consistency_proxy(std::string_view headline, std::string_view body) {
  const Claims claims = extract_claims(headline);
  const std::size_t total = claims.entities.size() + claims.numerals.size() + claims.negations.size();
  if (total == 0) {
    return 1.0;
  }
  const auto body_tokens = text::tokenize(body);
  const std::unordered_set<std::string> body_set(body_tokens.begin(), body_tokens.end());
  std::size_t unsupported = 0;
  for (const auto& entity : claims.entities) {
    std::vector<std::string> lower;
    for (const auto& w : entity) {
      lower.push_back(text::to_lower(w));
    }
    if (!contains_span(body_tokens, lower)) {
      ++unsupported;
    }
  }
  for (const auto& numeral : claims.numerals) {
    if (!body_set.contains(numeral)) {
      ++unsupported;
    }
  }
  if (!claims.negations.empty() && !negation_supported(headline, body)) {
    unsupported += claims.negations.size();
  }
  return 1.0 - static_cast<double>(unsupported) / static_cast<double>(total);
}

}  // namespace fpg::eval
