// src/decoding/beam_search.cpp
#include "fpg/decoding/beam_search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "fpg/data/records.hpp"
#include "fpg/error.hpp"

namespace fpg::decoding {

using text::TokenId;

double normalized_score(double log_prob, std::size_t length, double length_penalty) {
  if (length == 0) {
    return log_prob;
  }
  return log_prob / std::pow(static_cast<double>(length), length_penalty);
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b, double length_penalty) {
  const double sa = normalized_score(a.log_prob, a.tokens.size(), length_penalty);
  const double sb = normalized_score(b.log_prob, b.tokens.size(), length_penalty);
  if (sa != sb) {
    return sa > sb;
  }
  return a.tokens < b.tokens;
}

std::vector<double> next_token_log_probs(const model::FpgModel& model, const model::EncodedState& state,
                                         const std::vector<TokenId>& prefix, model::Conditioning mode) {
  const nn::Tensor logits = model.decode(state, prefix, mode);
  const std::size_t v = logits.cols();
  const auto row = logits.data().subspan((logits.rows() - 1) * v, v);
  const double mx = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double x : row) {
    z += std::exp(x - mx);
  }
  const double log_z = mx + std::log(z);
  std::vector<double> out(v);
  for (std::size_t i = 0; i < v; ++i) {
    out[i] = row[i] - log_z;
  }
  constexpr double never = -std::numeric_limits<double>::infinity();
  out[text::kPad] = never;
  out[text::kBos] = never;
  out[text::kUnk] = never;
  return out;
}

namespace {

DecodeResult to_result(const Hypothesis& h, double length_penalty) {
  DecodeResult r;
  r.tokens = h.tokens;
  if (!r.tokens.empty() && r.tokens.back() == text::kEos) {
    r.tokens.pop_back();
  }
  r.log_prob = h.log_prob;
  r.score = normalized_score(h.log_prob, h.tokens.size(), length_penalty);
  return r;
}

std::size_t resolve_max_len(const model::FpgModel& model, std::size_t max_len) {
  // Predicting token k feeds a prefix of k ids (BOS slot included), so up to
  // T tokens fit the positional table.
  const std::size_t limit = model.config().max_headline_len;
  return max_len == 0 ? limit : std::min(max_len, limit);
}

}  // namespace

DecodeResult beam_search(const model::FpgModel& model, const text::TokenSeq& body,
                         const std::vector<text::TokenSeq>& history, const BeamOptions& options) {
  if (options.beam_width < 1) {
    throw Error("beam_width must be at least 1");
  }
  const std::size_t max_len = resolve_max_len(model, options.max_len);
  const model::EncodedState state = model.encode(body, history, options.conditioning);

  std::vector<Hypothesis> live = {Hypothesis{}};
  std::vector<Hypothesis> finished;
  auto by_log_prob = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) {
      return a.log_prob > b.log_prob;
    }
    return a.tokens < b.tokens;
  };

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : live) {
      std::vector<TokenId> prefix = {text::kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      const auto lp = next_token_log_probs(model, state, prefix, options.conditioning);
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (!std::isfinite(lp[v])) {
          continue;
        }
        Hypothesis c = h;
        c.tokens.push_back(static_cast<TokenId>(v));
        c.log_prob += lp[v];
        c.finished = v == static_cast<std::size_t>(text::kEos) || c.tokens.size() == max_len;
        candidates.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(options.beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      by_log_prob);
    live.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      (candidates[i].finished ? finished : live).push_back(std::move(candidates[i]));
    }
  }
  if (finished.empty()) {
    throw Error("beam search produced no hypothesis");
  }
  const auto best = std::min_element(finished.begin(), finished.end(), [&](const auto& a, const auto& b) {
    return ranks_before(a, b, options.length_penalty);
  });
  return to_result(*best, options.length_penalty);
}

DecodeResult greedy_decode(const model::FpgModel& model, const text::TokenSeq& body,
                           const std::vector<text::TokenSeq>& history, std::size_t max_len,
                           model::Conditioning mode) {
  const std::size_t limit = resolve_max_len(model, max_len);
  const model::EncodedState state = model.encode(body, history, mode);
  Hypothesis h;
  std::vector<TokenId> prefix = {text::kBos};
  while (h.tokens.size() < limit) {
    const auto lp = next_token_log_probs(model, state, prefix, mode);
    const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    h.tokens.push_back(best);
    h.log_prob += lp[static_cast<std::size_t>(best)];
    if (best == text::kEos) {
      break;
    }
    prefix.push_back(best);
  }
  h.finished = true;
  return to_result(h, 1.0);
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write predictions to " + path.string());
  }
  for (const auto& p : predictions) {
    const nlohmann::json j = {{"user_id", p.user_id},
                              {"news_id", p.news_id},
                              {"generated_headline", p.generated_headline},
                              {"score", p.score}};
    out << j.dump() << "\n";
  }
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for (const auto& [line_no, line] : data::read_lines(path)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("user_id").get<std::string>(), j.at("news_id").get<std::string>(),
                     j.at("generated_headline").get<std::string>(), j.value("score", 0.0)});
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed prediction: " + e.what());
    }
  }
  return out;
}

}  // namespace fpg::decoding
