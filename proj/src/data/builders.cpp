// src/data/builders.cpp
#include "fpg/data/builders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <unordered_set>

#include "fpg/error.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::data {

using nlohmann::json;

std::string_view to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::entity_swap:
      return "entity_swap";
    case CorruptionKind::number_perturb:
      return "number_perturb";
    case CorruptionKind::negation_flip:
      return "negation_flip";
  }
  return "unknown";
}

CorruptionKind corruption_from_string(std::string_view name) {
  for (CorruptionKind k : kAllCorruptions) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw Error("unknown corruption kind '" + std::string(name) + "'");
}

std::vector<PretrainPair> build_pretrain_set(const Corpus& corpus, const std::set<std::string>& exclude_ids) {
  std::vector<PretrainPair> pairs;
  for (const NewsArticle& a : corpus.articles()) {
    if (!exclude_ids.contains(a.news_id)) {
      pairs.push_back({a.news_id, a.body, a.headline});
    }
  }
  return pairs;
}

std::vector<TrainExample> build_training_set(const Corpus& corpus, const std::vector<ClickLog>& logs,
                                             std::size_t limit_l, std::size_t history_capacity) {
  if (limit_l < 1) {
    throw Error("limit_l must be at least 1");
  }
  std::vector<TrainExample> candidates;
  std::set<std::pair<std::string, std::string>> seen;
  for (const ClickLog& log : logs) {
    std::vector<std::string> history = log.clicked_news_ids;
    if (history.size() > history_capacity) {
      history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(history_capacity));
    }
    if (history.empty()) {
      continue;
    }
    for (const Impression& imp : log.impressions) {
      if (!imp.clicked) {
        continue;
      }
      if (std::find(history.begin(), history.end(), imp.news_id) != history.end()) {
        continue;
      }
      if (!seen.emplace(log.user_id, imp.news_id).second) {
        continue;
      }
      candidates.push_back({log.user_id, imp.news_id, history, corpus.at(imp.news_id).headline});
    }
  }

  std::map<std::string, std::vector<std::size_t>> by_news;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    by_news[candidates[i].candidate_news_id].push_back(i);
  }
  std::vector<bool> keep(candidates.size(), false);
  for (auto& [news, idx] : by_news) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto& ea = candidates[a];
      const auto& eb = candidates[b];
      if (ea.history_ids.size() != eb.history_ids.size()) {
        return ea.history_ids.size() > eb.history_ids.size();
      }
      return ea.user_id < eb.user_id;
    });
    for (std::size_t k = 0; k < idx.size() && k < limit_l; ++k) {
      keep[idx[k]] = true;
    }
  }
  std::vector<TrainExample> out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (keep[i]) {
      out.push_back(std::move(candidates[i]));
    }
  }
  return out;
}

// ---------------------------------------------------------- corruptions ----

namespace {

struct SpanPos {
  std::size_t begin;
  std::size_t end;
};

bool entity_word(const std::string& w) { return eval::is_capitalized(w) && !eval::is_negation_word(text::to_lower(w)); }

std::vector<SpanPos> entity_spans(const std::vector<std::string>& words) {
  std::vector<SpanPos> spans;
  std::size_t i = 0;
  while (i < words.size()) {
    if (!entity_word(words[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < words.size() && entity_word(words[j])) {
      ++j;
    }
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) {
      out.push_back(' ');
    }
    out += w;
  }
  return out;
}

std::vector<std::string> lower_all(const std::vector<std::string>& words) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) {
    out.push_back(text::to_lower(w));
  }
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

}  // namespace

EntityPool::EntityPool(const Corpus& corpus) {
  for (const NewsArticle& a : corpus.articles()) {
    std::set<std::vector<std::string>> seen;
    for (const std::string* text : {&a.headline, &a.body}) {
      const auto words = text::split_words(*text);
      for (const SpanPos& s : entity_spans(words)) {
        std::vector<std::string> span(words.begin() + s.begin, words.begin() + s.end);
        if (seen.insert(lower_all(span)).second) {
          entries_.push_back({a.news_id, a.category, std::move(span)});
        }
      }
    }
  }
}

std::vector<std::vector<std::string>> EntityPool::candidates(const std::string& news_id,
                                                             const std::string& category) const {
  std::vector<std::vector<std::string>> same;
  std::vector<std::vector<std::string>> any;
  std::set<std::vector<std::string>> seen_same;
  std::set<std::vector<std::string>> seen_any;
  for (const Entry& e : entries_) {
    if (e.news_id == news_id) {
      continue;
    }
    const auto key = lower_all(e.span);
    if (e.category == category && seen_same.insert(key).second) {
      same.push_back(e.span);
    }
    if (seen_any.insert(key).second) {
      any.push_back(e.span);
    }
  }
  return same.empty() ? any : same;
}

std::vector<std::string> number_perturb_candidates(std::string_view headline, std::string_view body) {
  const auto words = text::split_words(headline);
  const auto body_tokens = text::tokenize(body);
  const std::unordered_set<std::string> body_set(body_tokens.begin(), body_tokens.end());
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!eval::is_numeral(words[i]) || words[i].size() > 15) {
      continue;
    }
    const long long n = std::stoll(words[i]);
    for (long long delta : {1LL, 2LL, 10LL}) {
      for (long long sign : {1LL, -1LL}) {
        const long long m = n + sign * delta;
        if (m < 0) {
          continue;
        }
        const std::string numeral = std::to_string(m);
        if (body_set.contains(numeral)) {
          continue;
        }
        auto changed = words;
        changed[i] = numeral;
        std::string candidate = join_words(changed);
        if (seen.insert(candidate).second) {
          out.push_back(std::move(candidate));
        }
      }
    }
  }
  return out;
}

std::optional<std::string> corrupt(std::string_view headline, std::string_view body, const std::string& news_id,
                                   const std::string& category, CorruptionKind kind, const EntityPool& entities,
                                   std::mt19937_64& rng) {
  auto words = text::split_words(headline);
  switch (kind) {
    case CorruptionKind::entity_swap: {
      const auto spans = entity_spans(words);
      if (spans.empty()) {
        return std::nullopt;
      }
      const auto body_tokens = text::tokenize(body);
      const std::unordered_set<std::string> body_set(body_tokens.begin(), body_tokens.end());
      std::set<std::vector<std::string>> present;
      for (const SpanPos& s : spans) {
        present.insert(lower_all({words.begin() + s.begin, words.begin() + s.end}));
      }
      // the replacement must be absent from the body and from the headline
      std::vector<std::vector<std::string>> options;
      for (auto& span : entities.candidates(news_id, category)) {
        const auto lower = lower_all(span);
        if (present.contains(lower)) {
          continue;
        }
        if (std::any_of(lower.begin(), lower.end(), [&](const std::string& t) { return body_set.contains(t); })) {
          continue;
        }
        options.push_back(std::move(span));
      }
      if (options.empty()) {
        return std::nullopt;
      }
      const SpanPos target = pick(spans, rng);
      const auto& replacement = pick(options, rng);
      std::vector<std::string> out(words.begin(), words.begin() + target.begin);
      out.insert(out.end(), replacement.begin(), replacement.end());
      out.insert(out.end(), words.begin() + target.end, words.end());
      return join_words(out);
    }
    case CorruptionKind::number_perturb: {
      const auto options = number_perturb_candidates(headline, body);
      if (options.empty()) {
        return std::nullopt;
      }
      return pick(options, rng);
    }
    case CorruptionKind::negation_flip: {
      auto aux = std::find_if(words.begin(), words.end(),
                              [](const std::string& w) { return eval::is_auxiliary_word(text::to_lower(w)); });
      if (aux == words.end()) {
        return std::nullopt;
      }
      const bool supported = eval::negation_supported(headline, body);
      auto next = aux + 1;
      if (next != words.end() && text::to_lower(*next) == "not") {
        if (!supported) {
          return std::nullopt;  // dropping an unsupported negation would repair the headline
        }
        words.erase(next);
      } else {
        if (supported) {
          return std::nullopt;  // the body would back the inserted negation
        }
        words.insert(next, "not");
      }
      return join_words(words);
    }
  }
  return std::nullopt;
}

std::vector<ContrastivePair> build_contrastive_set(const Corpus& corpus, const std::vector<TrainExample>& training_set,
                                                   const eval::FactScorer& fact_scorer,
                                                   const ContrastiveOptions& options) {
  if (options.k_neg < 1) {
    throw Error("k_neg must be at least 1");
  }
  struct Scored {
    double score;
    std::size_t index;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < training_set.size(); ++i) {
    const TrainExample& ex = training_set[i];
    const double s = fact_scorer(ex.target_headline, corpus.at(ex.candidate_news_id).body);
    if (s >= options.score_threshold) {
      scored.push_back({s, i});
    }
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  const auto keep = static_cast<std::size_t>(std::ceil(options.top_fraction * static_cast<double>(scored.size())));
  scored.resize(std::min(keep, scored.size()));

  const EntityPool entities(corpus);
  std::mt19937_64 rng(options.seed);
  std::vector<ContrastivePair> out;
  for (const Scored& s : scored) {
    const TrainExample& ex = training_set[s.index];
    const NewsArticle& article = corpus.at(ex.candidate_news_id);
    const auto positive_tokens = text::tokenize(ex.target_headline);
    ContrastivePair pair{ex.user_id, ex.candidate_news_id, ex.history_ids, ex.target_headline, {}};
    const std::size_t attempts = std::size(kAllCorruptions) * options.k_neg;
    for (std::size_t a = 0; a < attempts && pair.negatives.size() < options.k_neg; ++a) {
      const CorruptionKind kind = kAllCorruptions[a % std::size(kAllCorruptions)];
      auto negative = corrupt(ex.target_headline, article.body, article.news_id, article.category, kind, entities, rng);
      if (!negative || text::tokenize(*negative) == positive_tokens) {
        continue;
      }
      const bool duplicate = std::any_of(pair.negatives.begin(), pair.negatives.end(),
                                         [&](const Negative& n) { return n.headline == *negative; });
      if (duplicate || fact_scorer(*negative, article.body) >= s.score) {
        continue;
      }
      pair.negatives.push_back({std::move(*negative), kind});
    }
    if (!pair.negatives.empty()) {
      out.push_back(std::move(pair));
    }
  }
  return out;
}

// ------------------------------------------------------------------ io ----

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  return out;
}

template <typename T, typename F>
std::vector<T> load_jsonl(const std::filesystem::path& path, F f) {
  std::vector<T> out;
  for (const auto& [line_no, line] : read_lines(path)) {
    try {
      out.push_back(f(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  }
  return out;
}

}  // namespace

void save_pretrain_set(const std::filesystem::path& path, const std::vector<PretrainPair>& pairs) {
  auto out = open_out(path);
  for (const auto& p : pairs) {
    out << json{{"news_id", p.news_id}, {"body", p.body}, {"headline", p.headline}}.dump() << '\n';
  }
}

std::vector<PretrainPair> load_pretrain_set(const std::filesystem::path& path) {
  return load_jsonl<PretrainPair>(path, [](const json& j) {
    return PretrainPair{j.at("news_id").get<std::string>(), j.at("body").get<std::string>(),
                        j.at("headline").get<std::string>()};
  });
}

void save_training_set(const std::filesystem::path& path, const std::vector<TrainExample>& examples) {
  auto out = open_out(path);
  for (const auto& e : examples) {
    out << json{{"user_id", e.user_id},
                {"candidate_news_id", e.candidate_news_id},
                {"history_ids", e.history_ids},
                {"target_headline", e.target_headline}}
               .dump()
        << '\n';
  }
}

std::vector<TrainExample> load_training_set(const std::filesystem::path& path) {
  return load_jsonl<TrainExample>(path, [](const json& j) {
    return TrainExample{j.at("user_id").get<std::string>(), j.at("candidate_news_id").get<std::string>(),
                        j.at("history_ids").get<std::vector<std::string>>(),
                        j.at("target_headline").get<std::string>()};
  });
}

void save_contrastive_set(const std::filesystem::path& path, const std::vector<ContrastivePair>& pairs) {
  auto out = open_out(path);
  for (const auto& p : pairs) {
    json negatives = json::array();
    for (const auto& n : p.negatives) {
      negatives.push_back({{"headline", n.headline}, {"kind", std::string(to_string(n.kind))}});
    }
    out << json{{"user_id", p.user_id},
                {"candidate_news_id", p.candidate_news_id},
                {"history_ids", p.history_ids},
                {"positive", p.positive},
                {"negatives", negatives}}
               .dump()
        << '\n';
  }
}

std::vector<ContrastivePair> load_contrastive_set(const std::filesystem::path& path) {
  return load_jsonl<ContrastivePair>(path, [](const json& j) {
    ContrastivePair p{j.at("user_id").get<std::string>(), j.at("candidate_news_id").get<std::string>(),
                      j.at("history_ids").get<std::vector<std::string>>(), j.at("positive").get<std::string>(), {}};
    for (const json& n : j.at("negatives")) {
      p.negatives.push_back({n.at("headline").get<std::string>(), corruption_from_string(n.at("kind").get<std::string>())});
    }
    return p;
  });
}

}  // namespace fpg::data
