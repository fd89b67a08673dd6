// Independent recounts for the dataset builders.
#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "fpg/data/builders.hpp"
#include "fpg/data/records.hpp"

namespace fpg::testkit {

// Expected (news -> kept users) computed pairwise: a user survives when fewer
// than limit eligible users beat it on (longer history, smaller id).
inline std::map<std::string, std::set<std::string>> expected_cap(const std::vector<data::ClickLog>& logs,
                                                                 std::size_t limit, std::size_t capacity) {
  struct Cand {
    std::string user;
    std::size_t hist;
  };
  std::map<std::string, std::vector<Cand>> eligible;
  for (const auto& log : logs) {
    const std::size_t n = log.clicked_news_ids.size();
    const std::size_t first = n > capacity ? n - capacity : 0;
    const std::size_t hist = n - first;
    if (hist == 0) {
      continue;
    }
    for (const auto& imp : log.impressions) {
      if (!imp.clicked) {
        continue;
      }
      bool in_history = false;
      for (std::size_t i = first; i < n; ++i) {
        in_history = in_history || log.clicked_news_ids[i] == imp.news_id;
      }
      if (in_history) {
        continue;
      }
      auto& v = eligible[imp.news_id];
      bool dup = false;
      for (const auto& c : v) {
        dup = dup || c.user == log.user_id;
      }
      if (!dup) {
        v.push_back({log.user_id, hist});
      }
    }
  }
  std::map<std::string, std::set<std::string>> out;
  for (const auto& [news, cands] : eligible) {
    for (const auto& a : cands) {
      std::size_t better = 0;
      for (const auto& b : cands) {
        if (b.hist > a.hist || (b.hist == a.hist && b.user < a.user)) {
          ++better;
        }
      }
      if (better < limit) {
        out[news].insert(a.user);
      }
    }
  }
  return out;
}

inline std::map<std::string, std::set<std::string>> actual_cap(const std::vector<data::TrainExample>& examples) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& e : examples) {
    out[e.candidate_news_id].insert(e.user_id);
  }
  return out;
}

// Random corpus of `n_news` articles and click logs with plenty of ties in
// history length.
inline void random_clicks(std::uint64_t seed, std::size_t n_users, std::size_t n_news, data::Corpus& corpus,
                          std::vector<data::ClickLog>& logs) {
  std::mt19937_64 rng(seed);
  corpus = data::Corpus();
  for (std::size_t i = 0; i < n_news; ++i) {
    const std::string id = "N" + std::to_string(i);
    corpus.add({id, "Headline " + std::to_string(i), "Body of article " + std::to_string(i) + " .", "cat"});
  }
  logs.clear();
  std::uniform_int_distribution<std::size_t> news(0, n_news - 1);
  std::uniform_int_distribution<std::size_t> hist_len(0, 10);
  std::uniform_int_distribution<std::size_t> imp_len(1, 8);
  std::bernoulli_distribution click(0.6);
  for (std::size_t u = 0; u < n_users; ++u) {
    data::ClickLog log;
    log.user_id = "U" + std::to_string(u);
    const std::size_t h = hist_len(rng);
    for (std::size_t i = 0; i < h; ++i) {
      log.clicked_news_ids.push_back("N" + std::to_string(news(rng)));
    }
    const std::size_t m = imp_len(rng);
    for (std::size_t i = 0; i < m; ++i) {
      log.impressions.push_back({"N" + std::to_string(news(rng)), click(rng)});
    }
    logs.push_back(std::move(log));
  }
}

// Every headline obtained by replacing one standalone integer n with n+d or
// n-d (d in {1,2,10}, result >= 0), skipping values present in the body.
inline std::set<std::string> regex_number_variants(const std::string& headline, const std::string& body) {
  std::set<std::string> body_numbers;
  const std::regex num(R"((^|\s)(\d+)(?=\s|$))");
  for (std::sregex_iterator it(body.begin(), body.end(), num), end; it != end; ++it) {
    body_numbers.insert((*it)[2].str());
  }
  std::set<std::string> out;
  for (std::sregex_iterator it(headline.begin(), headline.end(), num), end; it != end; ++it) {
    const long long n = std::stoll((*it)[2].str());
    for (long long d : {1LL, 2LL, 10LL}) {
      for (long long v : {n + d, n - d}) {
        if (v < 0 || body_numbers.count(std::to_string(v))) {
          continue;
        }
        const auto pos = static_cast<std::size_t>(it->position(2));
        out.insert(headline.substr(0, pos) + std::to_string(v) + headline.substr(pos + (*it)[2].length()));
      }
    }
  }
  return out;
}

}  // namespace fpg::testkit
