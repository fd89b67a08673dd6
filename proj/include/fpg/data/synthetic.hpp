// include/fpg/data/synthetic.hpp
//
// Seeded stand-in for a personalized headline benchmark. Every article states
// two facts "<ENTITY> <verb> <number> at <PLACE> on <day> ." from two
// different topics, plus filler; its headline (and category) follows the
// primary topic. Each user follows one topic: the click history holds
// primary-topic articles of that topic, and the held-out reference for the
// user's test article restates the fact of the user's topic, whether that
// fact is the article's primary or secondary one.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fpg/data/records.hpp"

namespace fpg::data {

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n_users = 60;
  std::size_t n_news = 400;
  std::size_t n_topics = 4;
  std::size_t min_history = 3;
  std::size_t max_history = 8;
  std::size_t clicks_per_impression = 4;
  std::size_t skips_per_impression = 2;
  double test_fraction = 0.15;
  double candidate_fraction = 0.35;
};

struct SyntheticBenchmark {
  Corpus corpus;
  std::vector<ClickLog> click_logs;
  std::vector<Reference> references;  // one test article per user
  std::map<std::string, std::string> user_topics;
  std::vector<std::string> test_news_ids;       // articles reserved for evaluation
  std::vector<std::string> candidate_news_ids;  // articles shown in impressions
};

std::vector<std::string> synthetic_topic_names(std::size_t n_topics);

// Throws when a count is zero or the corpus is too small to give every topic
// a test, candidate and history article.
SyntheticBenchmark generate_synthetic_benchmark(const SyntheticOptions& options);

}  // namespace fpg::data
