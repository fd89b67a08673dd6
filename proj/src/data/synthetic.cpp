// src/data/synthetic.cpp
#include "fpg/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "fpg/error.hpp"

namespace fpg::data {

namespace {

struct Topic {
  std::string name;
  std::vector<std::string> entities;
  std::string verb;
  std::vector<std::string> places;
  int low;
  int high;
};

const std::vector<Topic>& base_topics() {
  static const std::vector<Topic> topics = {
      {"golf", {"Rose", "Woods", "Spieth", "Mickelson", "McIlroy"}, "shoots",
       {"Pebble Beach", "Augusta", "St Andrews"}, 63, 72},
      {"soccer", {"Arsenal", "Chelsea", "Barcelona", "Juventus", "Ajax"}, "scores",
       {"Wembley", "Anfield", "Old Trafford"}, 1, 6},
      {"tennis", {"Federer", "Nadal", "Djokovic", "Murray", "Serena"}, "serves",
       {"Wimbledon", "Roland Garros", "Flushing Meadows"}, 10, 25},
      {"basketball", {"Lakers", "Celtics", "Bulls", "Warriors", "Knicks"}, "posts",
       {"Madison Square Garden", "Staples Center", "United Center"}, 90, 130},
      {"finance", {"Apple", "Tesla", "Amazon", "Google", "Microsoft"}, "gains",
       {"Wall Street", "Nasdaq", "London"}, 2, 9},
      {"weather", {"Ciara", "Ida", "Dennis", "Sandy", "Katrina"}, "drops",
       {"Florida", "Texas", "Boston"}, 20, 60},
      {"politics", {"Obama", "Merkel", "Macron", "Trudeau", "Ardern"}, "meets",
       {"Berlin", "Ottawa", "Geneva"}, 3, 12},
      {"cycling", {"Froome", "Pogacar", "Vingegaard", "Cavendish", "Sagan"}, "rides",
       {"Mont Ventoux", "Paris", "Roubaix"}, 100, 200},
  };
  return topics;
}

// Pronounceable capitalized pseudo-word, fixed by (topic, slot).
std::string pseudo_name(std::size_t topic, std::size_t slot) {
  static const std::array<const char*, 10> onsets = {"b", "d", "k", "l", "m", "n", "r", "s", "t", "v"};
  static const std::array<const char*, 5> vowels = {"a", "e", "i", "o", "u"};
  std::string s;
  std::size_t x = topic * 131 + slot * 17 + 7;
  for (int i = 0; i < 3; ++i) {
    s += onsets[x % onsets.size()];
    x /= onsets.size();
    s += vowels[(x + static_cast<std::size_t>(i)) % vowels.size()];
    x = x * 7 + 3;
  }
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

Topic procedural_topic(std::size_t index) {
  Topic t;
  t.name = "topic" + std::to_string(index);
  for (std::size_t e = 0; e < 5; ++e) {
    t.entities.push_back(pseudo_name(index, e));
  }
  t.verb = "logs";
  for (std::size_t p = 0; p < 3; ++p) {
    t.places.push_back("Port " + pseudo_name(index, 10 + p));
  }
  t.low = static_cast<int>(10 * (index % 7) + 1);
  t.high = t.low + 20;
  return t;
}

std::vector<Topic> topics_for(std::size_t n) {
  std::vector<Topic> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(i < base_topics().size() ? base_topics()[i] : procedural_topic(i));
  }
  return out;
}

const std::array<const char*, 7> kDays = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                          "Friday", "Saturday", "Sunday"};
const std::array<const char*, 5> kFillers = {
    "fans gathered early to watch the event .", "officials said more details would follow .",
    "the crowd reacted with loud applause .", "analysts expect further updates this week .",
    "local reports described the scene as busy ."};

struct Fact {
  std::size_t topic;
  std::string entity;
  int number;
  std::string place;
  std::string day;

  std::string headline(const Topic& t) const {
    return entity + " " + t.verb + " " + std::to_string(number) + " at " + place;
  }
  std::string sentence(const Topic& t) const { return headline(t) + " on " + day + " ."; }
};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

Fact make_fact(const Topic& t, std::size_t topic, std::mt19937_64& rng) {
  Fact f;
  f.topic = topic;
  f.entity = pick(t.entities, rng);
  f.number = std::uniform_int_distribution<int>(t.low, t.high)(rng);
  f.place = pick(t.places, rng);
  f.day = kDays[std::uniform_int_distribution<std::size_t>(0, kDays.size() - 1)(rng)];
  return f;
}

struct Article {
  std::string id;
  Fact primary;
  Fact secondary;
};

}  // namespace

std::vector<std::string> synthetic_topic_names(std::size_t n_topics) {
  std::vector<std::string> out;
  for (const auto& t : topics_for(n_topics)) {
    out.push_back(t.name);
  }
  return out;
}

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticOptions& options) {
  if (options.n_users == 0 || options.n_news == 0 || options.n_topics == 0) {
    throw Error("synthetic benchmark needs at least one user, article and topic");
  }
  if (options.min_history == 0 || options.min_history > options.max_history) {
    throw Error("synthetic benchmark needs 1 <= min_history <= max_history");
  }
  if (options.n_news < 3 * options.n_topics) {
    throw Error("synthetic benchmark needs at least 3 articles per topic");
  }
  const auto topics = topics_for(options.n_topics);
  std::mt19937_64 rng(options.seed);

  // Articles: primary topics round-robin, secondary topic uniformly among the others.
  std::vector<Article> articles;
  std::vector<std::vector<std::size_t>> by_topic(options.n_topics);
  for (std::size_t i = 0; i < options.n_news; ++i) {
    Article a;
    a.id = "N" + std::to_string(10000 + i);
    const std::size_t p = i % options.n_topics;
    std::size_t s = p;
    if (options.n_topics > 1) {
      s = std::uniform_int_distribution<std::size_t>(0, options.n_topics - 2)(rng);
      s += s >= p ? 1 : 0;
    }
    a.primary = make_fact(topics[p], p, rng);
    a.secondary = make_fact(topics[s], s, rng);
    while (a.secondary.entity == a.primary.entity || a.secondary.number == a.primary.number) {
      a.secondary = make_fact(topics[s], s, rng);
    }
    by_topic[p].push_back(articles.size());
    articles.push_back(std::move(a));
  }

  SyntheticBenchmark out;
  for (const auto& a : articles) {
    const bool primary_first = std::bernoulli_distribution(0.5)(rng);
    const std::string filler = kFillers[std::uniform_int_distribution<std::size_t>(0, kFillers.size() - 1)(rng)];
    const Fact& first = primary_first ? a.primary : a.secondary;
    const Fact& second = primary_first ? a.secondary : a.primary;
    const std::string body =
        first.sentence(topics[first.topic]) + " " + second.sentence(topics[second.topic]) + " " + filler;
    out.corpus.add({a.id, a.primary.headline(topics[a.primary.topic]), body, topics[a.primary.topic].name});
  }

  // Per-topic pools: test, impression candidates, history.
  std::vector<std::vector<std::size_t>> test(options.n_topics), candidates(options.n_topics),
      history(options.n_topics);
  for (std::size_t t = 0; t < options.n_topics; ++t) {
    auto ids = by_topic[t];
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t n = ids.size();
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(options.test_fraction * n));
    const std::size_t n_cand =
        std::max<std::size_t>(1, std::min(n - n_test - 1, static_cast<std::size_t>(options.candidate_fraction * n)));
    test[t].assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    candidates[t].assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                         ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_cand));
    history[t].assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_cand), ids.end());
    std::sort(test[t].begin(), test[t].end());
    std::sort(candidates[t].begin(), candidates[t].end());
    for (auto i : test[t]) {
      out.test_news_ids.push_back(articles[i].id);
    }
    for (auto i : candidates[t]) {
      out.candidate_news_ids.push_back(articles[i].id);
    }
  }
  std::sort(out.test_news_ids.begin(), out.test_news_ids.end());
  std::sort(out.candidate_news_ids.begin(), out.candidate_news_ids.end());

  // Test articles mentioning each topic, as primary or secondary fact.
  std::vector<std::vector<std::size_t>> test_mentions(options.n_topics);
  for (std::size_t t = 0; t < options.n_topics; ++t) {
    for (auto i : test[t]) {
      test_mentions[t].push_back(i);
      if (articles[i].secondary.topic != t) {
        test_mentions[articles[i].secondary.topic].push_back(i);
      }
    }
  }
  for (auto& m : test_mentions) {
    std::sort(m.begin(), m.end());
  }

  std::vector<std::size_t> users_in_topic(options.n_topics, 0);
  for (std::size_t u = 0; u < options.n_users; ++u) {
    const std::size_t t = u % options.n_topics;
    ClickLog log;
    log.user_id = "U" + std::to_string(1000 + u);
    out.user_topics[log.user_id] = topics[t].name;

    auto pool = history[t];
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t n_hist = std::min(
        pool.size(), std::uniform_int_distribution<std::size_t>(options.min_history, options.max_history)(rng));
    for (std::size_t k = 0; k < n_hist; ++k) {
      log.clicked_news_ids.push_back(articles[pool[k]].id);
    }

    auto clicks = candidates[t];
    std::shuffle(clicks.begin(), clicks.end(), rng);
    for (std::size_t k = 0; k < std::min(options.clicks_per_impression, clicks.size()); ++k) {
      log.impressions.push_back({articles[clicks[k]].id, true});
    }
    for (std::size_t k = 0; k < options.skips_per_impression && options.n_topics > 1; ++k) {
      std::size_t other = std::uniform_int_distribution<std::size_t>(0, options.n_topics - 2)(rng);
      other += other >= t ? 1 : 0;
      log.impressions.push_back({articles[pick(candidates[other], rng)].id, false});
    }

    const auto& mentions = test_mentions[t];
    const Article& a = articles[mentions[users_in_topic[t]++ % mentions.size()]];
    const Fact& fact = a.primary.topic == t ? a.primary : a.secondary;
    out.references.push_back({log.user_id, a.id, fact.headline(topics[t])});
    out.click_logs.push_back(std::move(log));
  }
  return out;
}

}  // namespace fpg::data
