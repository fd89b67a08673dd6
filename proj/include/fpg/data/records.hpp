// include/fpg/data/records.hpp
//
// Corpus and click-log records with their JSON-lines file formats:
//   corpus: {"news_id", "headline", "body", "category"}
//   clicks: {"user_id", "clicks": [news_id...], "impressions": [{"news_id", "clicked"}...]}
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fpg::data {

struct NewsArticle {
  std::string news_id;
  std::string headline;
  std::string body;
  std::string category;

  bool operator==(const NewsArticle&) const = default;
};

struct Impression {
  std::string news_id;
  bool clicked = false;

  bool operator==(const Impression&) const = default;
};

struct ClickLog {
  std::string user_id;
  std::vector<std::string> clicked_news_ids;  // most recent last
  std::vector<Impression> impressions;

  bool operator==(const ClickLog&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  // Throws on duplicate ids or empty headline/body.
  explicit Corpus(std::vector<NewsArticle> articles);

  void add(NewsArticle article);
  const std::vector<NewsArticle>& articles() const { return articles_; }
  std::size_t size() const { return articles_.size(); }
  bool empty() const { return articles_.empty(); }
  const NewsArticle* find(const std::string& news_id) const;
  const NewsArticle& at(const std::string& news_id) const;
  bool contains(const std::string& news_id) const { return find(news_id) != nullptr; }

 private:
  std::vector<NewsArticle> articles_;
  std::unordered_map<std::string, std::size_t> index_;
};

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// When `corpus` is given every referenced news id must resolve; offenders are
// listed in the error. Click histories longer than history_capacity lose
// their oldest entries.
std::vector<ClickLog> load_clicks(const std::filesystem::path& path, const Corpus* corpus = nullptr,
                                  std::optional<std::size_t> history_capacity = std::nullopt);
void save_clicks(const std::filesystem::path& path, const std::vector<ClickLog>& logs);

// Held-out personalized reference headline for one (user, news) pair.
struct Reference {
  std::string user_id;
  std::string news_id;
  std::string headline;

  bool operator==(const Reference&) const = default;
};

std::vector<Reference> load_references(const std::filesystem::path& path);
void save_references(const std::filesystem::path& path, const std::vector<Reference>& refs);

// Reads non-empty lines; used by all JSON-lines readers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& path);

}  // namespace fpg::data
