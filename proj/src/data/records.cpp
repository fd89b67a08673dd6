// src/data/records.cpp
#include "fpg/data/records.hpp"

#include <fstream>
#include <json.hpp>

#include "fpg/error.hpp"

namespace fpg::data {

using nlohmann::json;

Corpus::Corpus(std::vector<NewsArticle> articles) {
  for (auto& a : articles) {
    add(std::move(a));
  }
}

void Corpus::add(NewsArticle article) {
  if (article.news_id.empty()) {
    throw Error("news_id must be non-empty");
  }
  if (article.headline.empty() || article.body.empty()) {
    throw Error("news " + article.news_id + " has an empty headline or body");
  }
  if (!index_.emplace(article.news_id, articles_.size()).second) {
    throw Error("duplicate news_id " + article.news_id);
  }
  articles_.push_back(std::move(article));
}

const NewsArticle* Corpus::find(const std::string& news_id) const {
  auto it = index_.find(news_id);
  return it == index_.end() ? nullptr : &articles_[it->second];
}

const NewsArticle& Corpus::at(const std::string& news_id) const {
  const NewsArticle* a = find(news_id);
  if (a == nullptr) {
    throw Error("unknown news_id " + news_id);
  }
  return *a;
}

std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    lines.emplace_back(line_no, std::move(line));
  }
  return lines;
}

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

template <typename F>
auto parse_record(const std::filesystem::path& path, std::size_t line_no, const std::string& line, F f) {
  try {
    return f(json::parse(line));
  } catch (const json::exception& e) {
    throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  for (const auto& [line_no, line] : read_lines(path)) {
    parse_record(path, line_no, line, [&](const json& j) {
      NewsArticle a;
      a.news_id = j.at("news_id").get<std::string>();
      a.headline = j.at("headline").get<std::string>();
      a.body = j.at("body").get<std::string>();
      a.category = j.value("category", std::string());
      corpus.add(std::move(a));
      return 0;
    });
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  auto out = open_out(path);
  for (const NewsArticle& a : corpus.articles()) {
    json j = {{"news_id", a.news_id}, {"headline", a.headline}, {"body", a.body}, {"category", a.category}};
    out << j.dump() << '\n';
  }
}

std::vector<ClickLog> load_clicks(const std::filesystem::path& path, const Corpus* corpus,
                                  std::optional<std::size_t> history_capacity) {
  std::vector<ClickLog> logs;
  for (const auto& [line_no, line] : read_lines(path)) {
    logs.push_back(parse_record(path, line_no, line, [](const json& j) {
      ClickLog log;
      log.user_id = j.at("user_id").get<std::string>();
      log.clicked_news_ids = j.at("clicks").get<std::vector<std::string>>();
      for (const json& imp : j.value("impressions", json::array())) {
        log.impressions.push_back({imp.at("news_id").get<std::string>(), imp.at("clicked").get<bool>()});
      }
      if (log.user_id.empty()) {
        throw Error("user_id must be non-empty");
      }
      return log;
    }));
  }
  if (corpus != nullptr) {
    std::vector<std::string> dangling;
    for (const ClickLog& log : logs) {
      for (const auto& id : log.clicked_news_ids) {
        if (!corpus->contains(id)) {
          dangling.push_back(log.user_id + "->" + id);
        }
      }
      for (const auto& imp : log.impressions) {
        if (!corpus->contains(imp.news_id)) {
          dangling.push_back(log.user_id + "->" + imp.news_id);
        }
      }
    }
    if (!dangling.empty()) {
      std::string msg = "click log references unknown news:";
      for (const auto& d : dangling) {
        msg += " " + d;
      }
      throw Error(msg);
    }
  }
  if (history_capacity) {
    for (ClickLog& log : logs) {
      auto& ids = log.clicked_news_ids;
      if (ids.size() > *history_capacity) {
        ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(*history_capacity));
      }
    }
  }
  return logs;
}

void save_clicks(const std::filesystem::path& path, const std::vector<ClickLog>& logs) {
  auto out = open_out(path);
  for (const ClickLog& log : logs) {
    json impressions = json::array();
    for (const auto& imp : log.impressions) {
      impressions.push_back({{"news_id", imp.news_id}, {"clicked", imp.clicked}});
    }
    json j = {{"user_id", log.user_id}, {"clicks", log.clicked_news_ids}, {"impressions", impressions}};
    out << j.dump() << '\n';
  }
}

std::vector<Reference> load_references(const std::filesystem::path& path) {
  std::vector<Reference> refs;
  for (const auto& [line_no, line] : read_lines(path)) {
    refs.push_back(parse_record(path, line_no, line, [](const json& j) {
      return Reference{j.at("user_id").get<std::string>(), j.at("news_id").get<std::string>(),
                       j.at("headline").get<std::string>()};
    }));
  }
  return refs;
}

void save_references(const std::filesystem::path& path, const std::vector<Reference>& refs) {
  auto out = open_out(path);
  for (const Reference& r : refs) {
    json j = {{"user_id", r.user_id}, {"news_id", r.news_id}, {"headline", r.headline}};
    out << j.dump() << '\n';
  }
}

}  // namespace fpg::data
