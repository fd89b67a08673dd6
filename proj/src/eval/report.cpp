// src/eval/report.cpp
#include "fpg/eval/report.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>
#include <map>
#include <unordered_map>

#include "fpg/error.hpp"

namespace fpg::eval {

SparseVector ModelEmbedder::embed(std::string_view text) const {
  const auto tokens = text::tokenize(text);
  SparseVector out;
  if (tokens.empty()) {
    return out;
  }
  const auto& table = model_.parameters().get("embed.token").tensor;
  const std::size_t d = table.cols();
  std::vector<double> acc(d, 0.0);
  for (const auto& tok : tokens) {
    const auto id = static_cast<std::size_t>(vocab_.id(tok));
    for (std::size_t c = 0; c < d; ++c) {
      acc[c] += table.at(id, c);
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    out["d" + std::to_string(c)] = acc[c] / static_cast<double>(tokens.size());
  }
  return out;
}

std::unique_ptr<TextEmbedder> corpus_tfidf(const data::Corpus& corpus) {
  std::vector<std::string> docs;
  docs.reserve(corpus.size());
  for (const auto& a : corpus.articles()) {
    docs.push_back(a.headline);
  }
  return std::make_unique<TfidfEmbedder>(docs);
}

Aggregate aggregate(const std::vector<ExampleScores>& examples) {
  Aggregate a;
  a.count = examples.size();
  if (examples.empty()) {
    return a;
  }
  for (const auto& e : examples) {
    a.rouge1 += e.rouge1;
    a.rouge2 += e.rouge2;
    a.rougeL += e.rougeL;
    a.p_sim_max += e.p_sim_max;
    a.p_sim_avg += e.p_sim_avg;
    a.fact_score += e.fact_score;
  }
  const double n = static_cast<double>(examples.size());
  a.rouge1 /= n;
  a.rouge2 /= n;
  a.rougeL /= n;
  a.p_sim_max /= n;
  a.p_sim_avg /= n;
  a.fact_score /= n;
  return a;
}

EvalReport evaluate_run(const std::vector<decoding::Prediction>& predictions,
                        const std::vector<data::Reference>& references, const data::Corpus& corpus,
                        const std::vector<data::ClickLog>& click_logs, const TextEmbedder& embedder) {
  std::map<std::pair<std::string, std::string>, const data::Reference*> refs;
  for (const auto& r : references) {
    refs[{r.user_id, r.news_id}] = &r;
  }
  std::unordered_map<std::string, const data::ClickLog*> logs;
  for (const auto& l : click_logs) {
    logs[l.user_id] = &l;
  }

  std::vector<std::string> offenders;
  for (const auto& p : predictions) {
    const auto log = logs.find(p.user_id);
    if (!refs.contains({p.user_id, p.news_id})) {
      offenders.push_back(p.user_id + "/" + p.news_id + " (no reference)");
    } else if (!corpus.contains(p.news_id)) {
      offenders.push_back(p.user_id + "/" + p.news_id + " (no article)");
    } else if (log == logs.end() || log->second->clicked_news_ids.empty()) {
      offenders.push_back(p.user_id + "/" + p.news_id + " (no click history)");
    }
  }
  if (!offenders.empty()) {
    std::string msg = "unresolved predictions:";
    for (const auto& o : offenders) {
      msg += " " + o;
    }
    throw Error(msg);
  }

  EvalReport report;
  for (const auto& p : predictions) {
    const auto& ref = *refs.at({p.user_id, p.news_id});
    const auto& body = corpus.at(p.news_id).body;
    std::vector<std::string> history;
    for (const auto& id : logs.at(p.user_id)->clicked_news_ids) {
      history.push_back(corpus.at(id).headline);
    }
    ExampleScores s;
    s.user_id = p.user_id;
    s.news_id = p.news_id;
    s.rouge1 = rouge_n(p.generated_headline, ref.headline, 1);
    s.rouge2 = rouge_n(p.generated_headline, ref.headline, 2);
    s.rougeL = rouge_l(p.generated_headline, ref.headline);
    const auto ps = personalization_scores(p.generated_headline, history, embedder);
    s.p_sim_max = ps.p_max;
    s.p_sim_avg = ps.p_avg;
    s.fact_score = fact_consistency_proxy(p.generated_headline, body);
    report.examples.push_back(std::move(s));
  }
  report.aggregate = aggregate(report.examples);
  return report;
}

namespace {

nlohmann::json to_json(const Aggregate& a) {
  return {{"rouge1", a.rouge1},       {"rouge2", a.rouge2},         {"rougeL", a.rougeL},
          {"p_sim_max", a.p_sim_max}, {"p_sim_avg", a.p_sim_avg},   {"fact_score", a.fact_score},
          {"count", a.count}};
}

}  // namespace

void save_report(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write report to " + path.string());
  }
  for (const auto& e : report.examples) {
    const nlohmann::json j = {{"user_id", e.user_id},     {"news_id", e.news_id},     {"rouge1", e.rouge1},
                              {"rouge2", e.rouge2},       {"rougeL", e.rougeL},       {"p_sim_max", e.p_sim_max},
                              {"p_sim_avg", e.p_sim_avg}, {"fact_score", e.fact_score}};
    out << j.dump() << "\n";
  }
  out << nlohmann::json{{"aggregate", to_json(report.aggregate)}}.dump() << "\n";
}

std::string format_table(const std::vector<std::pair<std::string, Aggregate>>& rows) {
  std::size_t width = 6;
  for (const auto& [name, _] : rows) {
    width = std::max(width, name.size());
  }
  std::string out = fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>8}  {:>8}  {:>8}\n", "Method", width, "P_C(avg)",
                                "P_C(max)", "FactProxy", "ROUGE-1", "ROUGE-2", "ROUGE-L");
  for (const auto& [name, a] : rows) {
    out += fmt::format("{:<{}}  {:>9.2f}  {:>9.2f}  {:>9.2f}  {:>8.2f}  {:>8.2f}  {:>8.2f}\n", name, width,
                       100 * a.p_sim_avg, 100 * a.p_sim_max, 100 * a.fact_score, 100 * a.rouge1, 100 * a.rouge2,
                       100 * a.rougeL);
  }
  return out;
}

}  // namespace fpg::eval
