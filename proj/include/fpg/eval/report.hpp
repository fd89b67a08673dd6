// include/fpg/eval/report.hpp
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fpg/data/records.hpp"
#include "fpg/decoding/beam_search.hpp"
#include "fpg/eval/metrics.hpp"
#include "fpg/model/fpg_model.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::eval {

struct ExampleScores {
  std::string user_id;
  std::string news_id;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double p_sim_max = 0.0;
  double p_sim_avg = 0.0;
  double fact_score = 0.0;
};

struct Aggregate {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double p_sim_max = 0.0;
  double p_sim_avg = 0.0;
  double fact_score = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::vector<ExampleScores> examples;
  Aggregate aggregate;  // arithmetic means in [0, 1]
};

// Mean-pooled token embeddings of a trained model, as a dense vector keyed by
// dimension index. Out-of-vocabulary tokens map to UNK.
class ModelEmbedder : public TextEmbedder {
 public:
  ModelEmbedder(const model::FpgModel& model, const text::Vocab& vocab) : model_(model), vocab_(vocab) {}
  SparseVector embed(std::string_view text) const override;

 private:
  const model::FpgModel& model_;
  const text::Vocab& vocab_;
};

// TF-IDF over every headline of the corpus.
std::unique_ptr<TextEmbedder> corpus_tfidf(const data::Corpus& corpus);

// Throws listing every prediction whose reference, article or click history
// cannot be found.
EvalReport evaluate_run(const std::vector<decoding::Prediction>& predictions,
                        const std::vector<data::Reference>& references, const data::Corpus& corpus,
                        const std::vector<data::ClickLog>& click_logs, const TextEmbedder& embedder);

Aggregate aggregate(const std::vector<ExampleScores>& examples);

// JSON lines: one record per example then {"aggregate": {...}}.
void save_report(const std::filesystem::path& path, const EvalReport& report);

// Columns P_C(avg), P_C(max), FactProxy, ROUGE-1, ROUGE-2, ROUGE-L scaled by 100.
std::string format_table(const std::vector<std::pair<std::string, Aggregate>>& rows);

}  // namespace fpg::eval
