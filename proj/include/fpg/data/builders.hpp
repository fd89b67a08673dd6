// include/fpg/data/builders.hpp
//
// The three datasets of the training schedule: the pretraining corpus C, the
// distant-supervision set D_l (at most l users per candidate news) and the
// contrastive set D* of fact-consistent positives with rule-corrupted
// negatives.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fpg/data/records.hpp"
#include "fpg/eval/metrics.hpp"

namespace fpg::data {

inline constexpr std::size_t kDefaultHistoryCapacity = 8;

struct PretrainPair {
  std::string news_id;
  std::string body;
  std::string headline;

  bool operator==(const PretrainPair&) const = default;
};

struct TrainExample {
  std::string user_id;
  std::string candidate_news_id;
  std::vector<std::string> history_ids;  // oldest first, at most the history capacity
  std::string target_headline;

  bool operator==(const TrainExample&) const = default;
};

enum class CorruptionKind { entity_swap, number_perturb, negation_flip };

inline constexpr CorruptionKind kAllCorruptions[] = {CorruptionKind::entity_swap, CorruptionKind::number_perturb,
                                                     CorruptionKind::negation_flip};

std::string_view to_string(CorruptionKind kind);
CorruptionKind corruption_from_string(std::string_view name);

struct Negative {
  std::string headline;
  CorruptionKind kind;

  bool operator==(const Negative&) const = default;
};

struct ContrastivePair {
  std::string user_id;
  std::string candidate_news_id;
  std::vector<std::string> history_ids;
  std::string positive;
  std::vector<Negative> negatives;

  bool operator==(const ContrastivePair&) const = default;
};

// Corpus order, minus excluded ids.
std::vector<PretrainPair> build_pretrain_set(const Corpus& corpus, const std::set<std::string>& exclude_ids);

// One example per (user, clicked impression news) using the user's last
// `history_capacity` clicks as history. For every candidate news only the
// limit_l users with the longest histories survive (ties: smaller user_id).
// Output keeps click-log order.
std::vector<TrainExample> build_training_set(const Corpus& corpus, const std::vector<ClickLog>& logs,
                                             std::size_t limit_l,
                                             std::size_t history_capacity = kDefaultHistoryCapacity);

// Capitalized spans of every article, grouped by category; used for entity swaps.
class EntityPool {
 public:
  explicit EntityPool(const Corpus& corpus);

  // Spans from articles other than `news_id`: same category first, all
  // categories when the category offers none.
  std::vector<std::vector<std::string>> candidates(const std::string& news_id,
                                                   const std::string& category) const;

 private:
  struct Entry {
    std::string news_id;
    std::string category;
    std::vector<std::string> span;
  };
  std::vector<Entry> entries_;
};

// All numeral substitutions n -> n +- d, d in {1, 2, 10}, that keep the
// numeral non-negative and do not occur in the body. Each candidate is a full
// headline (words joined by single spaces).
std::vector<std::string> number_perturb_candidates(std::string_view headline, std::string_view body);

// Applies one corruption. Every corruption adds an unsupported claim or
// removes a supported one relative to the body, so the fact proxy never
// rises. Returns nullopt when the headline lacks the needed feature.
std::optional<std::string> corrupt(std::string_view headline, std::string_view body, const std::string& news_id,
                                   const std::string& category, CorruptionKind kind, const EntityPool& entities,
                                   std::mt19937_64& rng);

struct ContrastiveOptions {
  std::size_t k_neg = 3;
  double score_threshold = 0.8;
  double top_fraction = 0.6;
  std::uint64_t seed = 0;
};

// Positives: target headlines scoring >= threshold, ranked by score, top
// fraction kept. Up to k_neg negatives per positive, cycling over corruption
// kinds; only negatives scoring strictly below their positive are kept and
// pairs left without negatives are dropped.
std::vector<ContrastivePair> build_contrastive_set(const Corpus& corpus, const std::vector<TrainExample>& training_set,
                                                   const eval::FactScorer& fact_scorer,
                                                   const ContrastiveOptions& options);

// JSON-lines persistence for the prepared datasets.
void save_pretrain_set(const std::filesystem::path& path, const std::vector<PretrainPair>& pairs);
std::vector<PretrainPair> load_pretrain_set(const std::filesystem::path& path);
void save_training_set(const std::filesystem::path& path, const std::vector<TrainExample>& examples);
std::vector<TrainExample> load_training_set(const std::filesystem::path& path);
void save_contrastive_set(const std::filesystem::path& path, const std::vector<ContrastivePair>& pairs);
std::vector<ContrastivePair> load_contrastive_set(const std::filesystem::path& path);

}  // namespace fpg::data
