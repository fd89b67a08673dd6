// include/fpg/experiment/config.hpp
//
// One JSON document describing a full run. Every key is optional; missing
// keys take the shipped toy-scale defaults. Setting "schedule_preset" to
// "paper" switches the stage epochs and learning rates to the published
// values, and ModelConfig::paper_scale() values can be given under "model".
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "fpg/data/builders.hpp"
#include "fpg/data/synthetic.hpp"
#include "fpg/decoding/beam_search.hpp"
#include "fpg/model/config.hpp"
#include "fpg/training/trainer.hpp"

namespace fpg::experiment {

struct Paths {
  std::filesystem::path corpus = "data/corpus.jsonl";
  std::filesystem::path clicks = "data/clicks.jsonl";
  std::filesystem::path references = "data/references.jsonl";
  std::filesystem::path output_dir = "runs/default";
};

struct VocabSettings {
  std::size_t min_freq = 1;
  std::size_t max_size = 2000;
};

struct DataSettings {
  std::size_t limit_l = 5;
  std::size_t history_capacity = data::kDefaultHistoryCapacity;
  data::ContrastiveOptions contrastive;
  double heldout_fraction = 0.2;  // share of D* kept aside for the margin
};

struct EvalSettings {
  std::string embedder = "tfidf";  // tfidf | model
};

struct ExperimentConfig {
  Paths paths;
  std::uint64_t seed = 0;
  model::ModelConfig model;
  VocabSettings vocab;
  DataSettings data;
  std::string schedule_preset = "toy";
  std::array<training::StageConfig, 4> stages;
  bool keep_all_epochs = false;
  decoding::BeamOptions decode;
  EvalSettings eval;
  bool no_history = false;
  data::SyntheticOptions synth;

  ExperimentConfig();

  // Throws fpg::Error naming the offending field.
  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(std::string_view text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Deterministic per-component seed derived from the global seed.
  std::uint64_t component_seed(std::uint64_t component) const;
};

}  // namespace fpg::experiment
