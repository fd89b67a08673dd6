// Independent Eigen re-implementation of the encoder-decoder, reading weights
// by name from a ParameterStore. Used as the oracle for the autodiff model.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpg/model/config.hpp"
#include "fpg/model/parameters.hpp"
#include "fpg/text/vocab.hpp"

namespace fpg::testkit {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct ReferenceHistory {
  Mat e_u;                    // [N, d], zero rows for absent slots
  std::vector<bool> present;  // length N
};

struct ReferenceEncoding {
  Mat x_enc;
  RowVec alpha;  // personalized only
  RowVec u;
};

class ReferenceModel {
 public:
  ReferenceModel(const model::ParameterStore& store, const model::ModelConfig& config)
      : store_(store), config_(config) {}

  ReferenceHistory history(const std::vector<text::TokenSeq>& headlines) const;
  // With `hist` the history-cross sub-layers run and alpha/u are filled.
  ReferenceEncoding encode(std::span<const text::TokenId> body, const ReferenceHistory* hist) const;
  // Logits [prefix length, vocab]. With `u` the first decoder slot carries it.
  Mat decode(const ReferenceEncoding& enc, std::span<const text::TokenId> prefix, bool personalized) const;

  // Output plus the probability matrix of every head.
  struct Attention {
    Mat output;
    std::vector<Mat> probs;
  };
  Attention attention(const std::string& name, const Mat& queries, const Mat& keys, double scale,
                      const std::vector<std::vector<bool>>* allowed) const;

  Mat param(const std::string& name) const;
  RowVec vec(const std::string& name) const;

 private:
  Mat layer_norm(const Mat& x, const std::string& name) const;
  Mat linear(const Mat& x, const std::string& name) const;
  Mat feed_forward(const Mat& x, const std::string& name) const;
  RowVec headline_rep(std::span<const text::TokenId> ids) const;

  const model::ParameterStore& store_;
  model::ModelConfig config_;
};

}  // namespace fpg::testkit
