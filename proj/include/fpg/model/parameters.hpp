// include/fpg/model/parameters.hpp
//
// Named trainable tensors split into two disjoint partitions: the transformer
// core (token/positional embeddings, encoder and decoder blocks, output
// projection) and the personalization add-ons (history encoder and every
// history-cross sub-layer). The training schedule freezes one or the other.
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fpg/nn/tensor.hpp"

namespace fpg::model {

enum class Partition : std::uint8_t { core = 0, personal = 1 };

std::string_view to_string(Partition p);

struct NamedParameter {
  std::string name;
  Partition partition = Partition::core;
  bool decay = true;  // weight decay applies (false for biases, gains, embeddings)
  nn::Tensor tensor;
};

class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  nn::Tensor add(std::string name, nn::Shape shape, Partition partition, bool decay, std::vector<double> values);
  // normal(0, std) values.
  nn::Tensor add_normal(std::string name, nn::Shape shape, Partition partition, double stddev, std::mt19937_64& rng,
                        bool decay = true);
  nn::Tensor add_constant(std::string name, nn::Shape shape, Partition partition, double value);

  const std::vector<NamedParameter>& all() const { return params_; }
  std::vector<NamedParameter>& all() { return params_; }
  const NamedParameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t numel(Partition p) const;

  // FNV-1a over names and raw float64 bytes of one partition.
  std::uint64_t checksum(Partition p) const;
  void zero_grad();

 private:
  std::vector<NamedParameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parameter file layout (all integers little-endian):
//   "FPGPARAM" | u32 version | u64 header length | header JSON
//   u64 tensor count | per tensor: u32 name length, name, u8 partition,
//   u8 decay, u32 rank, u64 dims[rank], f64 values[numel]
// The header JSON holds the model config and caller metadata.
void write_parameter_file(const std::filesystem::path& path, const std::string& header_json,
                          const ParameterStore& store);

struct ParameterFile {
  std::string header_json;
  struct Entry {
    std::string name;
    Partition partition;
    bool decay;
    nn::Shape shape;
    std::vector<double> values;
  };
  std::vector<Entry> entries;
};

ParameterFile read_parameter_file(const std::filesystem::path& path);

}  // namespace fpg::model
