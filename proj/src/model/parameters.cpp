// src/model/parameters.cpp
#include "fpg/model/parameters.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fpg/error.hpp"

namespace fpg::model {

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

std::string_view to_string(Partition p) { return p == Partition::core ? "core" : "personal"; }

nn::Tensor ParameterStore::add(std::string name, nn::Shape shape, Partition partition, bool decay,
                               std::vector<double> values) {
  if (index_.contains(name)) {
    throw Error("duplicate parameter " + name);
  }
  nn::Tensor t = nn::Tensor::parameter(std::move(shape), std::move(values));
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), partition, decay, t});
  return t;
}

nn::Tensor ParameterStore::add_normal(std::string name, nn::Shape shape, Partition partition, double stddev,
                                      std::mt19937_64& rng, bool decay) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(nn::shape_numel(shape));
  for (double& v : values) {
    v = dist(rng);
  }
  return add(std::move(name), std::move(shape), partition, decay, std::move(values));
}

nn::Tensor ParameterStore::add_constant(std::string name, nn::Shape shape, Partition partition, double value) {
  std::vector<double> values(nn::shape_numel(shape), value);
  return add(std::move(name), std::move(shape), partition, false, std::move(values));
}

const NamedParameter& ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw Error("unknown parameter " + std::string(name));
  }
  return params_[it->second];
}

bool ParameterStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParameterStore::numel(Partition p) const {
  std::size_t n = 0;
  for (const auto& param : params_) {
    if (param.partition == p) {
      n += param.tensor.numel();
    }
  }
  return n;
}

std::uint64_t ParameterStore::checksum(Partition p) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& param : params_) {
    if (param.partition != p) {
      continue;
    }
    mix(param.name.data(), param.name.size());
    const auto values = param.tensor.data();
    mix(values.data(), values.size_bytes());
  }
  return h;
}

void ParameterStore::zero_grad() {
  for (auto& param : params_) {
    param.tensor.zero_grad();
  }
}

namespace {

constexpr char kMagic[8] = {'F', 'P', 'G', 'P', 'A', 'R', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error("truncated parameter file " + path.string());
  }
  return value;
}

std::string get_string(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw Error("truncated parameter file " + path.string());
  }
  return s;
}

}  // namespace

void write_parameter_file(const std::filesystem::path& path, const std::string& header_json,
                          const ParameterStore& store) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write parameter file " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header_json.size());
  out.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
  put<std::uint64_t>(out, store.size());
  for (const auto& param : store.all()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(param.name.size()));
    out.write(param.name.data(), static_cast<std::streamsize>(param.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(param.partition));
    put<std::uint8_t>(out, param.decay ? 1 : 0);
    const auto& shape = param.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) {
      put<std::uint64_t>(out, d);
    }
    const auto values = param.tensor.data();
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  }
  if (!out) {
    throw Error("failed writing parameter file " + path.string());
  }
}

ParameterFile read_parameter_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open parameter file " + path.string());
  }
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(path.string() + " is not a parameter file");
  }
  if (get<std::uint32_t>(in, path) != kVersion) {
    throw Error("unsupported parameter file version in " + path.string());
  }
  ParameterFile file;
  file.header_json = get_string(in, get<std::uint64_t>(in, path), path);
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    ParameterFile::Entry e;
    e.name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto partition = get<std::uint8_t>(in, path);
    if (partition > 1) {
      throw Error("bad partition tag for " + e.name + " in " + path.string());
    }
    e.partition = static_cast<Partition>(partition);
    e.decay = get<std::uint8_t>(in, path) != 0;
    const auto rank = get<std::uint32_t>(in, path);
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, path)));
    }
    e.values.resize(nn::shape_numel(e.shape));
    if (!in.read(reinterpret_cast<char*>(e.values.data()),
                 static_cast<std::streamsize>(e.values.size() * sizeof(double)))) {
      throw Error("truncated parameter file " + path.string());
    }
    file.entries.push_back(std::move(e));
  }
  return file;
}

}  // namespace fpg::model
