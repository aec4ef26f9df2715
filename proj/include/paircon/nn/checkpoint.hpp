// Self-describing binary container for named tensors: magic "PAIRCON1", a
// manifest of (name, dtype, shape) entries sorted by name, little-endian
// payloads. Round-trips bit-exactly.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "paircon/core/tensor.hpp"
#include "paircon/nn/layers.hpp"

namespace paircon::nn {

class TensorStore {
 public:
  void put_f32(const std::string& name, core::Tensor<float> t);
  void put_f64(const std::string& name, core::Tensor<double> t);
  void put_u64(const std::string& name, std::vector<uint64_t> v);

  bool contains(const std::string& name) const;
  const core::Tensor<float>& f32(const std::string& name) const;
  const core::Tensor<double>& f64(const std::string& name) const;
  const std::vector<uint64_t>& u64(const std::string& name) const;

  std::vector<std::string> names() const;  // sorted
  size_t size() const { return f32_.size() + f64_.size() + u64_.size(); }

  void save(const std::string& path) const;
  static TensorStore load(const std::string& path);

 private:
  std::map<std::string, core::Tensor<float>> f32_;
  std::map<std::string, core::Tensor<double>> f64_;
  std::map<std::string, std::vector<uint64_t>> u64_;
};

// Snapshot parameters and buffers into / out of a store. Loading checks that
// every referenced name is present with the exact shape.
void store_params(TensorStore& store, const std::vector<ParamRef<float>>& params,
                  const std::vector<BufferRef<float>>& buffers);
void load_params(const TensorStore& store, const std::vector<ParamRef<float>>& params,
                 const std::vector<BufferRef<float>>& buffers);

}  // namespace paircon::nn
