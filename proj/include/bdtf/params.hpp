#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdtf/rng.hpp"
#include "bdtf/tensor.hpp"

namespace bdtf {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;     // summed over the batch by the trainer
  Tensor adam_m;   // optimizer state
  Tensor adam_v;
};

// Flat registry of trainable parameters. Registration order is fixed per config, so the
// optimizer state, checkpoints and checksums are reproducible.
class ParamStore {
 public:
  // init_seed is mixed with the parameter name so each tensor gets its own stream.
  explicit ParamStore(std::uint64_t init_seed) : init_seed_(init_seed) {}

  int add_glorot(const std::string& name, i64 fan_in, i64 fan_out, std::vector<i64> shape);
  int add_gaussian(const std::string& name, std::vector<i64> shape, double sd);
  int add_zeros(const std::string& name, std::vector<i64> shape);
  int add_ones(const std::string& name, std::vector<i64> shape);
  // Unit-norm gaussian rows (memory slots).
  int add_unit_rows(const std::string& name, i64 rows, i64 cols);

  Param& operator[](int i) { return params_[static_cast<size_t>(i)]; }
  const Param& operator[](int i) const { return params_[static_cast<size_t>(i)]; }
  int count() const { return static_cast<int>(params_.size()); }
  i64 scalar_count() const;
  int find(const std::string& name) const;  // -1 when absent

  void zero_grad();
  // FNV-1a over names, shapes and value bytes.
  std::uint64_t checksum() const;

  std::vector<Param>& items() { return params_; }
  const std::vector<Param>& items() const { return params_; }

  Rng stream(const std::string& name) const { return Rng(mix_seed(init_seed_, fnv1a(name))); }

 private:
  int add(Param p);

  std::uint64_t init_seed_;
  std::vector<Param> params_;
};

}  // namespace bdtf
