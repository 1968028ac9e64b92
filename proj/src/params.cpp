#include "bdtf/params.hpp"

#include <cmath>

namespace bdtf {

int ParamStore::add(Param p) {
  p.grad = Tensor::zeros(p.value.shape);
  p.adam_m = Tensor::zeros(p.value.shape);
  p.adam_v = Tensor::zeros(p.value.shape);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int ParamStore::add_glorot(const std::string& name, i64 fan_in, i64 fan_out,
                           std::vector<i64> shape) {
  Param p;
  p.name = name;
  p.value = Tensor(std::move(shape));
  Rng rng = stream(name);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : p.value.data) x = rng.uniform(-limit, limit);
  return add(std::move(p));
}

int ParamStore::add_gaussian(const std::string& name, std::vector<i64> shape, double sd) {
  Param p;
  p.name = name;
  p.value = Tensor(std::move(shape));
  Rng rng = stream(name);
  for (auto& x : p.value.data) x = sd * rng.gaussian();
  return add(std::move(p));
}

int ParamStore::add_zeros(const std::string& name, std::vector<i64> shape) {
  Param p;
  p.name = name;
  p.value = Tensor(std::move(shape));
  return add(std::move(p));
}

int ParamStore::add_ones(const std::string& name, std::vector<i64> shape) {
  Param p;
  p.name = name;
  p.value = Tensor::full(std::move(shape), 1.0);
  return add(std::move(p));
}

int ParamStore::add_unit_rows(const std::string& name, i64 rows, i64 cols) {
  Param p;
  p.name = name;
  p.value = Tensor({rows, cols});
  Rng rng = stream(name);
  for (i64 i = 0; i < rows; ++i) {
    double norm2 = 0.0;
    for (i64 j = 0; j < cols; ++j) {
      const double v = rng.gaussian();
      p.value(i, j) = v;
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (i64 j = 0; j < cols; ++j) p.value(i, j) *= inv;
  }
  return add(std::move(p));
}

i64 ParamStore::scalar_count() const {
  i64 n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a_bytes(p.name.data(), p.name.size(), h);
    for (i64 d : p.value.shape) h = fnv1a_bytes(&d, sizeof(d), h);
    h = fnv1a_bytes(p.value.data.data(), p.value.data.size() * sizeof(double), h);
  }
  return h;
}

}  // namespace bdtf
