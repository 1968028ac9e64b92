#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace bdtf {

using i64 = std::int64_t;

// Dense row-major tensor of doubles. Value semantics; shapes stay small
// (rank <= 3 in practice). All model math runs in 64-bit.
struct Tensor {
  std::vector<i64> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<i64> s) : shape(std::move(s)), data(numel(shape), 0.0) {}
  Tensor(std::vector<i64> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    assert(numel(shape) == static_cast<i64>(data.size()));
  }

  static i64 numel(const std::vector<i64>& s) {
    i64 n = 1;
    for (i64 v : s) n *= v;
    return n;
  }

  i64 size() const { return static_cast<i64>(data.size()); }
  bool empty() const { return data.empty(); }
  i64 dim(int i) const { return shape[static_cast<size_t>(i)]; }
  i64 rows() const { return shape.empty() ? 0 : shape[0]; }
  i64 cols() const { return shape.size() < 2 ? 0 : shape[1]; }

  double& operator()(i64 i) { return data[static_cast<size_t>(i)]; }
  double operator()(i64 i) const { return data[static_cast<size_t>(i)]; }
  double& operator()(i64 i, i64 j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  double operator()(i64 i, i64 j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
  double& operator()(i64 i, i64 j, i64 k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  double operator()(i64 i, i64 j, i64 k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  static Tensor zeros(std::vector<i64> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<i64> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(double v) {
    for (auto& x : data) x = v;
  }
};

}  // namespace bdtf
