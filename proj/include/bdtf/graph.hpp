#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "bdtf/rng.hpp"
#include "bdtf/tensor.hpp"

namespace bdtf {

struct Param;

// Reverse-mode tape. One Graph is built per sample per forward pass; node creation order is
// the topological order, so backward() is a single reverse sweep. Node ids are indices into
// the tape and stay valid for the graph's lifetime.
class Graph {
 public:
  Graph() = default;
  // Backward closures capture the graph's address; it must never relocate.
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::function<void()> back;
    bool needs_grad = false;
  };

  int leaf(Tensor value, bool needs_grad = false);
  // Leaf backed by a trainable parameter; grads are collected via param_links() after backward.
  int param(const Param& p, int param_index);

  const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& grad(int id) { return nodes_[static_cast<size_t>(id)].grad; }

  // --- ops -------------------------------------------------------------
  int add(int a, int b);                    // same numel
  int sub(int a, int b);                    // same numel
  int mul(int a, int b);                    // hadamard, same numel
  int smul(int a, double s);
  int add_rowvec(int a, int v);             // [m x n] + [n]
  int matmul(int a, int b, i64 m, i64 k, i64 n, bool trans_a = false, bool trans_b = false);
  int gelu(int a);                          // exact erf form
  int sigmoid(int a);
  int layer_norm(int x, int gain, int bias);  // row-wise over last dim of [m x n]
  // Row-wise softmax; key_mask (optional, length n) zeroes masked columns exactly.
  // Throws AllKeysMasked when a row has no attendable key.
  int softmax_rows(int x, const std::vector<std::uint8_t>* key_mask = nullptr);
  int reshape(int a, std::vector<i64> shape);
  // y.data[i] = x.data[idx[i]]; backward scatter-adds. Covers slicing/permutes/im2col.
  int gather(int a, std::shared_ptr<const std::vector<i64>> idx, std::vector<i64> out_shape);
  int concat(const std::vector<int>& parts, std::vector<i64> out_shape);  // flat concat
  // column-wise concat of [m x w_i] blocks into [m x sum(w_i)]
  int concat_cols(const std::vector<int>& parts);
  int sum(int a);                           // scalar
  int dot(int a, int b);                    // scalar, same numel
  int cosine(int a, int b);                 // scalar; caller guards zero norms
  int scale_by(int a, int s);               // tensor * scalar-node
  // sum(mask * (target - pred)^2); target/mask are plain tensors, not nodes
  int masked_sse(int pred, const Tensor& target, const Tensor& mask);
  int dropout(int a, double rate, Rng& rng);  // inverted dropout

  void backward(int loss_id);

  const std::vector<std::pair<int, int>>& param_links() const { return param_links_; }
  size_t node_count() const { return nodes_.size(); }

 private:
  int push(Tensor value, bool needs_grad, std::function<void()> back = {});
  Tensor& grad_buf(int id);  // allocates zeros on first touch

  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> param_links_;  // (node id, param index)
};

}  // namespace bdtf
