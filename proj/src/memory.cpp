#include <cmath>

#include "bdtf/error.hpp"
#include "bdtf/model.hpp"

namespace bdtf {

PatternMemory::PatternMemory(const ModelConfig& cfg, ParamStore& store) : cfg_(cfg) {
  const i64 d = cfg.d, dfs = cfg.d_ffs, T = cfg.T_max;
  omega_ = store.add_unit_rows("memory.slots", cfg.N_mem, d);
  q_w1_ = store.add_glorot("memory.query_w1", cfg.s_bar * d, dfs, {cfg.s_bar * d, dfs});
  q_b1_ = store.add_zeros("memory.query_b1", {dfs});
  q_w2_ = store.add_glorot("memory.query_w2", dfs, d, {dfs, d});
  q_b2_ = store.add_zeros("memory.query_b2", {d});
  te_w1_ = store.add_glorot("memory.traj_enc_w1", T, dfs, {T, dfs});
  te_b1_ = store.add_zeros("memory.traj_enc_b1", {dfs});
  te_w2_ = store.add_glorot("memory.traj_enc_w2", dfs, dfs, {dfs, dfs});
  te_b2_ = store.add_zeros("memory.traj_enc_b2", {dfs});
  te_w3_ = store.add_glorot("memory.traj_enc_w3", dfs, d, {dfs, d});
  te_b3_ = store.add_zeros("memory.traj_enc_b3", {d});
  td_w1_ = store.add_glorot("memory.traj_dec_w1", d, dfs, {d, dfs});
  td_b1_ = store.add_zeros("memory.traj_dec_b1", {dfs});
  td_w2_ = store.add_glorot("memory.traj_dec_w2", dfs, dfs, {dfs, dfs});
  td_b2_ = store.add_zeros("memory.traj_dec_b2", {dfs});
  td_w3_ = store.add_glorot("memory.traj_dec_w3", dfs, T, {dfs, T});
  td_b3_ = store.add_zeros("memory.traj_dec_b3", {T});
}

int PatternMemory::memory_query(Graph& g, int H, const ParamStore& store) const {
  const i64 sd = cfg_.s_bar * cfg_.d;
  const int flat = g.reshape(H, {1, sd});
  int q = g.add_rowvec(g.matmul(flat, g.param(store[q_w1_], q_w1_), 1, sd, cfg_.d_ffs),
                       g.param(store[q_b1_], q_b1_));
  q = g.gelu(q);
  return g.add_rowvec(g.matmul(q, g.param(store[q_w2_], q_w2_), 1, cfg_.d_ffs, cfg_.d),
                      g.param(store[q_b2_], q_b2_));
}

RetrievalResult PatternMemory::retrieve_top2(Graph& g, int q_mem, const ParamStore& store) const {
  const i64 d = cfg_.d, N = cfg_.N_mem;
  const Tensor& qv = g.val(q_mem);
  double qn = 0.0;
  for (i64 j = 0; j < d; ++j) qn += qv(j) * qv(j);
  if (qn < 1e-24) throw Error("DegenerateQuery", "memory query has zero norm");

  const int omega = g.param(store[omega_], omega_);
  std::vector<int> slot_rows(static_cast<size_t>(N));
  std::vector<int> sim_nodes(static_cast<size_t>(N));
  RetrievalResult r;
  r.similarities.resize(static_cast<size_t>(N));
  for (i64 i = 0; i < N; ++i) {
    auto idx = std::make_shared<std::vector<i64>>();
    idx->reserve(static_cast<size_t>(d));
    for (i64 j = 0; j < d; ++j) idx->push_back(i * d + j);
    slot_rows[static_cast<size_t>(i)] = g.gather(omega, idx, {1, d});
    sim_nodes[static_cast<size_t>(i)] = g.cosine(q_mem, slot_rows[static_cast<size_t>(i)]);
    r.similarities[static_cast<size_t>(i)] = g.val(sim_nodes[static_cast<size_t>(i)])(0);
  }

  // top-2 by value, ties resolved to the lower index
  i64 first = 0;
  for (i64 i = 1; i < N; ++i)
    if (r.similarities[static_cast<size_t>(i)] > r.similarities[static_cast<size_t>(first)])
      first = i;
  i64 second = first == 0 ? 1 : 0;
  for (i64 i = 0; i < N; ++i) {
    if (i == first) continue;
    if (r.similarities[static_cast<size_t>(i)] > r.similarities[static_cast<size_t>(second)])
      second = i;
  }
  r.indices = {first, second};

  const int pair = g.concat({sim_nodes[static_cast<size_t>(first)],
                             sim_nodes[static_cast<size_t>(second)]},
                            {1, 2});
  const int alpha = g.softmax_rows(pair);
  r.alpha = {g.val(alpha)(0), g.val(alpha)(1)};
  auto a0_idx = std::make_shared<std::vector<i64>>(std::vector<i64>{0});
  auto a1_idx = std::make_shared<std::vector<i64>>(std::vector<i64>{1});
  const int a0 = g.gather(alpha, a0_idx, {1});
  const int a1 = g.gather(alpha, a1_idx, {1});
  r.h_mem = g.add(g.scale_by(slot_rows[static_cast<size_t>(first)], a0),
                  g.scale_by(slot_rows[static_cast<size_t>(second)], a1));
  return r;
}

int PatternMemory::encode_trajectory(Graph& g, const Tensor& y_masked,
                                     const ParamStore& store) const {
  const i64 T = cfg_.T_max, dfs = cfg_.d_ffs;
  const int y = g.leaf(Tensor({1, T}, y_masked.data));
  int e = g.add_rowvec(g.matmul(y, g.param(store[te_w1_], te_w1_), 1, T, dfs),
                       g.param(store[te_b1_], te_b1_));
  e = g.gelu(e);
  e = g.add_rowvec(g.matmul(e, g.param(store[te_w2_], te_w2_), 1, dfs, dfs),
                   g.param(store[te_b2_], te_b2_));
  e = g.gelu(e);
  return g.add_rowvec(g.matmul(e, g.param(store[te_w3_], te_w3_), 1, dfs, cfg_.d),
                      g.param(store[te_b3_], te_b3_));
}

int PatternMemory::decode_trajectory(Graph& g, int e_trajectory, const ParamStore& store) const {
  const i64 T = cfg_.T_max, dfs = cfg_.d_ffs;
  int y = g.add_rowvec(g.matmul(e_trajectory, g.param(store[td_w1_], td_w1_), 1, cfg_.d, dfs),
                       g.param(store[td_b1_], td_b1_));
  y = g.gelu(y);
  y = g.add_rowvec(g.matmul(y, g.param(store[td_w2_], td_w2_), 1, dfs, dfs),
                   g.param(store[td_b2_], td_b2_));
  y = g.gelu(y);
  return g.add_rowvec(g.matmul(y, g.param(store[td_w3_], td_w3_), 1, dfs, T),
                      g.param(store[td_b3_], td_b3_));
}

Tensor PatternMemory::decode_slot(i64 slot, const ParamStore& store) const {
  Graph g;
  const Tensor& omega = store[omega_].value;
  Tensor row({1, cfg_.d});
  for (i64 j = 0; j < cfg_.d; ++j) row(0, j) = omega(slot, j);
  const int e = g.leaf(std::move(row));
  const int y = decode_trajectory(g, e, store);
  Tensor out({cfg_.T_max});
  out.data = g.val(y).data;
  return out;
}

void PatternMemory::renorm_slots(Param& omega, std::uint64_t seed, i64 step) {
  const i64 rows = omega.value.rows(), cols = omega.value.cols();
  for (i64 i = 0; i < rows; ++i) {
    double n2 = 0.0;
    for (i64 j = 0; j < cols; ++j) n2 += omega.value(i, j) * omega.value(i, j);
    if (std::sqrt(n2) >= 1e-8) continue;
    Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(step)),
                     static_cast<std::uint64_t>(i)));
    double fresh2 = 0.0;
    for (i64 j = 0; j < cols; ++j) {
      omega.value(i, j) = rng.gaussian();
      fresh2 += omega.value(i, j) * omega.value(i, j);
    }
    const double inv = 1.0 / std::sqrt(fresh2);
    for (i64 j = 0; j < cols; ++j) omega.value(i, j) *= inv;
  }
}

PredictionHead::PredictionHead(const ModelConfig& cfg, ParamStore& store) : cfg_(cfg) {
  const i64 d = cfg.d, dfs = cfg.d_ffs;
  w3_ = store.add_glorot("head.proj_w3", cfg.s_bar * d, dfs, {cfg.s_bar * d, dfs});
  b3_ = store.add_zeros("head.proj_b3", {dfs});
  w4_ = store.add_glorot("head.proj_w4", dfs, d, {dfs, d});
  b4_ = store.add_zeros("head.proj_b4", {d});
  if (cfg.mdpm) {
    g_w1_ = store.add_glorot("head.gate_w1", 2 * d, dfs, {2 * d, dfs});
    g_b1_ = store.add_zeros("head.gate_b1", {dfs});
    g_w2_ = store.add_glorot("head.gate_w2", dfs, d, {dfs, d});
    g_b2_ = store.add_zeros("head.gate_b2", {d});
  }
  head_w_ = store.add_glorot("head.out_w", d, cfg.T_max, {d, cfg.T_max});
  head_b_ = store.add_zeros("head.out_b", {cfg.T_max});
}

int PredictionHead::project(Graph& g, int H, const ParamStore& store) const {
  const i64 sd = cfg_.s_bar * cfg_.d;
  const int flat = g.reshape(H, {1, sd});
  int hb = g.add_rowvec(g.matmul(flat, g.param(store[w3_], w3_), 1, sd, cfg_.d_ffs),
                        g.param(store[b3_], b3_));
  hb = g.gelu(hb);
  return g.add_rowvec(g.matmul(hb, g.param(store[w4_], w4_), 1, cfg_.d_ffs, cfg_.d),
                      g.param(store[b4_], b4_));
}

PredictionHead::Output PredictionHead::fuse_predict(Graph& g, int H_bar, int h_mem,
                                                    const ParamStore& store) const {
  Output out;
  int fused = H_bar;
  if (h_mem >= 0) {
    const int cat = g.concat_cols({H_bar, h_mem});
    int beta = g.add_rowvec(g.matmul(cat, g.param(store[g_w1_], g_w1_), 1, 2 * cfg_.d, cfg_.d_ffs),
                            g.param(store[g_b1_], g_b1_));
    beta = g.gelu(beta);
    beta = g.add_rowvec(g.matmul(beta, g.param(store[g_w2_], g_w2_), 1, cfg_.d_ffs, cfg_.d),
                        g.param(store[g_b2_], g_b2_));
    beta = g.sigmoid(beta);
    out.beta = beta;
    fused = g.add(H_bar, g.mul(beta, h_mem));
  }
  out.y_hat = g.add_rowvec(g.matmul(fused, g.param(store[head_w_], head_w_), 1, cfg_.d, cfg_.T_max),
                           g.param(store[head_b_], head_b_));
  return out;
}

}  // namespace bdtf
