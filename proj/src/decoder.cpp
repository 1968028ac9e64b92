#include <cmath>

#include "bdtf/error.hpp"
#include "bdtf/model.hpp"

namespace bdtf {

ConditionDecoder::ConditionDecoder(const ModelConfig& cfg, ParamStore& store) : cfg_(cfg) {
  const i64 d = cfg.d;
  qg_ = store.add_gaussian("decoder.queries", {cfg.s_bar, d}, 0.02);
  if (cfg.use_condition_prior()) {
    w1_ = store.add_glorot("decoder.prior_w1", cfg.d_enc, d, {cfg.d_enc, d});
    b1_ = store.add_zeros("decoder.prior_b1", {d});
    // per-query d x d maps stored block-wise: columns [i*d, (i+1)*d) belong to query i
    w2_ = store.add_glorot("decoder.prior_w2", d, d, {d, cfg.s_bar * d});
    b2_ = store.add_zeros("decoder.prior_b2", {cfg.s_bar * d});
  }
  for (i64 l = 0; l < cfg.L_de; ++l) {
    const std::string base = "decoder.layer" + std::to_string(l);
    Layer layer;
    auto attn = [&](const std::string& which) {
      AttnParams p;
      p.wq = store.add_glorot(base + "." + which + ".wq", d, d, {d, d});
      p.wk = store.add_glorot(base + "." + which + ".wk", d, d, {d, d});
      p.wv = store.add_glorot(base + "." + which + ".wv", d, d, {d, d});
      p.wo = store.add_glorot(base + "." + which + ".wo", d, d, {d, d});
      return p;
    };
    layer.self_attn = attn("self");
    layer.cross_attn = attn("cross");
    layer.ff_w1 = store.add_glorot(base + ".ff_w1", d, cfg.d_ff, {d, cfg.d_ff});
    layer.ff_b1 = store.add_zeros(base + ".ff_b1", {cfg.d_ff});
    layer.ff_w2 = store.add_glorot(base + ".ff_w2", cfg.d_ff, d, {cfg.d_ff, d});
    layer.ff_b2 = store.add_zeros(base + ".ff_b2", {d});
    layer.ln1_g = store.add_ones(base + ".ln1_g", {d});
    layer.ln1_b = store.add_zeros(base + ".ln1_b", {d});
    layer.ln2_g = store.add_ones(base + ".ln2_g", {d});
    layer.ln2_b = store.add_zeros(base + ".ln2_b", {d});
    layer.ln3_g = store.add_ones(base + ".ln3_g", {d});
    layer.ln3_b = store.add_zeros(base + ".ln3_b", {d});
    layers_.push_back(layer);
  }
}

ConditionDecoder::Prior ConditionDecoder::make_condition_prior(Graph& g, int z_ac,
                                                               const ParamStore& store) const {
  if (w1_ < 0) throw Error("InvalidConfig", "condition prior is disabled in this config");
  Prior prior;
  prior.e_ac = g.add_rowvec(g.matmul(z_ac, g.param(store[w1_], w1_), 1, cfg_.d_enc, cfg_.d),
                            g.param(store[b1_], b1_));
  const int flat = g.add_rowvec(
      g.matmul(prior.e_ac, g.param(store[w2_], w2_), 1, cfg_.d, cfg_.s_bar * cfg_.d),
      g.param(store[b2_], b2_));
  prior.E_hat = g.reshape(flat, {cfg_.s_bar, cfg_.d});
  return prior;
}

int ConditionDecoder::generic_queries(Graph& g, const ParamStore& store) const {
  return g.param(store[qg_], qg_);
}

namespace {

std::shared_ptr<std::vector<i64>> col_slice_index(i64 rows, i64 cols, i64 off, i64 width) {
  auto idx = std::make_shared<std::vector<i64>>();
  idx->reserve(static_cast<size_t>(rows * width));
  for (i64 r = 0; r < rows; ++r)
    for (i64 j = 0; j < width; ++j) idx->push_back(r * cols + off + j);
  return idx;
}

}  // namespace

int ConditionDecoder::attention(Graph& g, const AttnParams& p, int Q, int K, int V, int E_hat,
                                const std::vector<std::uint8_t>* key_mask,
                                const ParamStore& store, const ForwardOptions& opts,
                                Tensor* capture) const {
  const i64 d = cfg_.d;
  const i64 n_q = g.val(Q).rows();
  const i64 n_k = g.val(K).rows();
  const i64 dh = d / cfg_.h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool train = opts.dropout_rng != nullptr && cfg_.dropout > 0.0;

  const int Qm = E_hat >= 0 ? g.add(Q, E_hat) : Q;
  const int QW = g.matmul(Qm, g.param(store[p.wq], p.wq), n_q, d, d);
  const int KW = g.matmul(K, g.param(store[p.wk], p.wk), n_k, d, d);
  const int VW = g.matmul(V, g.param(store[p.wv], p.wv), n_k, d, d);

  if (capture) *capture = Tensor({cfg_.h, n_q, n_k});
  std::vector<int> heads;
  heads.reserve(static_cast<size_t>(cfg_.h));
  for (i64 i = 0; i < cfg_.h; ++i) {
    const int qi = g.gather(QW, col_slice_index(n_q, d, i * dh, dh), {n_q, dh});
    const int ki = g.gather(KW, col_slice_index(n_k, d, i * dh, dh), {n_k, dh});
    const int vi = g.gather(VW, col_slice_index(n_k, d, i * dh, dh), {n_k, dh});
    const int scores = g.smul(g.matmul(qi, ki, n_q, dh, n_k, false, true), scale);
    int probs = g.softmax_rows(scores, key_mask);
    if (capture) {
      const Tensor& pv = g.val(probs);
      for (i64 r = 0; r < n_q; ++r)
        for (i64 c = 0; c < n_k; ++c) (*capture)(i, r, c) = pv(r, c);
    }
    if (train) probs = g.dropout(probs, cfg_.dropout, *opts.dropout_rng);
    heads.push_back(g.matmul(probs, vi, n_q, n_k, dh));
  }
  const int cat = g.concat_cols(heads);
  return g.matmul(cat, g.param(store[p.wo], p.wo), n_q, d, d);
}

ConditionDecoder::Output ConditionDecoder::decode(Graph& g, int X_de, int tokens, int E_hat,
                                                  const std::vector<std::uint8_t>& key_mask,
                                                  const ParamStore& store,
                                                  const ForwardOptions& opts) const {
  const i64 d = cfg_.d;
  const i64 s = cfg_.s_bar;
  const bool train = opts.dropout_rng != nullptr && cfg_.dropout > 0.0;
  Output out;
  int H = X_de;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    const int sa = attention(g, layer.self_attn, H, H, H, E_hat, nullptr, store, opts, nullptr);
    const int H1 = g.layer_norm(g.add(H, sa), g.param(store[layer.ln1_g], layer.ln1_g),
                                g.param(store[layer.ln1_b], layer.ln1_b));
    Tensor* capture = (last && opts.capture_attention) ? &out.final_cross_attention : nullptr;
    const int ca = attention(g, layer.cross_attn, H1, tokens, tokens, E_hat, &key_mask, store,
                             opts, capture);
    const int H2 = g.layer_norm(g.add(H1, ca), g.param(store[layer.ln2_g], layer.ln2_g),
                                g.param(store[layer.ln2_b], layer.ln2_b));
    int ff = g.add_rowvec(g.matmul(H2, g.param(store[layer.ff_w1], layer.ff_w1), s, d, cfg_.d_ff),
                          g.param(store[layer.ff_b1], layer.ff_b1));
    ff = g.gelu(ff);
    if (train) ff = g.dropout(ff, cfg_.dropout, *opts.dropout_rng);
    ff = g.add_rowvec(g.matmul(ff, g.param(store[layer.ff_w2], layer.ff_w2), s, cfg_.d_ff, d),
                      g.param(store[layer.ff_b2], layer.ff_b2));
    H = g.layer_norm(g.add(H2, ff), g.param(store[layer.ln3_g], layer.ln3_g),
                     g.param(store[layer.ln3_b], layer.ln3_b));
  }
  out.H = H;
  return out;
}

}  // namespace bdtf
