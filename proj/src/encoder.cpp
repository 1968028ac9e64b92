#include <cmath>

#include "bdtf/error.hpp"
#include "bdtf/model.hpp"

namespace bdtf {

Tensor sinusoidal_positions(i64 len, i64 d) {
  Tensor p({len, d});
  for (i64 pos = 0; pos < len; ++pos) {
    for (i64 i = 0; i < d; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      p(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return p;
}

DualViewEncoder::DualViewEncoder(const ModelConfig& cfg, ParamStore& store) : cfg_(cfg) {
  const i64 d = cfg.d, L = cfg.L, P = cfg.P, S = cfg.S_max;
  const i64 M = cfg.soc_tokens();

  if (cfg.socview) {
    conv_w_ = store.add_glorot("encoder.soc.conv_w", 4 * P, d, {4 * P, d});
    conv_b_ = store.add_zeros("encoder.soc.conv_b", {d});
    te_w1_ = store.add_glorot("encoder.soc.temp_w1", S * d, cfg.d_ffs, {S * d, cfg.d_ffs});
    te_b1_ = store.add_zeros("encoder.soc.temp_b1", {cfg.d_ffs});
    te_w2_ = store.add_glorot("encoder.soc.temp_w2", cfg.d_ffs, d, {cfg.d_ffs, d});
    te_b2_ = store.add_zeros("encoder.soc.temp_b2", {d});

    // im2col over the [S x L x 4] layout; row (s, m), column (c, p).
    im2col_idx_ = std::make_shared<std::vector<i64>>();
    im2col_idx_->reserve(static_cast<size_t>(S * M * 4 * P));
    for (i64 s = 0; s < S; ++s)
      for (i64 m = 0; m < M; ++m)
        for (i64 c = 0; c < 4; ++c)
          for (i64 p = 0; p < P; ++p)
            im2col_idx_->push_back((s * L + (m * P + p)) * 4 + c);

    // regroup conv output rows (s, m) into one row per interval m, flattened s-major
    interval_idx_ = std::make_shared<std::vector<i64>>();
    interval_idx_->reserve(static_cast<size_t>(M * S * d));
    for (i64 m = 0; m < M; ++m)
      for (i64 s = 0; s < S; ++s)
        for (i64 j = 0; j < d; ++j) interval_idx_->push_back((s * M + m) * d + j);
  }

  cp_w_ = store.add_glorot("encoder.cyclepatch_w", 4 * L, d, {4 * L, d});
  cp_b_ = store.add_zeros("encoder.cyclepatch_b", {d});
  for (i64 b = 0; b < cfg.L_intra; ++b) {
    const std::string base = "encoder.intra" + std::to_string(b);
    IntraBlock blk;
    blk.w1 = store.add_glorot(base + ".w1", d, cfg.d_ff, {d, cfg.d_ff});
    blk.b1 = store.add_zeros(base + ".b1", {cfg.d_ff});
    blk.w2 = store.add_glorot(base + ".w2", cfg.d_ff, d, {cfg.d_ff, d});
    blk.b2 = store.add_zeros(base + ".b2", {d});
    blk.ln_g = store.add_ones(base + ".ln_g", {d});
    blk.ln_b = store.add_zeros(base + ".ln_b", {d});
    intra_.push_back(blk);
  }
  f_w_ = store.add_glorot("encoder.descriptor_w", 2, d, {2, d});
  f_b_ = store.add_zeros("encoder.descriptor_b", {d});

  pos_ = sinusoidal_positions(S + (cfg.socview ? M : 0), d);
}

DualViewEncoder::Output DualViewEncoder::forward(Graph& g, const ModelInput& input,
                                                 const ParamStore& store,
                                                 const ForwardOptions& opts) const {
  const i64 d = cfg_.d, L = cfg_.L, S = cfg_.S_max;
  const i64 M = cfg_.soc_tokens();
  const bool train = opts.dropout_rng != nullptr && cfg_.dropout > 0.0;

  // [S x L x 4] shares its layout with the [S x 4L] patch matrix
  const int X = g.leaf(Tensor({S, 4 * L}, input.X.data));
  const int Xf = g.leaf(Tensor({S, 2}, input.X_f.data));

  // temporal view
  int H = g.add_rowvec(g.matmul(X, g.param(store[cp_w_], cp_w_), S, 4 * L, d),
                       g.param(store[cp_b_], cp_b_));
  for (const IntraBlock& blk : intra_) {
    int z = g.add_rowvec(g.matmul(H, g.param(store[blk.w1], blk.w1), S, d, cfg_.d_ff),
                         g.param(store[blk.b1], blk.b1));
    z = g.gelu(z);
    z = g.add_rowvec(g.matmul(z, g.param(store[blk.w2], blk.w2), S, cfg_.d_ff, d),
                     g.param(store[blk.b2], blk.b2));
    H = g.layer_norm(g.add(H, z), g.param(store[blk.ln_g], blk.ln_g),
                     g.param(store[blk.ln_b], blk.ln_b));
    if (train) H = g.dropout(H, cfg_.dropout, *opts.dropout_rng);
  }
  const int injected = g.add_rowvec(g.matmul(Xf, g.param(store[f_w_], f_w_), S, 2, d),
                                    g.param(store[f_b_], f_b_));
  const int T_temporal = g.add(H, injected);

  int tokens = T_temporal;
  if (cfg_.socview) {
    const int cols = g.gather(X, im2col_idx_, {S * M, 4 * cfg_.P});
    int Z = g.add_rowvec(g.matmul(cols, g.param(store[conv_w_], conv_w_), S * M, 4 * cfg_.P, d),
                         g.param(store[conv_b_], conv_b_));
    const int Zm = g.gather(Z, interval_idx_, {M, S * d});
    int soc = g.add_rowvec(g.matmul(Zm, g.param(store[te_w1_], te_w1_), M, S * d, cfg_.d_ffs),
                           g.param(store[te_b1_], te_b1_));
    soc = g.gelu(soc);
    soc = g.add_rowvec(g.matmul(soc, g.param(store[te_w2_], te_w2_), M, cfg_.d_ffs, d),
                       g.param(store[te_b2_], te_b2_));
    if (train) soc = g.dropout(soc, cfg_.dropout, *opts.dropout_rng);
    tokens = g.concat({T_temporal, soc}, {S + M, d});
  }
  tokens = g.add(tokens, g.leaf(pos_));

  Output out;
  out.tokens = tokens;
  out.key_mask.assign(static_cast<size_t>(S + (cfg_.socview ? M : 0)), 1);
  for (i64 i = 0; i < S; ++i) out.key_mask[static_cast<size_t>(i)] = input.cycle_mask[static_cast<size_t>(i)];
  return out;
}

Tensor DualViewEncoder::soc_patchify(const Tensor& cycle, const ParamStore& store) const {
  if (!cfg_.socview) throw Error("InvalidConfig", "SOC view is disabled");
  const i64 P = cfg_.P, d = cfg_.d;
  const i64 M = cfg_.soc_tokens();
  const Tensor& w = store[conv_w_].value;
  const Tensor& b = store[conv_b_].value;
  Tensor out({M, d});
  for (i64 m = 0; m < M; ++m)
    for (i64 j = 0; j < d; ++j) {
      double acc = b(j);
      for (i64 c = 0; c < 4; ++c)
        for (i64 p = 0; p < P; ++p) acc += cycle(m * P + p, c) * w(c * P + p, j);
      out(m, j) = acc;
    }
  return out;
}

}  // namespace bdtf
