#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bdtf/config.hpp"
#include "bdtf/embedder.hpp"
#include "bdtf/graph.hpp"
#include "bdtf/params.hpp"
#include "bdtf/preprocess.hpp"

namespace bdtf {

struct ForwardOptions {
  Rng* dropout_rng = nullptr;  // nullptr => inference (dropout off)
  bool capture_attention = false;
};

// --------------------------------------------------------------------------
// Dual-view encoder: per-cycle temporal tokens + per-SOC-interval tokens.
// --------------------------------------------------------------------------
class DualViewEncoder {
 public:
  DualViewEncoder(const ModelConfig& cfg, ParamStore& store);

  struct Output {
    int tokens = -1;                       // [(S_max [+ M]) x d], positional encoding added
    std::vector<std::uint8_t> key_mask;    // 1 = attendable
  };
  Output forward(Graph& g, const ModelInput& input, const ParamStore& store,
                 const ForwardOptions& opts) const;

  // Strided SOC-axis convolution alone (exposed for tests): X_i as [L x 4] -> [M x d].
  Tensor soc_patchify(const Tensor& cycle, const ParamStore& store) const;

 private:
  ModelConfig cfg_;
  // SOC view
  int conv_w_ = -1, conv_b_ = -1;
  int te_w1_ = -1, te_b1_ = -1, te_w2_ = -1, te_b2_ = -1;
  // temporal view
  int cp_w_ = -1, cp_b_ = -1;
  struct IntraBlock {
    int w1, b1, w2, b2, ln_g, ln_b;
  };
  std::vector<IntraBlock> intra_;
  int f_w_ = -1, f_b_ = -1;
  Tensor pos_;  // fixed sinusoidal positional encoding
  std::shared_ptr<std::vector<i64>> im2col_idx_;
  std::shared_ptr<std::vector<i64>> interval_idx_;
};

// Standard sinusoidal positional encoding table [len x d].
Tensor sinusoidal_positions(i64 len, i64 d);

// --------------------------------------------------------------------------
// Condition-aware decoder: condition-informed queries + query-modulated attention.
// --------------------------------------------------------------------------
class ConditionDecoder {
 public:
  ConditionDecoder(const ModelConfig& cfg, ParamStore& store);

  struct Prior {
    int e_ac = -1;   // [1 x d]
    int E_hat = -1;  // [s_bar x d]
  };
  // z_ac: [1 x d_enc] node. Only registered/callable when the config keeps the prior.
  Prior make_condition_prior(Graph& g, int z_ac, const ParamStore& store) const;

  int generic_queries(Graph& g, const ParamStore& store) const;  // Q_g node [s_bar x d]

  struct Output {
    int H = -1;                    // [s_bar x d]
    Tensor final_cross_attention;  // [h x s_bar x n_k] when captured, else empty
  };
  // E_hat < 0 runs standard (unmodulated) attention everywhere.
  Output decode(Graph& g, int X_de, int tokens, int E_hat,
                const std::vector<std::uint8_t>& key_mask, const ParamStore& store,
                const ForwardOptions& opts) const;

  struct AttnParams {
    int wq, wk, wv, wo;
  };
  // Scaled dot-product multi-head attention with optional additive query modulation.
  int attention(Graph& g, const AttnParams& p, int Q, int K, int V, int E_hat,
                const std::vector<std::uint8_t>* key_mask, const ParamStore& store,
                const ForwardOptions& opts, Tensor* capture) const;

 private:
  ModelConfig cfg_;
  int qg_ = -1;
  int w1_ = -1, b1_ = -1, w2_ = -1, b2_ = -1;
  struct Layer {
    AttnParams self_attn, cross_attn;
    int ff_w1, ff_b1, ff_w2, ff_b2;
    int ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
  };
  std::vector<Layer> layers_;
};

// --------------------------------------------------------------------------
// Degradation-pattern memory: prototype slots, top-2 cosine retrieval, trajectory
// autoencoder, and the gated prediction head.
// --------------------------------------------------------------------------
struct RetrievalResult {
  std::array<i64, 2> indices{0, 0};
  std::array<double, 2> alpha{0.0, 0.0};
  std::vector<double> similarities;  // all N_mem cosine scores
  int h_mem = -1;                    // [1 x d] node
};

class PatternMemory {
 public:
  PatternMemory(const ModelConfig& cfg, ParamStore& store);

  int memory_query(Graph& g, int H, const ParamStore& store) const;  // [1 x d]
  // Throws DegenerateQuery on a zero-norm query.
  RetrievalResult retrieve_top2(Graph& g, int q_mem, const ParamStore& store) const;
  int encode_trajectory(Graph& g, const Tensor& y_masked, const ParamStore& store) const;
  int decode_trajectory(Graph& g, int e_trajectory, const ParamStore& store) const;
  // Prototype curve for one slot (normalized space), via the trajectory decoder.
  Tensor decode_slot(i64 slot, const ParamStore& store) const;

  int omega_param() const { return omega_; }
  // Reinitializes slots whose norm collapsed below 1e-8; deterministic given (seed, step).
  static void renorm_slots(Param& omega, std::uint64_t seed, i64 step);

 private:
  ModelConfig cfg_;
  int omega_ = -1;
  int q_w1_ = -1, q_b1_ = -1, q_w2_ = -1, q_b2_ = -1;
  int te_w1_ = -1, te_b1_ = -1, te_w2_ = -1, te_b2_ = -1, te_w3_ = -1, te_b3_ = -1;
  int td_w1_ = -1, td_b1_ = -1, td_w2_ = -1, td_b2_ = -1, td_w3_ = -1, td_b3_ = -1;
};

class PredictionHead {
 public:
  PredictionHead(const ModelConfig& cfg, ParamStore& store);

  int project(Graph& g, int H, const ParamStore& store) const;  // H_bar [1 x d]
  struct Output {
    int y_hat = -1;  // [1 x T_max]
    int beta = -1;   // [1 x d] gate, -1 without memory
  };
  Output fuse_predict(Graph& g, int H_bar, int h_mem, const ParamStore& store) const;

 private:
  ModelConfig cfg_;
  int w3_ = -1, b3_ = -1, w4_ = -1, b4_ = -1;
  int g_w1_ = -1, g_b1_ = -1, g_w2_ = -1, g_b2_ = -1;
  int head_w_ = -1, head_b_ = -1;
};

// --------------------------------------------------------------------------
// Full forecaster.
// --------------------------------------------------------------------------
class Forecaster {
 public:
  Forecaster(ModelConfig cfg, EmbedVocab vocab, std::uint64_t seed);

  struct Output {
    int y_hat = -1;  // [1 x T_max]
    int dec_H = -1;
    int h_mem = -1;
    int beta = -1;
    RetrievalResult retrieval;
    Tensor cross_attention;  // [h x s_bar x n_k] when captured
  };
  // z_external supplies the offline language embedding when cfg.llm_embedder is set.
  Output forward(Graph& g, const ModelInput& input, const std::vector<double>* z_external,
                 const ForwardOptions& opts) const;

  int encode_trajectory(Graph& g, const Tensor& y_masked) const;
  int decode_trajectory(Graph& g, int e_trajectory) const;
  Tensor decode_prototype(i64 slot) const;  // normalized-space curve [T_max]

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const EmbedVocab& vocab() const { return vocab_; }
  std::uint64_t seed() const { return seed_; }
  bool has_memory() const { return cfg_.mdpm; }
  const PatternMemory* memory() const { return memory_ ? memory_.get() : nullptr; }

 private:
  ModelConfig cfg_;
  EmbedVocab vocab_;
  std::uint64_t seed_;
  ParamStore store_;
  std::unique_ptr<LookupEmbedder> lookup_;
  std::unique_ptr<ConditionDecoder> decoder_;
  std::unique_ptr<DualViewEncoder> encoder_;
  std::unique_ptr<PatternMemory> memory_;
  std::unique_ptr<PredictionHead> head_;
};

}  // namespace bdtf
