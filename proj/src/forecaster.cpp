#include "bdtf/error.hpp"
#include "bdtf/model.hpp"

namespace bdtf {

Forecaster::Forecaster(ModelConfig cfg, EmbedVocab vocab, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      vocab_(std::move(vocab)),
      seed_(seed),
      store_(mix_seed(seed, cfg_.fingerprint())) {
  cfg_.validate();
  if (cfg_.use_condition_prior() && !cfg_.llm_embedder)
    lookup_ = std::make_unique<LookupEmbedder>(vocab_, cfg_.d_enc, store_);
  decoder_ = std::make_unique<ConditionDecoder>(cfg_, store_);
  encoder_ = std::make_unique<DualViewEncoder>(cfg_, store_);
  if (cfg_.mdpm) memory_ = std::make_unique<PatternMemory>(cfg_, store_);
  head_ = std::make_unique<PredictionHead>(cfg_, store_);
}

Forecaster::Output Forecaster::forward(Graph& g, const ModelInput& input,
                                       const std::vector<double>* z_external,
                                       const ForwardOptions& opts) const {
  Output out;

  int E_hat = -1;
  if (cfg_.use_condition_prior()) {
    int z = -1;
    if (cfg_.llm_embedder) {
      if (!z_external) throw Error("MissingEmbedding", "external embedding required by config");
      if (static_cast<i64>(z_external->size()) != cfg_.d_enc)
        throw Error("DimensionMismatch", "external embedding length disagrees with d_enc");
      z = g.leaf(Tensor({1, cfg_.d_enc}, *z_external));
    } else {
      z = lookup_->embed(g, store_, condition_from_key(input.condition_key));
    }
    E_hat = decoder_->make_condition_prior(g, z, store_).E_hat;
  }

  const DualViewEncoder::Output enc = encoder_->forward(g, input, store_, opts);

  const int Qg = decoder_->generic_queries(g, store_);
  const int X_de = cfg_.use_acquery() ? g.add(Qg, E_hat) : Qg;
  const int E_attn = cfg_.use_acattention() ? E_hat : -1;
  const ConditionDecoder::Output dec =
      decoder_->decode(g, X_de, enc.tokens, E_attn, enc.key_mask, store_, opts);
  out.dec_H = dec.H;
  out.cross_attention = dec.final_cross_attention;

  int h_mem = -1;
  if (cfg_.mdpm) {
    const int q = memory_->memory_query(g, dec.H, store_);
    out.retrieval = memory_->retrieve_top2(g, q, store_);
    h_mem = out.retrieval.h_mem;
  }
  out.h_mem = h_mem;

  const int H_bar = head_->project(g, dec.H, store_);
  const PredictionHead::Output pred = head_->fuse_predict(g, H_bar, h_mem, store_);
  out.y_hat = pred.y_hat;
  out.beta = pred.beta;
  return out;
}

int Forecaster::encode_trajectory(Graph& g, const Tensor& y_masked) const {
  if (!memory_) throw Error("InvalidConfig", "trajectory encoder needs the memory module");
  return memory_->encode_trajectory(g, y_masked, store_);
}

int Forecaster::decode_trajectory(Graph& g, int e_trajectory) const {
  if (!memory_) throw Error("InvalidConfig", "trajectory decoder needs the memory module");
  return memory_->decode_trajectory(g, e_trajectory, store_);
}

Tensor Forecaster::decode_prototype(i64 slot) const {
  if (!memory_) throw Error("InvalidConfig", "prototypes need the memory module");
  return memory_->decode_slot(slot, store_);
}

}  // namespace bdtf
