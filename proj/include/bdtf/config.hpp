#pragma once

#include <cstdint>
#include <string>

namespace bdtf {

// Model and training configuration. Loaded from a flat JSON object; unknown keys are
// rejected so typos never silently fall back to defaults.
struct ModelConfig {
  // architecture
  std::int64_t d = 64;        // token embedding dim
  std::int64_t L = 300;       // per-cycle resampled length (even)
  std::int64_t S_max = 100;   // padded early-cycle count
  std::int64_t P = 30;        // patch length == stride of the SOC-axis conv
  std::int64_t h = 4;         // attention heads
  std::int64_t s_bar = 8;     // learnable query count
  std::int64_t L_de = 2;      // decoder layers
  std::int64_t L_intra = 2;   // intra-cycle encoder blocks
  std::int64_t N_mem = 64;    // memory slots
  std::int64_t d_ff = 64;     // decoder-layer / intra-cycle FFN width
  std::int64_t d_ffs = 64;    // auxiliary-net FFN width
  std::int64_t d_enc = 64;    // condition-embedding input dim
  std::int64_t T_max = 5000;  // forecast horizon

  // training
  double lambda1 = 1.0;  // alignment loss weight
  double lambda2 = 1.0;  // recovery loss weight
  double dropout = 0.1;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::int64_t batch_size = 64;
  std::int64_t epochs = 300;
  std::int64_t patience = 30;

  // ablation flags
  bool socview = true;
  bool mdpm = true;
  bool acdecoder = true;
  bool acattention = true;
  bool acquery = true;
  bool llm_embedder = false;  // lookup embedder is the built-in default

  std::int64_t soc_tokens() const { return (L - P) / P + 1; }  // M
  bool use_acquery() const { return acdecoder && acquery; }
  bool use_acattention() const { return acdecoder && acattention; }
  // E_hat exists iff anything consumes it
  bool use_condition_prior() const { return use_acquery() || use_acattention(); }

  // Throws Error("InvalidConfig", ...) when an invariant fails.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  static ModelConfig load(const std::string& path);
  void save(const std::string& path) const;

  // Stable hash of the canonical JSON dump; feeds init seeding and manifests.
  std::uint64_t fingerprint() const;
};

}  // namespace bdtf
