#pragma once

#include <string>
#include <vector>

#include "bdtf/checkpoint.hpp"
#include "bdtf/eval.hpp"
#include "bdtf/train.hpp"

namespace bdtf {

enum class AblationVariant {
  full,
  no_socview,
  no_mdpm,
  no_acdecoder,
  no_acattention,
  no_acquery,
  no_llm,
};

const char* variant_name(AblationVariant v);
AblationVariant variant_from_name(const std::string& name);
const std::vector<AblationVariant>& all_variants();

// Flips the variant's flag(s) on a copy of the full-model config.
ModelConfig apply_variant(const ModelConfig& full_config, AblationVariant v);

struct BatteryMetrics {
  std::string battery_id;
  double mape_pct = 0.0;
  double mae = 0.0;
};

struct EvalReport {
  std::vector<BatteryMetrics> per_battery;
  double mape_mean = 0.0, mape_sd = 0.0;
  double mae_mean = 0.0, mae_sd = 0.0;
  double persistence_mape_mean = 0.0;
  double persistence_mae_mean = 0.0;
};

// Macro-averaged metrics over a sample set, with the persistence yardstick.
EvalReport evaluate_samples(const Forecaster& model, const std::vector<ProcessedSample>& samples,
                            const EmbeddingSource& embeddings);

struct AblationReport {
  AblationVariant variant = AblationVariant::full;
  std::uint64_t param_checksum = 0;
  i64 param_scalars = 0;
  int param_tensors = 0;
  EvalReport test;
  LossBreakdown last_train_loss;
  i64 epochs_ran = 0;
};

// Trains the variant on the split and scores the test side.
AblationReport run_ablation(AblationVariant v, const ModelConfig& full_config,
                            const SplitSamples& split, const EmbeddingSource& embeddings,
                            std::uint64_t seed);

}  // namespace bdtf
