#pragma once

#include <memory>
#include <string>

#include "bdtf/eval.hpp"
#include "bdtf/model.hpp"
#include "bdtf/train.hpp"

namespace bdtf {

// Versioned checkpoint: config + vocab + parameters + training history + split plan.
struct Checkpoint {
  ModelConfig config;
  EmbedVocab vocab;
  std::uint64_t seed = 0;
  i64 best_epoch = 0;
  double best_val_mape = 0.0;
  std::vector<EpochStats> history;
  SplitPlan plan;
  bool diverged = false;
  std::string diagnostic;
  std::vector<std::pair<std::string, Tensor>> parameters;  // name -> values

  static Checkpoint capture(const Forecaster& model, const FitResult& fit, const SplitPlan& plan);
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the model from a checkpoint and installs the stored parameter values.
std::unique_ptr<Forecaster> restore_model(const Checkpoint& ckpt);

}  // namespace bdtf
