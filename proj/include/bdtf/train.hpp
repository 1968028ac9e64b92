#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bdtf/embedder.hpp"
#include "bdtf/model.hpp"
#include "bdtf/sample_io.hpp"

namespace bdtf {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Per-sample masked MSE: sum(mask * (target - pred)^2) / O with O = sum(mask).
// Throws EmptyBatch when O == 0.
double masked_mse(const Tensor& pred, const Tensor& target, const Tensor& mask);

struct LossBreakdown {
  double pred = 0.0;
  double align = 0.0;
  double recover = 0.0;
  double total = 0.0;  // pred + lambda1*align + lambda2*recover
  i64 skipped_samples = 0;
};

// Resolves the z_ac input for a sample (nullptr when the config has no condition prior or
// uses the lookup path).
class EmbeddingSource {
 public:
  EmbeddingSource() = default;
  explicit EmbeddingSource(const ExternalEmbeddings* external) : external_(external) {}
  const std::vector<double>* resolve(const Forecaster& model, const ModelInput& input) const;

 private:
  const ExternalEmbeddings* external_ = nullptr;
};

// Forward-only batch loss (inference mode, no dropout). Throws EmptyBatch when every sample
// has an empty prediction mask.
LossBreakdown batch_loss(const Forecaster& model, const std::vector<const ProcessedSample*>& batch,
                         const EmbeddingSource& embeddings);

// Batch loss plus parameter gradients accumulated into model.params().grad, summed over
// samples in index order (bitwise deterministic for any thread count).
// dropout_seed != 0 enables dropout with a per-sample counter-derived stream.
LossBreakdown batch_loss_and_grad(Forecaster& model,
                                  const std::vector<const ProcessedSample*>& batch,
                                  const EmbeddingSource& embeddings, std::uint64_t dropout_seed);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& params);
  i64 steps_taken() const { return t_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  i64 t_ = 0;
};

// ---------------------------------------------------------------------------
// Fit loop
// ---------------------------------------------------------------------------

struct EpochStats {
  i64 epoch = 0;  // 1-based
  LossBreakdown train;
  double val_mape = 0.0;
};

struct FitResult {
  std::vector<Tensor> best_params;  // value snapshot at the best validation epoch
  i64 best_epoch = 0;
  double best_val_mape = 0.0;
  std::vector<EpochStats> history;
  bool diverged = false;
  std::string diagnostic;
};

// Adam + early stopping on validation MAPE (original SOH scale, macro over batteries).
// Deterministic given seed. On divergence the last finite parameters are restored and
// `diverged` is set. The best parameters are left installed in the model.
FitResult fit(Forecaster& model, const std::vector<ProcessedSample>& train_set,
              const std::vector<ProcessedSample>& val_set, const EmbeddingSource& embeddings,
              std::uint64_t seed,
              const std::function<void(const EpochStats&)>& on_epoch = nullptr);

// Validation MAPE helper (macro-averaged over samples).
double validation_mape(const Forecaster& model, const std::vector<ProcessedSample>& val_set,
                       const EmbeddingSource& embeddings);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckGroup {
  std::string name;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error = 0.0;
  bool pass = false;
  i64 loss_evaluations = 0;
};

// Central finite differences (default step 1e-5) for every element of every parameter group
// against the analytic gradients of the total loss. Dropout must be off (enforced).
GradCheckReport gradient_check(Forecaster& model, const std::vector<const ProcessedSample*>& batch,
                               const EmbeddingSource& embeddings, double tolerance,
                               double step = 1e-5);

// ---------------------------------------------------------------------------
// Random hyperparameter search
// ---------------------------------------------------------------------------

struct TrialResult {
  ModelConfig config;
  double val_mape = 0.0;
};

// Uniform sampling over the published space; ties go to the lowest trial index.
ModelConfig sample_search_space(const ModelConfig& base, Rng& rng);
// Lowest validation MAPE wins; exact ties resolve to the earliest trial.
int select_best_trial(const std::vector<TrialResult>& trials);
ModelConfig random_search(const ModelConfig& base, i64 budget, std::uint64_t seed,
                          const std::vector<ProcessedSample>& train_set,
                          const std::vector<ProcessedSample>& val_set,
                          const EmbeddingSource& embeddings,
                          std::vector<TrialResult>* trials = nullptr);

}  // namespace bdtf
