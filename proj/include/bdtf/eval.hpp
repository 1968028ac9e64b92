#pragma once

#include <map>
#include <string>
#include <vector>

#include "bdtf/sample_io.hpp"
#include "bdtf/tensor.hpp"

namespace bdtf {

// ---------------------------------------------------------------------------
// Metrics (original SOH scale, prediction-region cycles only)
// ---------------------------------------------------------------------------

struct Metrics {
  double mape_pct = 0.0;
  double mae = 0.0;
};

// Denormalizes prediction and target via tau and scores mask=1 positions.
// Throws NothingToScore when the mask is empty.
Metrics compute_metrics(const Tensor& y_hat_norm, const Target& target);

// Last-observed-SOH-forever baseline scored with the same rules.
Metrics persistence_metrics(double last_obs_soh, const Target& target);

// ---------------------------------------------------------------------------
// Aging-condition-exclusive splits
// ---------------------------------------------------------------------------

enum class Split { train, val, test };

struct SplitPlan {
  std::map<std::string, Split> assignment;  // condition key -> split
  std::uint64_t seed = 0;
  std::string mode;  // "random" or "leave-one-out"

  Split of(const std::string& key) const;
  std::vector<std::string> keys_in(Split s) const;
};

// Shuffles condition keys by seed and assigns 6:2:2 (largest-remainder rounding; sizes land
// within one condition of the exact ratio). Throws InsufficientConditions below 3 conditions.
SplitPlan split_by_condition(const std::vector<std::string>& condition_keys,
                             const std::array<double, 3>& ratios, std::uint64_t seed);

// One condition held out for test, 25% (ceil) of the rest for validation.
SplitPlan split_leave_one_out(const std::vector<std::string>& condition_keys, std::uint64_t seed);

// Battery-level training subset: keeps ceil(fraction*n) train batteries, val/test untouched.
// Returns the kept battery ids (train split only).
std::vector<std::string> subsample_training(const std::vector<ProcessedSample>& samples,
                                            const SplitPlan& plan, double fraction,
                                            std::uint64_t seed);

// Partition samples by the plan; subset (when nonempty) limits the train side.
struct SplitSamples {
  std::vector<ProcessedSample> train, val, test;
};
SplitSamples partition_samples(const std::vector<ProcessedSample>& samples, const SplitPlan& plan,
                               const std::vector<std::string>& kept_train_ids = {});

// Throws Error("SplitIntegrity") when a test/val condition leaks into train.
void check_condition_exclusivity(const SplitSamples& split);

// ---------------------------------------------------------------------------
// Differential voltage analysis
// ---------------------------------------------------------------------------

// Central-difference dV/dQ on a charge segment, smoothed by a 5-point moving average,
// reported on the SOC grid. Throws InvalidSegment on non-monotone capacity.
std::vector<double> compute_dva(const std::vector<double>& voltage,
                                const std::vector<double>& capacity);

}  // namespace bdtf
