#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "bdtf/config.hpp"
#include "bdtf/eval.hpp"
#include "bdtf/preprocess.hpp"
#include "bdtf/sample_io.hpp"

namespace bdtf {

struct PreprocessOptions {
  ModelConfig config;         // S_max, L, T_max drive the sample shapes
  SmoothingParams smoothing;
  i64 requested_S = -1;       // -1 => min(S_max, available cycles)
};

// Full cleaning pipeline for one battery: SOH, spike clipping, onset smoothing, filtering /
// EOL extrapolation, model input + target construction.
std::variant<Excluded, ProcessedSample> preprocess_record(const BatteryRecord& record,
                                                          const PreprocessOptions& options,
                                                          const OnsetInputs& inputs);

// Cleaned (clipped + artifact-smoothed) trajectory only, with smoothing provenance.
struct CleaningOutcome {
  std::vector<double> soh;
  std::vector<i64> smoothed_onsets;
  std::vector<i64> unsmoothed_onsets;
};
CleaningOutcome clean_trajectory(const std::vector<double>& soh_raw, const OnsetInputs& inputs,
                                 const SmoothingParams& params);

struct PreprocessReport {
  std::vector<std::string> processed_ids;
  std::map<std::string, std::string> exclusions;  // battery id -> reason
  SplitPlan threshold_plan;                       // split used for percentile thresholds
  i64 training_delta_count = 0;
  std::vector<std::string> sample_paths;
};

// Directory-level runner: loads every *.json record under records_dir, derives percentile
// thresholds from the training split of `plan_mode` @ split_seed, writes one sample file per
// surviving battery into out_dir. Rerun with identical inputs is byte-identical.
PreprocessReport preprocess_directory(const std::string& records_dir, const std::string& out_dir,
                                      const PreprocessOptions& options,
                                      const std::string& plan_mode, std::uint64_t split_seed);

void save_smoothing_params(const SmoothingParams& p, const std::string& path);
SmoothingParams load_smoothing_params(const std::string& path);

}  // namespace bdtf
