#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bdtf/preprocess.hpp"

namespace bdtf {

// One preprocessed battery: fixed-shape model input, normalized target, and provenance.
struct ProcessedSample {
  std::string battery_id;
  ModelInput input;
  Target target;
  double last_obs_soh = 0.0;  // smoothed SOH at cycle S (persistence baseline)
  i64 t_eol = 0;
  std::optional<i64> extrapolated_from;
  std::vector<i64> smoothed_onsets;
  std::vector<i64> unsmoothed_onsets;  // onsets skipped (no recovery / no anchors)
};

void save_sample(const ProcessedSample& sample, const std::string& path);
ProcessedSample load_sample(const std::string& path);

// Loads every *.sample.json under dir, sorted by filename.
std::vector<ProcessedSample> load_sample_dir(const std::string& dir);

}  // namespace bdtf
