#pragma once

#include <array>
#include <string>
#include <vector>

#include "bdtf/types.hpp"

namespace bdtf {

enum class ShapeFamily { superlinear, linear, sublinear };

const char* family_name(ShapeFamily f);
ShapeFamily family_from_name(const std::string& name);

// Deterministic synthetic-dataset description. `families` may be given explicitly per
// condition or as "mixed" (cycles through the three canonical shapes).
struct SynthSpec {
  std::uint64_t seed = 42;
  i64 n_conditions = 16;
  i64 batteries_per_condition = 4;
  std::vector<ShapeFamily> families;  // resolved to n_conditions entries
  std::array<i64, 2> life_range{150, 400};
  double noise_sd = 0.002;
  bool capacity_rise = true;
  i64 regeneration_events = 1;
  i64 samples_per_segment = 40;
  i64 fine_cycles = 110;  // cycles past this index use the coarse sample count
  i64 coarse_samples_per_segment = 8;
  i64 rest_samples = 2;
  double tau = 0.8;
  i64 embed_dim = 32;

  void validate() const;  // throws Error("InvalidSpec", ...)
  static SynthSpec load(const std::string& path);
  void save(const std::string& path) const;
};

AgingCondition generate_condition(const SynthSpec& spec, i64 index);

struct GeneratedBattery {
  BatteryRecord record;
  SohTrajectory truth;  // realized per-cycle SOH (noise included), with t_eol
  ShapeFamily family = ShapeFamily::linear;
  double fade_a = 0.0, fade_b = 0.0, fade_p = 1.0;
  i64 life = 0;
  // OCV model parameters, for interpretability oracles
  double ocv_v0 = 0.0, ocv_slope = 0.0, ocv_amp = 0.0, ocv_center = 0.0, ocv_width = 0.0;
};

GeneratedBattery generate_battery(const SynthSpec& spec, i64 condition_index, i64 battery_index);

// Synthetic open-circuit voltage curve used by the generator.
double synth_ocv(double soc, double v0, double slope, double amp, double center, double width);

// Writes one record file per battery into out_dir, plus ground_truth.json and
// embeddings.json (offline-embedding stand-in covering every condition).
struct SynthSummary {
  std::vector<std::string> record_paths;
  std::string ground_truth_path;
  std::string embeddings_path;
};
SynthSummary generate_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace bdtf
