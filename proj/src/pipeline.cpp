#include "bdtf/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "bdtf/error.hpp"
#include "bdtf/record_io.hpp"

namespace bdtf {

using nlohmann::json;
namespace fs = std::filesystem;

CleaningOutcome clean_trajectory(const std::vector<double>& soh_raw, const OnsetInputs& inputs,
                                 const SmoothingParams& params) {
  CleaningOutcome out;
  out.soh = clip_spikes(soh_raw, params);
  const std::vector<i64> onsets = detect_artifact_onsets(out.soh, inputs, params);
  i64 covered_until = 0;
  for (i64 k_s : onsets) {
    if (k_s <= covered_until) continue;  // already inside a smoothed region
    const i64 k_e = find_recovery_point(out.soh, k_s, params.epsilon, params.W);
    if (k_e > static_cast<i64>(out.soh.size())) {
      out.unsmoothed_onsets.push_back(k_s);  // open-ended artifact, left as measured
      continue;
    }
    try {
      out.soh = smooth_region_pchip(out.soh, k_s, k_e, params.M_anchor);
      out.smoothed_onsets.push_back(k_s);
      covered_until = k_e;
    } catch (const Error&) {
      out.unsmoothed_onsets.push_back(k_s);
    }
  }
  return out;
}

std::variant<Excluded, ProcessedSample> preprocess_record(const BatteryRecord& record,
                                                          const PreprocessOptions& options,
                                                          const OnsetInputs& inputs) {
  const std::vector<std::string> violations = validate_record(record);
  if (!violations.empty()) return Excluded{"invalid record: " + violations.front()};

  const SohTrajectory raw = compute_soh_series(record);
  const CleaningOutcome cleaned = clean_trajectory(raw.soh, inputs, options.smoothing);

  const auto filtered = filter_and_extrapolate(cleaned.soh, record.tau, options.smoothing);
  if (std::holds_alternative<Excluded>(filtered)) return std::get<Excluded>(filtered);
  const SohTrajectory& trajectory = std::get<SohTrajectory>(filtered);

  i64 S = options.requested_S;
  if (S < 0) S = std::min<i64>(options.config.S_max, static_cast<i64>(record.cycles.size()));
  if (S < 1) return Excluded{"no usable early cycles"};
  if (*trajectory.t_eol <= S)
    return Excluded{"NothingToPredict: EOL at cycle " + std::to_string(*trajectory.t_eol) +
                    " falls inside the observation window"};

  ProcessedSample sample;
  sample.battery_id = record.battery_id;
  sample.input = build_model_input(record, S, options.config);
  sample.target = build_target(trajectory, S, record.tau, options.config.T_max);
  sample.last_obs_soh = trajectory.at(S);
  sample.t_eol = *trajectory.t_eol;
  sample.extrapolated_from = trajectory.extrapolated_from;
  sample.smoothed_onsets = cleaned.smoothed_onsets;
  sample.unsmoothed_onsets = cleaned.unsmoothed_onsets;
  return sample;
}

PreprocessReport preprocess_directory(const std::string& records_dir, const std::string& out_dir,
                                      const PreprocessOptions& options,
                                      const std::string& plan_mode, std::uint64_t split_seed) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(records_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() == ".json" && name != "ground_truth.json" &&
        name != "embeddings.json" && name != "manifest.json" &&
        name.find(".sample.") == std::string::npos)
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error("IOError", "no record files under " + records_dir);

  std::vector<BatteryRecord> records;
  records.reserve(paths.size());
  for (const auto& p : paths) records.push_back(load_record(p));

  // Percentile thresholds come from the training split of the same plan the trainer will use.
  std::vector<std::string> keys;
  for (const auto& r : records) keys.push_back(r.condition.key());
  SplitPlan plan;
  if (plan_mode == "leave-one-out")
    plan = split_leave_one_out(keys, split_seed);
  else
    plan = split_by_condition(keys, {6.0, 2.0, 2.0}, split_seed);

  std::vector<double> training_deltas;
  for (const auto& r : records) {
    if (plan.of(r.condition.key()) != Split::train) continue;
    const std::vector<double> clipped =
        clip_spikes(compute_soh_series(r).soh, options.smoothing);
    const std::vector<double> d = soh_deltas(clipped);
    training_deltas.insert(training_deltas.end(), d.begin(), d.end());
  }

  fs::create_directories(out_dir);
  PreprocessReport report;
  report.threshold_plan = plan;
  report.training_delta_count = static_cast<i64>(training_deltas.size());

  for (const auto& record : records) {
    OnsetInputs inputs;
    inputs.training_deltas = training_deltas;
    for (const auto& c : record.cycles) inputs.cycle_start_s.push_back(c.timestamps_s.front());
    try {
      const auto outcome = preprocess_record(record, options, inputs);
      if (std::holds_alternative<Excluded>(outcome)) {
        report.exclusions[record.battery_id] = std::get<Excluded>(outcome).reason;
        continue;
      }
      const ProcessedSample& sample = std::get<ProcessedSample>(outcome);
      const std::string path = out_dir + "/" + record.battery_id + ".sample.json";
      save_sample(sample, path);
      report.processed_ids.push_back(record.battery_id);
      report.sample_paths.push_back(path);
    } catch (const Error& e) {
      report.exclusions[record.battery_id] = e.what();
    }
  }
  return report;
}

void save_smoothing_params(const SmoothingParams& p, const std::string& path) {
  const char* method = p.onset_method == OnsetMethod::rpt
                           ? "rpt"
                           : (p.onset_method == OnsetMethod::time_gap ? "time_gap" : "percentile");
  json j{{"spike_drop_threshold", p.spike_drop_threshold},
         {"spike_recovery_band", p.spike_recovery_band},
         {"filter_margin", p.filter_margin},
         {"extrap_window", p.extrap_window},
         {"onset_method", method},
         {"gamma_gap_hours", p.gamma_gap_s / 3600.0},
         {"epsilon", p.epsilon},
         {"W", p.W},
         {"M_anchor", p.M_anchor}};
  if (p.gamma_plus) j["gamma_plus"] = *p.gamma_plus;
  if (p.gamma_minus) j["gamma_minus"] = *p.gamma_minus;
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write smoothing params: " + path);
  out << j.dump(2) << "\n";
}

SmoothingParams load_smoothing_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open smoothing params: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("InvalidConfig", std::string("smoothing params are not valid JSON: ") + e.what());
  }
  SmoothingParams p;
  if (j.contains("spike_drop_threshold"))
    p.spike_drop_threshold = j.at("spike_drop_threshold").get<double>();
  if (j.contains("spike_recovery_band"))
    p.spike_recovery_band = j.at("spike_recovery_band").get<double>();
  if (j.contains("filter_margin")) p.filter_margin = j.at("filter_margin").get<double>();
  if (j.contains("extrap_window")) p.extrap_window = j.at("extrap_window").get<i64>();
  if (j.contains("onset_method")) {
    const std::string m = j.at("onset_method").get<std::string>();
    if (m == "rpt")
      p.onset_method = OnsetMethod::rpt;
    else if (m == "time_gap")
      p.onset_method = OnsetMethod::time_gap;
    else if (m == "percentile")
      p.onset_method = OnsetMethod::percentile;
    else
      throw Error("InvalidConfig", "unknown onset method: " + m);
  }
  if (j.contains("gamma_gap_hours")) p.gamma_gap_s = j.at("gamma_gap_hours").get<double>() * 3600.0;
  if (j.contains("gamma_plus")) p.gamma_plus = j.at("gamma_plus").get<double>();
  if (j.contains("gamma_minus")) p.gamma_minus = j.at("gamma_minus").get<double>();
  if (j.contains("epsilon")) p.epsilon = j.at("epsilon").get<double>();
  if (j.contains("W")) p.W = j.at("W").get<i64>();
  if (j.contains("M_anchor")) p.M_anchor = j.at("M_anchor").get<i64>();
  if (p.spike_drop_threshold <= 0.0 || p.filter_margin <= 0.0 || p.epsilon <= 0.0 || p.W < 1 ||
      p.M_anchor < 2 || p.extrap_window < 2 || p.gamma_gap_s <= 0.0)
    throw Error("InvalidConfig", "smoothing params out of range");
  return p;
}

}  // namespace bdtf
