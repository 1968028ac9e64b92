#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bdtf/pipeline.hpp"
#include "bdtf/record_io.hpp"
#include "bdtf/synth.hpp"

using namespace bdtf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cleaning restores an injected dip and leaves the rest bit-identical") {
  // slowly decaying baseline with a 6-cycle artifact dip
  const double slope = 0.0004;
  std::vector<double> base;
  for (i64 n = 1; n <= 300; ++n) base.push_back(1.0 - slope * static_cast<double>(n));
  std::vector<double> dipped = base;
  const i64 k_s = 100, dip_end = 105;
  for (i64 n = k_s; n <= dip_end; ++n) dipped[static_cast<size_t>(n - 1)] -= 0.06;

  SmoothingParams p;  // percentile onsets, eps 0.5%, W 5, M 5
  OnsetInputs inputs;
  inputs.training_deltas = soh_deltas(base);
  // pad both tails so the 1%/99% thresholds clear the artifact-free deltas
  for (int k = 0; k < 4; ++k) {
    inputs.training_deltas.push_back(-0.002);
    inputs.training_deltas.push_back(0.002);
  }

  const CleaningOutcome out = clean_trajectory(dipped, inputs, p);
  REQUIRE(out.smoothed_onsets.size() == 1);
  CHECK(out.smoothed_onsets[0] == k_s);
  CHECK(out.unsmoothed_onsets.empty());

  const i64 k_e = find_recovery_point(dipped, k_s, p.epsilon, p.W);
  CHECK(k_e == dip_end + 1);
  for (i64 n = 1; n <= 300; ++n) {
    const double got = out.soh[static_cast<size_t>(n - 1)];
    if (n >= k_s && n <= k_e) {
      CHECK(std::abs(got - base[static_cast<size_t>(n - 1)]) < 0.005);  // within 0.5% SOH
    } else {
      CHECK(got == dipped[static_cast<size_t>(n - 1)]);  // bit-identical outside the region
    }
  }
}

TEST_CASE("open-ended artifacts are reported, not smoothed") {
  std::vector<double> soh;
  for (i64 n = 1; n <= 60; ++n) soh.push_back(1.0 - 0.0004 * static_cast<double>(n));
  for (i64 n = 40; n <= 60; ++n) soh[static_cast<size_t>(n - 1)] -= 0.05;  // never recovers

  SmoothingParams p;
  OnsetInputs inputs;
  // thresholds wide enough that only the 5% step trips them
  for (i64 k = 0; k < 500; ++k) inputs.training_deltas.push_back(-0.0004);
  for (int k = 0; k < 10; ++k) {
    inputs.training_deltas.push_back(-0.002);
    inputs.training_deltas.push_back(0.002);
  }
  const CleaningOutcome out = clean_trajectory(soh, inputs, p);
  CHECK(out.smoothed_onsets.empty());
  REQUIRE(out.unsmoothed_onsets.size() == 1);
  CHECK(out.unsmoothed_onsets[0] == 40);
  CHECK(out.soh == clip_spikes(soh, p));
}

TEST_CASE("preprocess_record end to end on a generated battery") {
  SynthSpec spec;
  spec.seed = 12;
  spec.n_conditions = 1;
  spec.families = {ShapeFamily::sublinear};
  spec.life_range = {130, 170};
  spec.samples_per_segment = 10;
  spec.fine_cycles = 10;
  spec.coarse_samples_per_segment = 6;
  const GeneratedBattery gb = generate_battery(spec, 0, 0);

  PreprocessOptions opt;
  opt.config.L = 20;
  opt.config.S_max = 8;
  opt.config.P = 5;
  opt.config.T_max = 300;
  opt.requested_S = 6;
  opt.smoothing.onset_method = OnsetMethod::time_gap;
  opt.smoothing.gamma_gap_s = 1e12;

  OnsetInputs inputs;
  for (const auto& c : gb.record.cycles) inputs.cycle_start_s.push_back(c.timestamps_s.front());
  const auto res = preprocess_record(gb.record, opt, inputs);
  REQUIRE(std::holds_alternative<ProcessedSample>(res));
  const ProcessedSample& s = std::get<ProcessedSample>(res);
  CHECK(s.battery_id == gb.record.battery_id);
  CHECK(s.input.S == 6);
  CHECK(s.t_eol > 6);  // EOL from the cleaned series sits past the observation window
  CHECK(s.last_obs_soh > 0.9);
  // mask covers (S, t_eol]
  double msum = 0.0;
  for (i64 j = 0; j < s.target.mask.size(); ++j) msum += s.target.mask(j);
  CHECK(msum == static_cast<double>(s.t_eol - 6));
}

TEST_CASE("sample files round-trip exactly") {
  SynthSpec spec;
  spec.seed = 5;
  spec.n_conditions = 1;
  spec.families = {ShapeFamily::linear};
  spec.life_range = {120, 140};
  spec.samples_per_segment = 8;
  spec.fine_cycles = 8;
  const GeneratedBattery gb = generate_battery(spec, 0, 0);
  PreprocessOptions opt;
  opt.config.L = 12;
  opt.config.S_max = 4;
  opt.config.P = 3;
  opt.config.T_max = 200;
  opt.requested_S = 4;
  opt.smoothing.onset_method = OnsetMethod::time_gap;
  opt.smoothing.gamma_gap_s = 1e12;
  OnsetInputs inputs;
  for (const auto& c : gb.record.cycles) inputs.cycle_start_s.push_back(c.timestamps_s.front());
  const auto res = preprocess_record(gb.record, opt, inputs);
  REQUIRE(std::holds_alternative<ProcessedSample>(res));
  const ProcessedSample& s = std::get<ProcessedSample>(res);

  const std::string path = (fs::temp_directory_path() / "bdtf_sample_rt.json").string();
  save_sample(s, path);
  const ProcessedSample back = load_sample(path);
  CHECK(back.battery_id == s.battery_id);
  CHECK(back.input.X.data == s.input.X.data);
  CHECK(back.input.X_f.data == s.input.X_f.data);
  CHECK(back.input.cycle_mask == s.input.cycle_mask);
  CHECK(back.target.y_norm.data == s.target.y_norm.data);
  CHECK(back.target.mask.data == s.target.mask.data);
  CHECK(back.target.tau == s.target.tau);
  CHECK(back.last_obs_soh == s.last_obs_soh);
  CHECK(back.t_eol == s.t_eol);
  fs::remove(path);
}

TEST_CASE("directory preprocessing: clean synthetic set, zero exclusions, byte-identical rerun") {
  SynthSpec spec;
  spec.seed = 31;
  spec.n_conditions = 4;
  spec.families = {ShapeFamily::superlinear, ShapeFamily::linear, ShapeFamily::sublinear,
                   ShapeFamily::linear};
  spec.batteries_per_condition = 2;
  spec.life_range = {120, 180};
  spec.samples_per_segment = 10;
  spec.fine_cycles = 12;
  spec.coarse_samples_per_segment = 6;

  const std::string records = (fs::temp_directory_path() / "bdtf_pipe_records").string();
  const std::string out_a = (fs::temp_directory_path() / "bdtf_pipe_a").string();
  const std::string out_b = (fs::temp_directory_path() / "bdtf_pipe_b").string();
  fs::remove_all(records);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  generate_dataset(spec, records);

  PreprocessOptions opt;
  opt.config.L = 16;
  opt.config.S_max = 8;
  opt.config.P = 4;
  opt.config.T_max = 300;
  opt.requested_S = 8;

  const PreprocessReport a = preprocess_directory(records, out_a, opt, "random", 3);
  CHECK(a.exclusions.empty());
  CHECK(a.processed_ids.size() == 8);
  CHECK(a.training_delta_count > 100);

  const PreprocessReport b = preprocess_directory(records, out_b, opt, "random", 3);
  REQUIRE(a.sample_paths.size() == b.sample_paths.size());
  for (size_t i = 0; i < a.sample_paths.size(); ++i)
    CHECK(slurp(a.sample_paths[i]) == slurp(b.sample_paths[i]));

  // a battery that never degrades enough is excluded with a reason
  fs::remove_all(records);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST_CASE("smoothing params round-trip and reject bad values") {
  SmoothingParams p;
  p.onset_method = OnsetMethod::time_gap;
  p.gamma_gap_s = 12.0 * 3600.0;
  p.W = 7;
  const std::string path = (fs::temp_directory_path() / "bdtf_smooth.json").string();
  save_smoothing_params(p, path);
  const SmoothingParams back = load_smoothing_params(path);
  CHECK(back.onset_method == OnsetMethod::time_gap);
  CHECK(back.gamma_gap_s == doctest::Approx(12.0 * 3600.0));
  CHECK(back.W == 7);
  fs::remove(path);
}

TEST_CASE("directory preprocessing lists insufficiently degraded batteries as excluded") {
  SynthSpec spec;
  spec.seed = 77;
  spec.n_conditions = 3;
  spec.families = {ShapeFamily::linear, ShapeFamily::linear, ShapeFamily::linear};
  spec.batteries_per_condition = 1;
  spec.life_range = {120, 160};
  spec.samples_per_segment = 8;
  spec.fine_cycles = 8;
  spec.coarse_samples_per_segment = 6;

  const std::string records = (fs::temp_directory_path() / "bdtf_pipe_excl").string();
  const std::string out = (fs::temp_directory_path() / "bdtf_pipe_excl_out").string();
  fs::remove_all(records);
  fs::remove_all(out);
  generate_dataset(spec, records);

  // truncate one battery so it never degrades below tau + 2.5%
  BatteryRecord young = load_record(records + "/batt-c001-b00.json");
  young.cycles.resize(40);
  save_record(young, records + "/batt-c001-b00.json");

  PreprocessOptions opt;
  opt.config.L = 12;
  opt.config.S_max = 6;
  opt.config.P = 3;
  opt.config.T_max = 250;
  opt.requested_S = 6;
  const PreprocessReport rep = preprocess_directory(records, out, opt, "random", 2);
  CHECK(rep.processed_ids.size() == 2);
  REQUIRE(rep.exclusions.count("batt-c001-b00") == 1);
  CHECK(rep.exclusions.at("batt-c001-b00").find("insufficient degradation") != std::string::npos);
  fs::remove_all(records);
  fs::remove_all(out);
}
