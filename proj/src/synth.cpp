#include "bdtf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "bdtf/embedder.hpp"
#include "bdtf/error.hpp"
#include "bdtf/preprocess.hpp"
#include "bdtf/record_io.hpp"
#include "bdtf/rng.hpp"

namespace bdtf {

using nlohmann::json;
namespace fs = std::filesystem;

const char* family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::superlinear: return "superlinear";
    case ShapeFamily::linear: return "linear";
    default: return "sublinear";
  }
}

ShapeFamily family_from_name(const std::string& name) {
  if (name == "superlinear") return ShapeFamily::superlinear;
  if (name == "linear") return ShapeFamily::linear;
  if (name == "sublinear") return ShapeFamily::sublinear;
  throw Error("InvalidSpec", "unknown shape family: " + name);
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error("InvalidSpec", m); };
  if (n_conditions < 1 || batteries_per_condition < 1) fail("counts must be >= 1");
  if (life_range[0] < 102 || life_range[1] > 5000 || life_range[0] > life_range[1])
    fail("life_range must lie within [102, 5000]");
  if (noise_sd < 0.0) fail("noise_sd must be >= 0");
  if (static_cast<i64>(families.size()) != n_conditions)
    fail("families must resolve to one entry per condition");
  if (samples_per_segment < 4 || coarse_samples_per_segment < 4)
    fail("samples_per_segment must be >= 4");
  if (rest_samples < 0) fail("rest_samples must be >= 0");
  if (!(tau > 0.0 && tau < 1.0)) fail("tau must lie in (0,1)");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (regeneration_events < 0) fail("regeneration_events must be >= 0");
}

SynthSpec SynthSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open synth spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("InvalidSpec", std::string("synth spec is not valid JSON: ") + e.what());
  }
  SynthSpec s;
  try {
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_conditions")) s.n_conditions = j.at("n_conditions").get<i64>();
    if (j.contains("batteries_per_condition"))
      s.batteries_per_condition = j.at("batteries_per_condition").get<i64>();
    if (j.contains("life_range")) {
      s.life_range[0] = j.at("life_range").at(0).get<i64>();
      s.life_range[1] = j.at("life_range").at(1).get<i64>();
    }
    if (j.contains("noise_sd")) s.noise_sd = j.at("noise_sd").get<double>();
    if (j.contains("capacity_rise")) s.capacity_rise = j.at("capacity_rise").get<bool>();
    if (j.contains("regeneration_events"))
      s.regeneration_events = j.at("regeneration_events").get<i64>();
    if (j.contains("samples_per_segment"))
      s.samples_per_segment = j.at("samples_per_segment").get<i64>();
    if (j.contains("fine_cycles")) s.fine_cycles = j.at("fine_cycles").get<i64>();
    if (j.contains("coarse_samples_per_segment"))
      s.coarse_samples_per_segment = j.at("coarse_samples_per_segment").get<i64>();
    if (j.contains("rest_samples")) s.rest_samples = j.at("rest_samples").get<i64>();
    if (j.contains("tau")) s.tau = j.at("tau").get<double>();
    if (j.contains("embed_dim")) s.embed_dim = j.at("embed_dim").get<i64>();
    if (j.contains("families")) {
      const json& f = j.at("families");
      if (f.is_string() && f.get<std::string>() == "mixed") {
        // resolved below
      } else if (f.is_array()) {
        for (const auto& name : f) s.families.push_back(family_from_name(name.get<std::string>()));
      } else {
        throw Error("InvalidSpec", "families must be \"mixed\" or an array of family names");
      }
    }
  } catch (const json::exception& e) {
    throw Error("InvalidSpec", std::string("synth spec field error: ") + e.what());
  }
  if (s.families.empty()) {
    const ShapeFamily cycle[3] = {ShapeFamily::superlinear, ShapeFamily::linear,
                                  ShapeFamily::sublinear};
    for (i64 i = 0; i < s.n_conditions; ++i) s.families.push_back(cycle[i % 3]);
  }
  s.validate();
  return s;
}

void SynthSpec::save(const std::string& path) const {
  json fam = json::array();
  for (ShapeFamily f : families) fam.push_back(family_name(f));
  json j{{"seed", seed},
         {"n_conditions", n_conditions},
         {"batteries_per_condition", batteries_per_condition},
         {"families", fam},
         {"life_range", life_range},
         {"noise_sd", noise_sd},
         {"capacity_rise", capacity_rise},
         {"regeneration_events", regeneration_events},
         {"samples_per_segment", samples_per_segment},
         {"fine_cycles", fine_cycles},
         {"coarse_samples_per_segment", coarse_samples_per_segment},
         {"rest_samples", rest_samples},
         {"tau", tau},
         {"embed_dim", embed_dim}};
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write synth spec: " + path);
  out << j.dump(2) << "\n";
}

double synth_ocv(double soc, double v0, double slope, double amp, double center, double width) {
  const double x = (soc - center) / width;
  return v0 + slope * soc + amp / (1.0 + std::exp(-x));
}

namespace {

// Per-condition generation parameters, derived deterministically from (seed, index).
struct ConditionParams {
  AgingCondition condition;
  ShapeFamily family;
  double life_c, split_f, p;
  double v0, k, amp, center, width;
  double r0, rho;
  double rate_ch, rate_dis;
  double cap0, dod, soc_start, soc_end, temp;
  double ce0, ce_slope;
};

ConditionParams condition_params(const SynthSpec& spec, i64 index) {
  Rng rng(mix_seed(mix_seed(spec.seed, 0xC0DDULL), static_cast<std::uint64_t>(index)));
  ConditionParams p;
  p.family = spec.families[static_cast<size_t>(index)];
  p.life_c = static_cast<double>(
      rng.uniform_int(spec.life_range[0] + 5, std::max(spec.life_range[0] + 5, spec.life_range[1] - 5)));
  p.split_f = rng.uniform(0.35, 0.65);
  switch (p.family) {
    case ShapeFamily::superlinear: p.p = rng.uniform(1.9, 2.8); break;
    case ShapeFamily::linear: p.p = 1.0; break;
    case ShapeFamily::sublinear: p.p = rng.uniform(0.45, 0.75); break;
  }
  p.v0 = rng.uniform(2.9, 3.3);
  p.k = rng.uniform(0.5, 0.9);
  p.amp = rng.uniform(0.06, 0.15);
  p.center = rng.uniform(0.3, 0.7);
  p.width = rng.uniform(0.06, 0.12);
  p.r0 = rng.uniform(0.01, 0.04);
  p.rho = rng.uniform(1.0, 3.0);

  static const double rates_ch[] = {0.5, 1.0, 1.5, 2.0};
  static const double rates_dis[] = {0.5, 1.0, 2.0, 3.0};
  static const double caps[] = {1.1, 2.0, 2.5, 3.2, 4.8};
  static const double temps[] = {15.0, 25.0, 35.0, 45.0};
  static const char* positives[] = {"NMC111", "NMC532", "NMC811", "LFP", "NCA", "LCO"};
  static const char* negatives[] = {"graphite", "graphite-SiOx", "hard carbon", "LTO"};
  static const char* electrolytes[] = {"1M LiPF6 EC:DEC", "1.2M LiPF6 EC:EMC", "1M LiFSI EC:DMC",
                                       "1M NaPF6 EC:PC"};
  static const char* packages[] = {"cylindrical 18650", "cylindrical 21700", "pouch",
                                   "prismatic"};
  static const char* makers[] = {"cellworks-a", "cellworks-b", "northcell", "voltaic-labs",
                                 "ionic-m"};
  p.rate_ch = rates_ch[rng.uniform_int(0, 3)];
  p.rate_dis = rates_dis[rng.uniform_int(0, 3)];
  p.cap0 = caps[rng.uniform_int(0, 4)];
  p.temp = temps[rng.uniform_int(0, 3)];
  if (index % 5 == 4) {
    p.dod = 0.8;
    p.soc_start = rng.uniform(0.0, 0.2);
    p.soc_end = p.soc_start + p.dod;
  } else {
    p.dod = 1.0;
    p.soc_start = 0.0;
    p.soc_end = 1.0;
  }
  p.ce0 = rng.uniform(0.990, 0.999);
  p.ce_slope = rng.uniform(0.004, 0.012);

  char buf[96];
  AgingCondition& c = p.condition;
  c.positive_electrode = positives[rng.uniform_int(0, 5)];
  c.negative_electrode = negatives[rng.uniform_int(0, 3)];
  c.electrolyte = electrolytes[rng.uniform_int(0, 3)];
  c.package_structure = packages[rng.uniform_int(0, 3)];
  c.nominal_capacity_ah = p.cap0;
  c.manufacturer = makers[rng.uniform_int(0, 4)];
  std::snprintf(buf, sizeof(buf), "3 cycles C/20 formation, variant %lld",
                static_cast<long long>(index + 1));
  c.formation_protocol = buf;
  std::snprintf(buf, sizeof(buf), "CC %.1fC to %.2fV", p.rate_ch,
                synth_ocv(p.soc_end, p.v0, p.k, p.amp, p.center, p.width));
  c.charge_protocol = buf;
  std::snprintf(buf, sizeof(buf), "CC %.1fC to %.2fV", p.rate_dis,
                synth_ocv(p.soc_start, p.v0, p.k, p.amp, p.center, p.width));
  c.discharge_protocol = buf;
  c.operating_temperature_c = p.temp;
  return p;
}

}  // namespace

AgingCondition generate_condition(const SynthSpec& spec, i64 index) {
  if (index >= spec.n_conditions) throw Error("InvalidSpec", "condition index out of range");
  return condition_params(spec, index).condition;
}

GeneratedBattery generate_battery(const SynthSpec& spec, i64 condition_index, i64 battery_index) {
  const ConditionParams cp = condition_params(spec, condition_index);
  Rng rng(mix_seed(mix_seed(mix_seed(spec.seed, 0xBA77ULL),
                            static_cast<std::uint64_t>(condition_index)),
                   static_cast<std::uint64_t>(battery_index)));

  GeneratedBattery out;
  out.family = cp.family;
  out.ocv_v0 = cp.v0;
  out.ocv_slope = cp.k;
  out.ocv_amp = cp.amp;
  out.ocv_center = cp.center;
  out.ocv_width = cp.width;

  double life = cp.life_c * rng.uniform(0.92, 1.08);
  life = std::clamp(life, static_cast<double>(spec.life_range[0]),
                    static_cast<double>(spec.life_range[1]));
  out.life = static_cast<i64>(std::llround(life));
  const double f = std::clamp(cp.split_f + rng.uniform(-0.05, 0.05), 0.05, 0.95);
  out.fade_p = cp.family == ShapeFamily::linear ? 1.0 : cp.p * rng.uniform(0.97, 1.03);
  const double drop = 1.0 - (spec.tau - 0.03);
  out.fade_a = f * drop / life;
  out.fade_b = (1.0 - f) * drop / std::pow(life, out.fade_p);

  const double rise_amp = spec.capacity_rise ? rng.uniform(0.004, 0.015) : 0.0;
  std::vector<i64> regen_at;
  std::vector<double> regen_h;
  for (i64 e = 0; e < spec.regeneration_events; ++e) {
    regen_at.push_back(rng.uniform_int(std::max<i64>(5, out.life / 4), out.life * 9 / 10));
    regen_h.push_back(rng.uniform(0.004, 0.012));
  }

  // realized SOH trajectory
  std::vector<double> soh;
  const i64 n_cap = static_cast<i64>(life * 1.3) + 20;
  for (i64 n = 1; n <= n_cap; ++n) {
    double base = 1.0 - out.fade_a * static_cast<double>(n) -
                  out.fade_b * std::pow(static_cast<double>(n), out.fade_p);
    base += rise_amp * (1.0 - std::exp(-static_cast<double>(n) / 3.0)) *
            std::exp(-static_cast<double>(n) / 25.0);
    for (size_t e = 0; e < regen_at.size(); ++e)
      if (n >= regen_at[e])
        base += regen_h[e] * std::exp(-static_cast<double>(n - regen_at[e]) / 8.0);
    const double noisy = std::clamp(base + spec.noise_sd * rng.gaussian(), 0.03, 1.49);
    soh.push_back(noisy);
    if (base < spec.tau - 0.05) break;
  }
  out.truth.soh = soh;
  for (size_t j = 0; j < soh.size(); ++j) {
    if (soh[j] < spec.tau) {
      out.truth.t_eol = static_cast<i64>(j) + 1;
      break;
    }
  }

  // battery record with per-cycle raw series
  BatteryRecord& r = out.record;
  char idbuf[64];
  std::snprintf(idbuf, sizeof(idbuf), "batt-c%03lld-b%02lld",
                static_cast<long long>(condition_index), static_cast<long long>(battery_index));
  r.battery_id = idbuf;
  r.condition = cp.condition;
  r.dod = cp.dod;
  r.soc_start = cp.soc_start;
  r.soc_end = cp.soc_end;
  r.cap0_ah = cp.cap0;
  r.tau = spec.tau;

  const double i_ch = cp.rate_ch * cp.cap0;
  const double i_dis = cp.rate_dis * cp.cap0;
  double clock_s = 0.0;
  for (i64 n = 1; n <= static_cast<i64>(soh.size()); ++n) {
    const double s_n = soh[static_cast<size_t>(n - 1)];
    const double cap_dis = s_n * cp.cap0 * cp.dod;
    const double ce =
        std::clamp(cp.ce0 - cp.ce_slope * (1.0 - s_n) + rng.uniform(-3e-4, 3e-4), 0.9, 1.0);
    const double cap_ch = cap_dis / ce;
    const double r_n = cp.r0 * (1.0 + cp.rho * (1.0 - s_n));
    const i64 m = n <= spec.fine_cycles ? spec.samples_per_segment
                                        : spec.coarse_samples_per_segment;

    CycleRecord cyc;
    const double dur_ch = cap_ch / i_ch * 3600.0;
    for (i64 kk = 0; kk < m; ++kk) {
      const double t = dur_ch * static_cast<double>(kk) / static_cast<double>(m - 1);
      const double q = i_ch * t / 3600.0;
      const double soc = cp.soc_start + q / cap_ch * (cp.soc_end - cp.soc_start);
      cyc.timestamps_s.push_back(clock_s + t);
      cyc.voltage_v.push_back(synth_ocv(soc, cp.v0, cp.k, cp.amp, cp.center, cp.width) +
                              i_ch * r_n);
      cyc.current_a.push_back(i_ch);
    }
    clock_s += dur_ch;
    cyc.charge_span = {0, m - 1};

    for (i64 kk = 0; kk < spec.rest_samples; ++kk) {
      clock_s += 60.0;
      cyc.timestamps_s.push_back(clock_s);
      cyc.voltage_v.push_back(synth_ocv(cp.soc_end, cp.v0, cp.k, cp.amp, cp.center, cp.width));
      cyc.current_a.push_back(0.0);
    }

    const double dur_dis = cap_dis / i_dis * 3600.0;
    const double dis_t0 = clock_s + 30.0;
    for (i64 kk = 0; kk < m; ++kk) {
      const double t = dur_dis * static_cast<double>(kk) / static_cast<double>(m - 1);
      const double q = i_dis * t / 3600.0;
      const double soc = cp.soc_end + q / cap_dis * (cp.soc_start - cp.soc_end);
      cyc.timestamps_s.push_back(dis_t0 + t);
      cyc.voltage_v.push_back(synth_ocv(soc, cp.v0, cp.k, cp.amp, cp.center, cp.width) -
                              i_dis * r_n);
      cyc.current_a.push_back(-i_dis);
    }
    clock_s = dis_t0 + dur_dis + 600.0;
    cyc.discharge_span = {m + spec.rest_samples, 2 * m + spec.rest_samples - 1};
    r.cycles.push_back(std::move(cyc));
  }
  return out;
}

SynthSummary generate_dataset(const SynthSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  SynthSummary summary;
  json manifest = json::array();
  ExternalEmbeddings embeds;
  embeds.set_meta("synthetic-hash-v1", spec.embed_dim);

  for (i64 c = 0; c < spec.n_conditions; ++c) {
    const AgingCondition cond = generate_condition(spec, c);
    embeds.put(cond.key(), synthetic_prompt_embedding(cond, spec.embed_dim));
    for (i64 b = 0; b < spec.batteries_per_condition; ++b) {
      GeneratedBattery gb = generate_battery(spec, c, b);
      const std::string path = out_dir + "/" + gb.record.battery_id + ".json";
      save_record(gb.record, path);
      summary.record_paths.push_back(path);
      json entry{{"battery_id", gb.record.battery_id},
                 {"condition_index", c},
                 {"condition_key", cond.key()},
                 {"family", family_name(gb.family)},
                 {"fade_a", gb.fade_a},
                 {"fade_b", gb.fade_b},
                 {"fade_p", gb.fade_p},
                 {"life", gb.life},
                 {"cap0", gb.record.cap0_ah},
                 {"dod", gb.record.dod},
                 {"tau", gb.record.tau},
                 {"ocv",
                  {{"v0", gb.ocv_v0},
                   {"slope", gb.ocv_slope},
                   {"amp", gb.ocv_amp},
                   {"center", gb.ocv_center},
                   {"width", gb.ocv_width}}},
                 {"soh", gb.truth.soh}};
      if (gb.truth.t_eol) entry["t_eol"] = *gb.truth.t_eol;
      manifest.push_back(std::move(entry));
    }
  }

  summary.ground_truth_path = out_dir + "/ground_truth.json";
  std::ofstream mf(summary.ground_truth_path);
  if (!mf) throw Error("IOError", "cannot write ground truth manifest");
  mf << manifest.dump() << "\n";

  summary.embeddings_path = out_dir + "/embeddings.json";
  embeds.save(summary.embeddings_path);
  return summary;
}

}  // namespace bdtf
