#include "bdtf/sample_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "bdtf/error.hpp"

namespace bdtf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape}, {"data", t.data}};
}

Tensor tensor_from_json(const json& j) {
  Tensor t;
  t.shape = j.at("shape").get<std::vector<i64>>();
  t.data = j.at("data").get<std::vector<double>>();
  if (Tensor::numel(t.shape) != static_cast<i64>(t.data.size()))
    throw Error("IOError", "tensor shape disagrees with data length");
  return t;
}

}  // namespace

void save_sample(const ProcessedSample& s, const std::string& path) {
  json j{{"battery_id", s.battery_id},
         {"condition_key", s.input.condition_key},
         {"S", s.input.S},
         {"X", tensor_to_json(s.input.X)},
         {"X_f", tensor_to_json(s.input.X_f)},
         {"cycle_mask", s.input.cycle_mask},
         {"y_norm", tensor_to_json(s.target.y_norm)},
         {"mask", tensor_to_json(s.target.mask)},
         {"tau", s.target.tau},
         {"last_obs_soh", s.last_obs_soh},
         {"t_eol", s.t_eol},
         {"smoothed_onsets", s.smoothed_onsets},
         {"unsmoothed_onsets", s.unsmoothed_onsets}};
  if (s.extrapolated_from) j["extrapolated_from"] = *s.extrapolated_from;
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write sample file: " + path);
  out << j.dump() << "\n";
}

ProcessedSample load_sample(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open sample file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("IOError", std::string("sample file is not valid JSON: ") + e.what());
  }
  ProcessedSample s;
  s.battery_id = j.at("battery_id").get<std::string>();
  s.input.condition_key = j.at("condition_key").get<std::string>();
  s.input.S = j.at("S").get<i64>();
  s.input.X = tensor_from_json(j.at("X"));
  s.input.X_f = tensor_from_json(j.at("X_f"));
  s.input.cycle_mask = j.at("cycle_mask").get<std::vector<std::uint8_t>>();
  s.target.y_norm = tensor_from_json(j.at("y_norm"));
  s.target.mask = tensor_from_json(j.at("mask"));
  s.target.tau = j.at("tau").get<double>();
  s.last_obs_soh = j.at("last_obs_soh").get<double>();
  s.t_eol = j.at("t_eol").get<i64>();
  s.smoothed_onsets = j.at("smoothed_onsets").get<std::vector<i64>>();
  s.unsmoothed_onsets = j.at("unsmoothed_onsets").get<std::vector<i64>>();
  if (j.contains("extrapolated_from")) s.extrapolated_from = j.at("extrapolated_from").get<i64>();
  return s;
}

std::vector<ProcessedSample> load_sample_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 12 && name.substr(name.size() - 12) == ".sample.json")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ProcessedSample> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(load_sample(p));
  return out;
}

}  // namespace bdtf
