#include "bdtf/record_io.hpp"

#include <fstream>
#include <json.hpp>

#include "bdtf/error.hpp"

namespace bdtf {

using nlohmann::json;

namespace {

json span_to_json(const SampleSpan& s) { return json::array({s.first, s.last}); }

SampleSpan span_from_json(const json& j) {
  SampleSpan s;
  s.first = j.at(0).get<i64>();
  s.last = j.at(1).get<i64>();
  return s;
}

}  // namespace

std::string record_to_json(const BatteryRecord& r) {
  json cond{{"positive_electrode", r.condition.positive_electrode},
            {"negative_electrode", r.condition.negative_electrode},
            {"electrolyte", r.condition.electrolyte},
            {"package_structure", r.condition.package_structure},
            {"nominal_capacity", r.condition.nominal_capacity_ah},
            {"manufacturer", r.condition.manufacturer},
            {"formation_protocol", r.condition.formation_protocol},
            {"charge_protocol", r.condition.charge_protocol},
            {"discharge_protocol", r.condition.discharge_protocol},
            {"operating_temperature", r.condition.operating_temperature_c}};
  json cycles = json::array();
  for (const CycleRecord& c : r.cycles) {
    json jc{{"timestamps", c.timestamps_s},
            {"voltage", c.voltage_v},
            {"current", c.current_a},
            {"charge_span", span_to_json(c.charge_span)},
            {"discharge_span", span_to_json(c.discharge_span)}};
    if (!c.energy_wh.empty()) jc["energy"] = c.energy_wh;
    cycles.push_back(std::move(jc));
  }
  json j{{"battery_id", r.battery_id},
         {"condition", cond},
         {"dod", r.dod},
         {"soc_interval", json::array({r.soc_start, r.soc_end})},
         {"cycles", cycles},
         {"cap0", r.cap0_ah},
         {"cap0_from_first_cycle", r.cap0_from_first_cycle},
         {"tau", r.tau}};
  return j.dump();
}

BatteryRecord record_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error("IOError", std::string("record is not valid JSON: ") + e.what());
  }
  BatteryRecord r;
  try {
    r.battery_id = j.at("battery_id").get<std::string>();
    const json& c = j.at("condition");
    r.condition.positive_electrode = c.at("positive_electrode").get<std::string>();
    r.condition.negative_electrode = c.at("negative_electrode").get<std::string>();
    r.condition.electrolyte = c.at("electrolyte").get<std::string>();
    r.condition.package_structure = c.at("package_structure").get<std::string>();
    r.condition.nominal_capacity_ah = c.at("nominal_capacity").get<double>();
    r.condition.manufacturer = c.at("manufacturer").get<std::string>();
    r.condition.formation_protocol = c.at("formation_protocol").get<std::string>();
    r.condition.charge_protocol = c.at("charge_protocol").get<std::string>();
    r.condition.discharge_protocol = c.at("discharge_protocol").get<std::string>();
    r.condition.operating_temperature_c = c.at("operating_temperature").get<double>();
    r.dod = j.at("dod").get<double>();
    r.soc_start = j.at("soc_interval").at(0).get<double>();
    r.soc_end = j.at("soc_interval").at(1).get<double>();
    r.cap0_ah = j.at("cap0").get<double>();
    if (j.contains("cap0_from_first_cycle"))
      r.cap0_from_first_cycle = j.at("cap0_from_first_cycle").get<bool>();
    r.tau = j.at("tau").get<double>();
    for (const json& jc : j.at("cycles")) {
      CycleRecord cyc;
      cyc.timestamps_s = jc.at("timestamps").get<std::vector<double>>();
      cyc.voltage_v = jc.at("voltage").get<std::vector<double>>();
      cyc.current_a = jc.at("current").get<std::vector<double>>();
      if (jc.contains("energy")) cyc.energy_wh = jc.at("energy").get<std::vector<double>>();
      cyc.charge_span = span_from_json(jc.at("charge_span"));
      cyc.discharge_span = span_from_json(jc.at("discharge_span"));
      r.cycles.push_back(std::move(cyc));
    }
  } catch (const json::exception& e) {
    throw Error("IOError", std::string("record is missing or mistypes a field: ") + e.what());
  }
  return r;
}

void save_record(const BatteryRecord& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("IOError", "cannot write record file: " + path);
  out << record_to_json(r) << "\n";
}

BatteryRecord load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IOError", "cannot open record file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return record_from_json(text);
}

}  // namespace bdtf
