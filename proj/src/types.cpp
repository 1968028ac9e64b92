#include "bdtf/types.hpp"

#include <cmath>
#include <cstdio>

namespace bdtf {

namespace {

std::string num_key(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check(std::vector<std::string>& out, bool ok, const char* msg) {
  if (!ok) out.emplace_back(msg);
}

}  // namespace

std::string AgingCondition::key() const {
  const char sep = '\x1f';
  std::string k;
  k += positive_electrode;
  k += sep;
  k += negative_electrode;
  k += sep;
  k += electrolyte;
  k += sep;
  k += package_structure;
  k += sep;
  k += num_key(nominal_capacity_ah);
  k += sep;
  k += manufacturer;
  k += sep;
  k += formation_protocol;
  k += sep;
  k += charge_protocol;
  k += sep;
  k += discharge_protocol;
  k += sep;
  k += num_key(operating_temperature_c);
  return k;
}

std::vector<std::string> validate_record(const BatteryRecord& r) {
  std::vector<std::string> v;
  check(v, r.condition.nominal_capacity_ah > 0.0, "condition.nominal_capacity must be > 0");
  check(v, r.cap0_ah > 0.0, "cap0 must be > 0");
  check(v, r.tau > 0.0 && r.tau < 1.0, "tau must lie in (0,1)");
  check(v, r.dod > 0.0 && r.dod <= 1.0, "dod must lie in (0,1]");
  check(v, r.soc_start < r.soc_end, "soc_interval start must be < end");
  check(v, r.soc_start >= 0.0 && r.soc_end <= 1.0, "soc_interval must lie within [0,1]");
  check(v, !r.battery_id.empty(), "battery_id must be nonempty");

  for (size_t ci = 0; ci < r.cycles.size(); ++ci) {
    const CycleRecord& c = r.cycles[ci];
    const std::string at = "cycle " + std::to_string(ci + 1) + ": ";
    const i64 n = static_cast<i64>(c.timestamps_s.size());
    if (n < 2) {
      v.push_back(at + "series length must be >= 2");
      continue;
    }
    if (c.voltage_v.size() != c.timestamps_s.size() ||
        c.current_a.size() != c.timestamps_s.size() ||
        (!c.energy_wh.empty() && c.energy_wh.size() != c.timestamps_s.size())) {
      v.push_back(at + "all series must share one length");
      continue;
    }
    bool increasing = true;
    for (i64 i = 1; i < n; ++i)
      if (!(c.timestamps_s[static_cast<size_t>(i)] > c.timestamps_s[static_cast<size_t>(i - 1)]))
        increasing = false;
    if (!increasing) v.push_back(at + "timestamps must be strictly increasing");
    if (!c.charge_span.valid(n) || c.charge_span.length() < 1)
      v.push_back(at + "charge_span must be a nonempty range into the arrays");
    if (!c.discharge_span.valid(n) || c.discharge_span.length() < 1)
      v.push_back(at + "discharge_span must be a nonempty range into the arrays");
    if (c.charge_span.valid(n) && c.discharge_span.valid(n) &&
        !(c.charge_span.last < c.discharge_span.first))
      v.push_back(at + "charge_span must precede discharge_span");
  }
  return v;
}

}  // namespace bdtf
