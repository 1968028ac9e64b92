#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bdtf/tensor.hpp"

namespace bdtf {

// The ten aging factors that determine a battery's degradation regime. Two batteries share
// an aging condition iff all ten fields compare equal.
struct AgingCondition {
  std::string positive_electrode;
  std::string negative_electrode;
  std::string electrolyte;
  std::string package_structure;
  double nominal_capacity_ah = 0.0;
  std::string manufacturer;
  std::string formation_protocol;
  std::string charge_protocol;
  std::string discharge_protocol;
  double operating_temperature_c = 0.0;

  bool operator==(const AgingCondition&) const = default;

  // Canonical key: fields joined by a unit separator, numeric fields printed with full
  // round-trip precision. Key equality <=> field-wise equality.
  std::string key() const;
};

// Index range [first, last] into a cycle's sample arrays, inclusive, 0-based.
struct SampleSpan {
  i64 first = 0;
  i64 last = -1;
  i64 length() const { return last - first + 1; }
  bool valid(i64 n) const { return first >= 0 && last < n && first <= last; }
};

// Raw per-cycle measurements. Current is signed: charge positive, discharge negative.
struct CycleRecord {
  std::vector<double> timestamps_s;  // strictly increasing
  std::vector<double> voltage_v;
  std::vector<double> current_a;
  std::vector<double> energy_wh;     // optional cumulative meter; empty when absent
  SampleSpan charge_span;
  SampleSpan discharge_span;
};

struct BatteryRecord {
  std::string battery_id;
  AgingCondition condition;
  double dod = 1.0;                      // depth of discharge, (0, 1]
  double soc_start = 0.0;                // protocol SOC interval, start < end
  double soc_end = 1.0;
  std::vector<CycleRecord> cycles;       // cycle i lives at index i-1
  double cap0_ah = 0.0;                  // nominal, or first-cycle discharge when flagged
  bool cap0_from_first_cycle = false;
  double tau = 0.8;                      // EOL threshold fraction
};

struct SohTrajectory {
  std::vector<double> soh;                    // soh[j-1] is cycle j, values in (0, 1.5)
  std::optional<i64> t_eol;                   // first cycle with soh < tau
  std::optional<i64> extrapolated_from;       // last measured cycle when a tail was appended

  double at(i64 cycle) const { return soh[static_cast<size_t>(cycle - 1)]; }
  i64 cycles() const { return static_cast<i64>(soh.size()); }
};

// Diagnostic, never throws: empty result means every invariant holds.
std::vector<std::string> validate_record(const BatteryRecord& record);

}  // namespace bdtf
