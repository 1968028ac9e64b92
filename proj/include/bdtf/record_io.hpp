#pragma once

#include <string>

#include "bdtf/types.hpp"

namespace bdtf {

// One battery record per JSON file; keys match the domain-type field names and per-cycle
// arrays are nested numeric lists.
std::string record_to_json(const BatteryRecord& record);
BatteryRecord record_from_json(const std::string& text);
void save_record(const BatteryRecord& record, const std::string& path);
BatteryRecord load_record(const std::string& path);

}  // namespace bdtf
