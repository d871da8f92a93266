#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "mesim/experiments.hpp"

namespace mesim {

using Json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

/// Builds a scenario from a config document. Keys carry their unit as a
/// suffix (bias_ut, f_res_khz, dwell_s, ...); unknown keys and out-of-range
/// values throw ConfigError naming the key, the value and the expectation.
/// Relative curve_csv paths resolve against `base_dir`.
Scenario scenario_from_json(const Json& doc, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Inverse of scenario_from_json for the active protocol; all derived
/// defaults are written out as resolved numbers.
Json scenario_to_json(const Scenario& scenario);

/// Complete default config for a protocol and preset.
Json config_template(Protocol protocol, const std::string& preset_name = std::string(kPresetMlPaper));

/// Text table of every key with unit, default and meaning.
std::string config_reference();

}  // namespace mesim
