#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mesim/config.hpp"
#include "mesim/experiments.hpp"
#include "mesim/metrology.hpp"

namespace mesim {

// Report JSON uses SI base units with the unit spelled in every key
// (field_t, sigma_v, lod_t_per_rthz, ...). NaN is written as null.

Json to_json(const LodDcReport& r);
LodDcReport lod_dc_from_json(const Json& j);
Json to_json(const LineFit& f);
LineFit line_fit_from_json(const Json& j);
Json to_json(const LinearityReport& r);
LinearityReport linearity_from_json(const Json& j);
Json to_json(const CarrierSweepReport& r);
CarrierSweepReport carrier_sweep_from_json(const Json& j);
Json to_json(const std::vector<AcLodPoint>& points);
std::vector<AcLodPoint> ac_lod_from_json(const Json& j);
Json to_json(const NoiseFit& fit);

Json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const Json& j);
ExperimentReport read_report(const std::filesystem::path& path);

/// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);

}  // namespace mesim
