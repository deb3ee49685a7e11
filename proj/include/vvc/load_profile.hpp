#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "vvc/feeder.hpp"

namespace vvc::env {

// Hourly load series for the non-substation buses, kW / kVar. Column t is
// hour t; row order follows the feeder bus order (internal index - 1).
struct LoadProfile {
  Eigen::MatrixXd p;
  Eigen::MatrixXd q;
  long horizon() const { return p.cols(); }
};

// Weekly-periodic base shape per bus with mean-one lognormal noise, scaled
// so the peak total load equals the feeder's nominal total. Power factors
// follow the feeder file.
LoadProfile synth_load_profile(const feeder::FeederModel& f, int weeks, std::uint64_t seed);

// CSV columns: hour,bus_id,p_kw,q_kvar over the complete hour x bus grid.
LoadProfile load_profile_from_csv(const std::string& path, const feeder::FeederModel& f);
void write_profile_csv(const std::string& path, const LoadProfile& profile,
                       const feeder::FeederModel& f);

}  // namespace vvc::env
