#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dkv/vehicle.hpp"

namespace dkv {

/// Knobs shared by every scenario in the library. Unset optionals keep the
/// scenario's own default.
struct ScenarioOptions {
  std::optional<double> duration;
  double dt = 0.025;
  int substeps = 1;
  std::uint64_t seed = 7;
  double mass_delta = 0.0;     // kg, added to the nominal mass
  double inertia_delta = 0.0;  // kg m^2, added to the nominal yaw inertia
  std::optional<double> mu;
};

/// Known names: mixed-excitation, slalom, step-steer, constant-radius,
/// aggressive-cornering.
const std::vector<std::string>& scenario_names();

/// Throws std::invalid_argument listing the known names for an unknown one.
Scenario make_scenario(const std::string& name, const ScenarioOptions& opts = {});

/// Period of the slalom steering sinusoid (s).
inline constexpr double kSlalomPeriod = 100.0;

}  // namespace dkv
