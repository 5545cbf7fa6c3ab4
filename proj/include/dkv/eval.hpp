#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dkv/adapt.hpp"
#include "dkv/koopman.hpp"
#include "dkv/scenarios.hpp"
#include "dkv/vehicle.hpp"

namespace dkv {

inline constexpr std::array<const char*, 3> kChannelNames = {"Vx", "Vy", "wr"};
inline constexpr std::array<const char*, 3> kChannelUnits = {"km/h", "km/h", "deg/s"};

/// Max |error| and RMSE per channel, in km/h (Vx, Vy) and deg/s (wr).
struct ChannelMetrics {
  std::array<double, 3> max_abs{};
  std::array<double, 3> rmse{};
};

ChannelMetrics metrics(const std::vector<VehicleState>& predicted, const std::vector<VehicleState>& truth);

/// One-step-ahead RK4 prediction from each measured snapshot using the
/// assumed parameters (which may differ from the plant's).
std::vector<VehicleState> physics_baseline(const VehicleParams& params_assumed, const Trajectory& traj,
                                           double dt);

/// Assumed parameters of the physics baseline: nominal geometry and mass,
/// without rolling or aerodynamic resistance.
VehicleParams default_baseline_params();

enum class MethodKind { PhysicsBaseline, Koopman, Adaptive };

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::Koopman;
  const KoopmanModel* model = nullptr;
  AdapterConfig adapter;
  VehicleParams assumed;
};

/// PHYS-BASELINE, DK, ALDK, ALDK-RLS, ALDK-FFRLS, ALDK-SWLS.
std::vector<MethodSpec> default_methods(const KoopmanModel& dk, const KoopmanModel& aldk, int window = 100);

struct MethodResult {
  std::string name;
  ChannelMetrics metrics;
  double runtime_s = 0.0;
  std::uint64_t trajectory_hash = 0;
  std::vector<VehicleState> predictions;
};

struct ComparisonReport {
  std::string scenario;
  std::string description;
  std::size_t snapshots = 0;
  std::uint64_t trajectory_hash = 0;
  std::string fingerprint;
  Trajectory trajectory;
  std::vector<MethodResult> methods;

  const MethodResult& method(const std::string& name) const;
};

/// Simulates the scenario once and evaluates every method one step ahead on it.
ComparisonReport run_comparison(const std::vector<MethodSpec>& methods, const Scenario& scenario);
ComparisonReport run_comparison(const std::vector<MethodSpec>& methods, const Scenario& scenario,
                                const Trajectory& traj);

/// nominal, mass +160 / -170 kg, yaw inertia +142 / -158 kg m^2, mu 0.6
/// slalom and the aggressive-cornering stand-in for a mountain road.
std::vector<Scenario> scenario_suite(std::uint64_t seed = 1001, double duration = 300.0);

/// Aligned text table (Max/RMSE per channel), units in the header.
void write_report_table(std::ostream& os, const ComparisonReport& report);
/// `method,channel,max,rmse`
void write_metrics_csv(std::ostream& os, const ComparisonReport& report);
/// Per-step prediction errors for plotting: t,<method>_Vx,<method>_Vy,<method>_wr,...
void write_error_series(std::ostream& os, const ComparisonReport& report);

}  // namespace dkv
