#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dkv {

inline constexpr double kGravity = 9.81;

/// Lateral magic-formula shape factors (pure side slip).
struct MagicFormulaParams {
  double B_stiff = 10.0;
  double C_shape = 1.9;
  double D_peak_scale = 1.0;
  double E_curv = 0.97;

  void validate() const;
};

/// Planar four-wheel vehicle. Geometry and inertia default to the in-wheel
/// motor driven test vehicle; rw, drag, roll and mu parameterize the
/// resistances and road of the substitute plant.
struct VehicleParams {
  double m = 2070.0;   // kg
  double Iz = 3658.0;  // kg m^2
  double lf = 1.315;   // m
  double lr = 1.355;   // m
  double wB = 1.715;   // m, track width
  double rw = 0.325;   // m, wheel radius
  double mu = 0.85;
  MagicFormulaParams tire;
  double drag = 0.41;   // 0.5 * rho * Cd * A, N s^2/m^2
  double roll = 0.015;  // rolling resistance coefficient
  double torque_limit = 4000.0;  // N m, total

  void validate() const;
  double wheelbase() const { return lf + lr; }
  double front_wheel_load() const { return m * kGravity * lr / (2.0 * wheelbase()); }
  double rear_wheel_load() const { return m * kGravity * lf / (2.0 * wheelbase()); }
  /// Total longitudinal resistance (rolling + aero) at speed Vx.
  double resistance(double Vx) const { return roll * m * kGravity + drag * Vx * Vx; }
};

struct VehicleState {
  double Vx = 0.0;  // m/s
  double Vy = 0.0;  // m/s
  double wr = 0.0;  // rad/s

  Eigen::Vector3d vec() const { return {Vx, Vy, wr}; }
  static VehicleState from(const Eigen::Ref<const Eigen::VectorXd>& v) { return {v(0), v(1), v(2)}; }
  bool operator==(const VehicleState&) const = default;
};

struct ControlInput {
  double T = 0.0;        // N m, summed over the four wheels
  double delta_f = 0.0;  // rad

  Eigen::Vector2d vec() const { return {T, delta_f}; }
  bool operator==(const ControlInput&) const = default;
};

struct StateDerivative {
  double dVx = 0.0;
  double dVy = 0.0;
  double dwr = 0.0;
};

/// Body-frame accelerometer reading.
struct BodyAccel {
  double ax = 0.0;
  double ay = 0.0;
};

struct Snapshot {
  double t = 0.0;
  VehicleState state;
  ControlInput input;
  double ax = 0.0;
  double ay = 0.0;

  bool operator==(const Snapshot&) const = default;
};

using Trajectory = std::vector<Snapshot>;
using InputProgram = std::function<ControlInput(double t)>;

struct Scenario {
  std::string name;
  std::string description;
  double duration = 1.0;
  double dt = 0.025;
  int substeps = 1;
  VehicleState initial_state{20.0, 0.0, 0.0};
  InputProgram input_program;
  VehicleParams params;

  void validate() const;
};

/// Minimum longitudinal speed for which the slip-angle model is defined.
inline constexpr double kMinSpeed = 0.1;

double tire_lateral_force(double alpha, double Fz, const MagicFormulaParams& tire, double mu);

StateDerivative derivatives(const VehicleState& state, const ControlInput& input,
                            const VehicleParams& params);

BodyAccel sensor_accels(const VehicleState& state, const StateDerivative& d);

/// Classical RK4 step for x' = f(x); Vec needs + and scalar *.
template <class Vec, class F>
Vec rk4_step(F&& f, const Vec& x, double dt) {
  const Vec k1 = f(x);
  const Vec k2 = f(Vec(x + (0.5 * dt) * k1));
  const Vec k3 = f(Vec(x + (0.5 * dt) * k2));
  const Vec k4 = f(Vec(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One classical RK4 step with the input held over [t, t + dt].
VehicleState step_rk4(const VehicleState& state, const ControlInput& input, double dt,
                      const VehicleParams& params);

/// Simulates the scenario and samples one snapshot every dt, starting at t = 0.
Trajectory run_scenario(const Scenario& scenario);

}  // namespace dkv
