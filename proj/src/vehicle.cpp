#include "dkv/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dkv {

void MagicFormulaParams::validate() const {
  if (!(B_stiff > 0.0) || !(C_shape > 0.0) || !(D_peak_scale > 0.0 && D_peak_scale <= 1.2) ||
      !(E_curv < 1.0)) {
    throw std::invalid_argument("magic formula: require B > 0, C > 0, 0 < D <= 1.2, E < 1");
  }
}

void VehicleParams::validate() const {
  if (!(m > 0.0) || !(Iz > 0.0) || !(lf > 0.0) || !(lr > 0.0) || !(wB > 0.0) || !(rw > 0.0)) {
    throw std::invalid_argument("vehicle params: m, Iz, lf, lr, wB, rw must be positive");
  }
  if (!(mu > 0.0 && mu <= 1.2)) {
    throw std::invalid_argument("vehicle params: mu must lie in (0, 1.2]");
  }
  if (drag < 0.0 || roll < 0.0 || !(torque_limit > 0.0)) {
    throw std::invalid_argument("vehicle params: drag, roll >= 0 and torque_limit > 0");
  }
  tire.validate();
}

void Scenario::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("scenario '" + name + "': dt must be positive");
  if (!(duration >= dt)) throw std::invalid_argument("scenario '" + name + "': duration < dt");
  if (substeps < 1) throw std::invalid_argument("scenario '" + name + "': substeps < 1");
  if (!input_program) throw std::invalid_argument("scenario '" + name + "': no input program");
  params.validate();
}

double tire_lateral_force(double alpha, double Fz, const MagicFormulaParams& tire, double mu) {
  if (!std::isfinite(alpha)) throw std::domain_error("tire_lateral_force: non-finite slip angle");
  if (!(Fz > 0.0)) throw std::domain_error("tire_lateral_force: normal load must be positive");
  const double D = mu * tire.D_peak_scale * Fz;
  const double Ba = tire.B_stiff * alpha;
  return D * std::sin(tire.C_shape * std::atan(Ba - tire.E_curv * (Ba - std::atan(Ba))));
}

StateDerivative derivatives(const VehicleState& s, const ControlInput& u, const VehicleParams& p) {
  if (!std::isfinite(s.Vx) || !std::isfinite(s.Vy) || !std::isfinite(s.wr) ||
      !std::isfinite(u.T) || !std::isfinite(u.delta_f)) {
    throw std::domain_error("derivatives: non-finite state or input");
  }
  if (!(s.Vx > kMinSpeed)) {
    std::ostringstream msg;
    msg << "derivatives: Vx = " << s.Vx << " m/s is below the model validity floor " << kMinSpeed;
    throw std::domain_error(msg.str());
  }

  const double half_track = 0.5 * p.wB * s.wr;
  // Wheels: 1 front-left, 2 front-right, 3 rear-left, 4 rear-right.
  const double alpha1 = u.delta_f - std::atan2(s.Vy + p.lf * s.wr, s.Vx - half_track);
  const double alpha2 = u.delta_f - std::atan2(s.Vy + p.lf * s.wr, s.Vx + half_track);
  const double alpha3 = -std::atan2(s.Vy - p.lr * s.wr, s.Vx - half_track);
  const double alpha4 = -std::atan2(s.Vy - p.lr * s.wr, s.Vx + half_track);

  const double Fzf = p.front_wheel_load();
  const double Fzr = p.rear_wheel_load();
  const double Fy1 = tire_lateral_force(alpha1, Fzf, p.tire, p.mu);
  const double Fy2 = tire_lateral_force(alpha2, Fzf, p.tire, p.mu);
  const double Fy3 = tire_lateral_force(alpha3, Fzr, p.tire, p.mu);
  const double Fy4 = tire_lateral_force(alpha4, Fzr, p.tire, p.mu);

  const double Fx = 0.25 * (u.T / p.rw - p.resistance(s.Vx));
  const double Fx1 = Fx, Fx2 = Fx, Fx3 = Fx, Fx4 = Fx;

  const double c = std::cos(u.delta_f);
  const double sn = std::sin(u.delta_f);

  StateDerivative d;
  d.dVx = ((Fx1 + Fx2) * c - (Fy1 + Fy2) * sn) / p.m + (Fx3 + Fx4) / p.m + s.Vy * s.wr;
  d.dVy = ((Fx1 + Fx2) * sn + (Fy1 + Fy2) * c) / p.m + (Fy3 + Fy4) / p.m - s.Vx * s.wr;
  d.dwr = p.wB / (2.0 * p.Iz) * ((Fx2 * c - Fy2 * sn) + Fx4 - (Fx1 * c - Fy1 * sn) - Fx3) +
          (Fx2 * sn + Fy2 * c + Fx1 * sn + Fy1 * c) * p.lf / p.Iz - (Fy3 + Fy4) * p.lr / p.Iz;
  return d;
}

BodyAccel sensor_accels(const VehicleState& s, const StateDerivative& d) {
  return {d.dVx - s.Vy * s.wr, d.dVy + s.Vx * s.wr};
}

VehicleState step_rk4(const VehicleState& s, const ControlInput& u, double dt,
                      const VehicleParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: dt must be positive");
  auto f = [&](const Eigen::Vector3d& x) -> Eigen::Vector3d {
    const StateDerivative d = derivatives(VehicleState::from(x), u, p);
    return {d.dVx, d.dVy, d.dwr};
  };
  return VehicleState::from(rk4_step(f, s.vec(), dt));
}

Trajectory run_scenario(const Scenario& sc) {
  sc.validate();
  const auto steps = static_cast<long>(std::llround(sc.duration / sc.dt));
  const double h = sc.dt / sc.substeps;
  const double steer_limit = std::numbers::pi / 4.0;

  Trajectory out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  VehicleState state = sc.initial_state;
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * sc.dt;
    ControlInput u = sc.input_program(t);
    u.T = std::clamp(u.T, -sc.params.torque_limit, sc.params.torque_limit);
    u.delta_f = std::clamp(u.delta_f, -steer_limit, steer_limit);
    try {
      const StateDerivative d = derivatives(state, u, sc.params);
      const BodyAccel acc = sensor_accels(state, d);
      out.push_back({t, state, u, acc.ax, acc.ay});
      if (i == steps) break;
      for (int j = 0; j < sc.substeps; ++j) state = step_rk4(state, u, h, sc.params);
    } catch (const std::domain_error& e) {
      std::ostringstream msg;
      msg << "scenario '" << sc.name << "' failed at t = " << t << " s: " << e.what();
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

}  // namespace dkv
