#include "dkv/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dkv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Piecewise-linear interpolant, clamped outside its knots.
class PiecewiseLinear {
 public:
  void add(double t, double v) {
    t_.push_back(t);
    v_.push_back(v);
  }

  double operator()(double t) const {
    if (t <= t_.front()) return v_.front();
    if (t >= t_.back()) return v_.back();
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const auto i = static_cast<std::size_t>(it - t_.begin());
    const double w = (t - t_[i - 1]) / (t_[i] - t_[i - 1]);
    return v_[i - 1] + w * (v_[i] - v_[i - 1]);
  }

  double slope(double t) const {
    if (t < t_.front() || t >= t_.back()) return 0.0;
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const auto i = static_cast<std::size_t>(it - t_.begin());
    return (v_[i] - v_[i - 1]) / (t_[i] - t_[i - 1]);
  }

 private:
  std::vector<double> t_, v_;
};

enum class LateralKind { Straight, Curve, Chirp, LaneChange };

struct LateralSegment {
  double start = 0.0;
  double length = 0.0;
  LateralKind kind = LateralKind::Straight;
  double amplitude = 0.0;  // m/s^2
  double f0 = 0.0, f1 = 0.0;
};

/// Target lateral acceleration as a sequence of maneuver segments.
class LateralProgram {
 public:
  void add(LateralSegment s) { segs_.push_back(s); }

  double operator()(double t) const {
    auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                               [](double x, const LateralSegment& s) { return x < s.start; });
    if (it == segs_.begin()) return 0.0;
    const LateralSegment& s = *(it - 1);
    const double tau = t - s.start;
    if (tau > s.length) return 0.0;
    switch (s.kind) {
      case LateralKind::Straight:
        return 0.0;
      case LateralKind::Curve: {
        const double ramp = std::min(1.5, 0.3 * s.length);
        const double w = std::min({1.0, tau / ramp, (s.length - tau) / ramp});
        return s.amplitude * w;
      }
      case LateralKind::Chirp: {
        const double phase = kTwoPi * (s.f0 * tau + 0.5 * (s.f1 - s.f0) * tau * tau / s.length);
        return s.amplitude * std::sin(phase);
      }
      case LateralKind::LaneChange:
        return s.amplitude * std::sin(kTwoPi * tau / s.length);
    }
    return 0.0;
  }

 private:
  std::vector<LateralSegment> segs_;
};

struct Dither {
  double amplitude, freq, phase;
};

struct ProgramSpec {
  double v_min, v_max;
  double seg_min, seg_max;
  double lat_max;
  double dither_amp;
};

/// Seeded speed plan + lateral maneuvers. Torque is the feedforward needed
/// to follow the plan plus a sum-of-sines dither; steering is the kinematic
/// angle for the target lateral acceleration at the planned speed.
InputProgram seeded_program(const VehicleParams& p, double duration, double v0,
                            std::uint64_t seed, const ProgramSpec& spec) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  auto speed = std::make_shared<PiecewiseLinear>();
  speed->add(0.0, v0);
  double t = 0.0;
  while (t < duration) {
    const double len = uniform(15.0, 40.0);
    t += len;
    // Alternate holds and ramps so the plan has steady-speed stretches.
    if (unit(rng) < 0.35) {
      speed->add(t, (*speed)(t - len));
    } else {
      speed->add(t, uniform(spec.v_min, spec.v_max));
    }
  }

  auto lateral = std::make_shared<LateralProgram>();
  t = 2.0;
  while (t < duration) {
    LateralSegment s;
    s.start = t;
    s.length = uniform(spec.seg_min, spec.seg_max);
    const double r = unit(rng);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    if (r < 0.2) {
      s.kind = LateralKind::Straight;
    } else if (r < 0.55) {
      s.kind = LateralKind::Curve;
      s.amplitude = sign * uniform(0.3, spec.lat_max);
    } else if (r < 0.8) {
      s.kind = LateralKind::Chirp;
      s.amplitude = sign * uniform(0.5, 0.7 * spec.lat_max);
      s.f0 = uniform(0.05, 0.15);
      s.f1 = uniform(0.4, 0.9);
    } else {
      s.kind = LateralKind::LaneChange;
      s.amplitude = sign * uniform(0.5, spec.lat_max);
    }
    lateral->add(s);
    t += s.length;
  }

  auto dither = std::make_shared<std::vector<Dither>>();
  for (int i = 0; i < 3; ++i) {
    dither->push_back({spec.dither_amp * uniform(0.5, 1.0), uniform(0.03, 0.5), uniform(0.0, kTwoPi)});
  }

  return [p, speed, lateral, dither](double time) {
    const double v = (*speed)(time);
    const double a_lat = (*lateral)(time);
    const double delta = a_lat * p.wheelbase() / (v * v);
    // Cornering drag: the front axle carries lr/L of the lateral force.
    const double cornering = p.m * std::abs(a_lat) * p.lr / p.wheelbase() * std::abs(std::sin(delta));
    double T = p.rw * (p.resistance(v) + p.m * speed->slope(time) + cornering);
    for (const Dither& d : *dither) T += d.amplitude * std::sin(kTwoPi * d.freq * time + d.phase);
    return ControlInput{T, delta};
  };
}

VehicleParams perturbed(const ScenarioOptions& o, double default_mu) {
  VehicleParams p;
  p.m += o.mass_delta;
  p.Iz += o.inertia_delta;
  p.mu = o.mu.value_or(default_mu);
  p.validate();
  return p;
}

Scenario base(const std::string& name, const ScenarioOptions& o, double default_duration,
              double default_mu) {
  Scenario sc;
  sc.name = name;
  sc.duration = o.duration.value_or(default_duration);
  sc.dt = o.dt;
  sc.substeps = o.substeps;
  sc.params = perturbed(o, default_mu);
  return sc;
}

Scenario mixed_excitation(const ScenarioOptions& o) {
  Scenario sc = base("mixed-excitation", o, 1400.0, 0.85);
  sc.description = "seeded speed ramps, curves, chirps and lane changes (mu 0.85)";
  const double v0 = 15.0;
  sc.initial_state = {v0, 0.0, 0.0};
  sc.input_program = seeded_program(sc.params, sc.duration, v0, o.seed,
                                    {10.0, 28.0, 4.0, 12.0, 4.5, 150.0});
  return sc;
}

Scenario aggressive_cornering(const ScenarioOptions& o) {
  Scenario sc = base("aggressive-cornering", o, 300.0, 0.85);
  sc.description = "planar stand-in for a mountain road: tight seeded curves from 20 km/h (mu 0.85)";
  const double v0 = 20.0 / 3.6;
  sc.initial_state = {v0, 0.0, 0.0};
  sc.input_program = seeded_program(sc.params, sc.duration, v0, o.seed ^ 0x9e3779b97f4a7c15ULL,
                                    {9.0, 20.0, 2.0, 6.0, 5.0, 300.0});
  return sc;
}

Scenario slalom(const ScenarioOptions& o) {
  Scenario sc = base("slalom", o, 300.0, 0.6);
  sc.description = "sinusoidal steering, 100 s period, 20 -> 120 km/h (mu 0.6)";
  const double v0 = 20.0 / 3.6;
  const double v1 = 120.0 / 3.6;
  const double ramp = 150.0;
  sc.initial_state = {v0, 0.0, 0.0};
  const VehicleParams p = sc.params;
  sc.input_program = [p, v0, v1, ramp](double t) {
    const double accel = t < ramp ? (v1 - v0) / ramp : 0.0;
    const double v = t < ramp ? v0 + accel * t : v1;
    const double T = p.rw * (p.resistance(v) + p.m * accel);
    return ControlInput{T, 0.01 * std::sin(kTwoPi * t / kSlalomPeriod)};
  };
  return sc;
}

Scenario step_steer(const ScenarioOptions& o) {
  Scenario sc = base("step-steer", o, 10.0, 0.85);
  sc.description = "0.03 rad steering step at t = 1 s, 20 m/s";
  sc.initial_state = {20.0, 0.0, 0.0};
  const VehicleParams p = sc.params;
  sc.input_program = [p](double t) {
    return ControlInput{p.rw * p.resistance(20.0), t >= 1.0 ? 0.03 : 0.0};
  };
  return sc;
}

Scenario constant_radius(const ScenarioOptions& o) {
  Scenario sc = base("constant-radius", o, 60.0, 0.85);
  sc.description = "80 m radius circle, speed ramped 8 -> 22 m/s";
  sc.initial_state = {8.0, 0.0, 0.0};
  const VehicleParams p = sc.params;
  const double duration = sc.duration;
  sc.input_program = [p, duration](double t) {
    const double accel = 14.0 / duration;
    const double v = 8.0 + accel * std::min(t, duration);
    return ControlInput{p.rw * (p.resistance(v) + p.m * accel), p.wheelbase() / 80.0};
  };
  return sc;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {"mixed-excitation", "slalom", "step-steer",
                                                 "constant-radius", "aggressive-cornering"};
  return names;
}

Scenario make_scenario(const std::string& name, const ScenarioOptions& opts) {
  if (name == "mixed-excitation") return mixed_excitation(opts);
  if (name == "slalom") return slalom(opts);
  if (name == "step-steer") return step_steer(opts);
  if (name == "constant-radius") return constant_radius(opts);
  if (name == "aggressive-cornering") return aggressive_cornering(opts);
  std::string known;
  for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown scenario '" + name + "' (known: " + known + ")");
}

}  // namespace dkv
