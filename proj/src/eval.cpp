#include "dkv/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dkv/trajectory_io.hpp"

namespace dkv {

namespace {

constexpr double kMsToKmh = 3.6;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::array<double, 3> report_units(const VehicleState& s) {
  return {s.Vx * kMsToKmh, s.Vy * kMsToKmh, s.wr * kRadToDeg};
}

std::vector<VehicleState> truth_series(const Trajectory& traj) {
  std::vector<VehicleState> out;
  for (std::size_t k = 1; k < traj.size(); ++k) out.push_back(traj[k].state);
  return out;
}

}  // namespace

ChannelMetrics metrics(const std::vector<VehicleState>& predicted, const std::vector<VehicleState>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("metrics: series lengths differ");
  if (predicted.empty()) throw std::invalid_argument("metrics: empty series");
  ChannelMetrics m;
  std::array<double, 3> sq{};
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    const auto p = report_units(predicted[k]);
    const auto t = report_units(truth[k]);
    for (std::size_t c = 0; c < 3; ++c) {
      const double e = std::abs(p[c] - t[c]);
      m.max_abs[c] = std::max(m.max_abs[c], e);
      sq[c] += e * e;
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    // Rounding can push sqrt(mean) a hair above max for constant errors.
    m.rmse[c] = std::min(std::sqrt(sq[c] / static_cast<double>(predicted.size())), m.max_abs[c]);
  }
  return m;
}

std::vector<VehicleState> physics_baseline(const VehicleParams& params_assumed, const Trajectory& traj,
                                           double dt) {
  params_assumed.validate();
  std::vector<VehicleState> out;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    out.push_back(step_rk4(traj[k].state, traj[k].input, dt, params_assumed));
  }
  return out;
}

VehicleParams default_baseline_params() {
  VehicleParams p;
  p.drag = 0.0;
  p.roll = 0.0;
  return p;
}

std::vector<MethodSpec> default_methods(const KoopmanModel& dk, const KoopmanModel& aldk, int window) {
  std::vector<MethodSpec> methods;
  MethodSpec phys;
  phys.name = "PHYS-BASELINE";
  phys.kind = MethodKind::PhysicsBaseline;
  phys.assumed = default_baseline_params();
  methods.push_back(phys);

  methods.push_back({"DK", MethodKind::Koopman, &dk, {}, {}});
  methods.push_back({"ALDK", MethodKind::Koopman, &aldk, {}, {}});

  AdapterConfig rls;
  rls.mode = AdapterMode::Rls;
  methods.push_back({"ALDK-RLS", MethodKind::Adaptive, &aldk, rls, {}});

  AdapterConfig ffrls;
  ffrls.mode = AdapterMode::Ffrls;
  ffrls.lambda = 0.999;
  methods.push_back({"ALDK-FFRLS", MethodKind::Adaptive, &aldk, ffrls, {}});

  AdapterConfig swls;
  swls.mode = AdapterMode::Swls;
  swls.window = window;
  methods.push_back({"ALDK-SWLS", MethodKind::Adaptive, &aldk, swls, {}});
  return methods;
}

const MethodResult& ComparisonReport::method(const std::string& name) const {
  for (const MethodResult& m : methods) {
    if (m.name == name) return m;
  }
  throw std::out_of_range("report has no method '" + name + "'");
}

ComparisonReport run_comparison(const std::vector<MethodSpec>& methods, const Scenario& scenario) {
  return run_comparison(methods, scenario, run_scenario(scenario));
}

ComparisonReport run_comparison(const std::vector<MethodSpec>& methods, const Scenario& scenario,
                                const Trajectory& traj) {
  if (traj.size() < 2) throw std::invalid_argument("comparison: trajectory too short");
  ComparisonReport report;
  report.scenario = scenario.name;
  report.description = scenario.description;
  report.snapshots = traj.size();
  report.trajectory_hash = trajectory_hash(traj);
  report.trajectory = traj;

  std::ostringstream fp;
  fp.precision(17);
  fp << "scenario=" << scenario.name << ";duration=" << scenario.duration << ";dt=" << scenario.dt
     << ";m=" << scenario.params.m << ";Iz=" << scenario.params.Iz << ";mu=" << scenario.params.mu;

  const std::vector<VehicleState> truth = truth_series(traj);
  for (const MethodSpec& spec : methods) {
    for (const MethodResult& done : report.methods) {
      if (done.name == spec.name) throw std::invalid_argument("comparison: duplicate method '" + spec.name + "'");
    }
    if (spec.kind != MethodKind::PhysicsBaseline && spec.model == nullptr) {
      throw std::invalid_argument("comparison: method '" + spec.name + "' has no model");
    }
    MethodResult r;
    r.name = spec.name;
    const auto start = std::chrono::steady_clock::now();
    switch (spec.kind) {
      case MethodKind::PhysicsBaseline:
        r.predictions = physics_baseline(spec.assumed, traj, scenario.dt);
        fp << ";" << spec.name << "=phys(m=" << spec.assumed.m << ",Iz=" << spec.assumed.Iz
           << ",drag=" << spec.assumed.drag << ",roll=" << spec.assumed.roll << ")";
        break;
      case MethodKind::Koopman:
        r.predictions = rollout(*spec.model, traj, traj.size() - 1, RolloutMode::OneStepAhead);
        fp << ";" << spec.name << "=koopman(epochs=" << spec.model->epochs_trained
           << ",w_accel=" << spec.model->weights.accel << ")";
        break;
      case MethodKind::Adaptive:
        r.predictions = adapt_run(*spec.model, traj, spec.adapter).predictions;
        fp << ";" << spec.name << "=" << to_string(spec.adapter.mode) << "(M=" << spec.adapter.window
           << ",lambda=" << spec.adapter.lambda << ",eps=" << spec.adapter.eps_reg
           << ",eps_rel=" << spec.adapter.eps_reg_rel << ")";
        break;
    }
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.metrics = metrics(r.predictions, truth);
    r.trajectory_hash = report.trajectory_hash;
    report.methods.push_back(std::move(r));
  }
  report.fingerprint = fp.str();
  return report;
}

std::vector<Scenario> scenario_suite(std::uint64_t seed, double duration) {
  std::vector<Scenario> suite;
  auto add = [&](const std::string& base, const std::string& label, double mass_delta,
                 double inertia_delta, std::optional<double> mu) {
    ScenarioOptions o;
    o.seed = seed;
    o.duration = duration;
    o.mass_delta = mass_delta;
    o.inertia_delta = inertia_delta;
    o.mu = mu;
    Scenario sc = make_scenario(base, o);
    sc.name = label;
    suite.push_back(std::move(sc));
  };
  add("mixed-excitation", "nominal", 0.0, 0.0, {});
  add("mixed-excitation", "mass+160", 160.0, 0.0, {});
  add("mixed-excitation", "mass-170", -170.0, 0.0, {});
  add("mixed-excitation", "inertia+142", 0.0, 142.0, {});
  add("mixed-excitation", "inertia-158", 0.0, -158.0, {});
  add("slalom", "slalom-mu0.6", 0.0, 0.0, 0.6);
  add("aggressive-cornering", "mountain-analogue", 0.0, 0.0, {});
  suite.back().description += " [planar emulation, no elevation]";
  return suite;
}

void write_report_table(std::ostream& os, const ComparisonReport& report) {
  char buf[256];
  os << "Scenario: " << report.scenario << " (" << report.description << ")\n";
  std::snprintf(buf, sizeof buf, "Snapshots: %zu  trajectory hash: %016llx\n", report.snapshots,
                static_cast<unsigned long long>(report.trajectory_hash));
  os << buf;
  os << "One-step-ahead estimation error, Max/RMSE\n";
  std::snprintf(buf, sizeof buf, "%-16s %-22s %-22s %-22s\n", "Method", "Vx [km/h]", "Vy [km/h]", "wr [deg/s]");
  os << buf;
  for (const MethodResult& m : report.methods) {
    std::snprintf(buf, sizeof buf, "%-16s", m.name.c_str());
    os << buf;
    for (std::size_t c = 0; c < 3; ++c) {
      char cell[64];
      std::snprintf(cell, sizeof cell, "%.4f/%.4f", m.metrics.max_abs[c], m.metrics.rmse[c]);
      std::snprintf(buf, sizeof buf, " %-22s", cell);
      os << buf;
    }
    os << '\n';
  }
  os << "Fingerprint: " << report.fingerprint << '\n';
}

void write_metrics_csv(std::ostream& os, const ComparisonReport& report) {
  os << "method,channel,max,rmse\n";
  char buf[256];
  for (const MethodResult& m : report.methods) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g\n", m.name.c_str(), kChannelNames[c],
                    m.metrics.max_abs[c], m.metrics.rmse[c]);
      os << buf;
    }
  }
}

void write_error_series(std::ostream& os, const ComparisonReport& report) {
  os << "t";
  for (const MethodResult& m : report.methods) {
    for (const char* ch : kChannelNames) os << ',' << m.name << '_' << ch;
  }
  os << '\n';
  char buf[64];
  for (std::size_t k = 1; k < report.trajectory.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", report.trajectory[k].t);
    os << buf;
    const auto truth = report_units(report.trajectory[k].state);
    for (const MethodResult& m : report.methods) {
      const auto pred = report_units(m.predictions[k - 1]);
      for (std::size_t c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, ",%.17g", pred[c] - truth[c]);
        os << buf;
      }
    }
    os << '\n';
  }
}

}  // namespace dkv
