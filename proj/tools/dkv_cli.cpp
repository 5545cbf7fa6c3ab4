// dkv: simulate vehicle data, train deep Koopman models, run online
// adaptation and produce comparison reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "dkv/adapt.hpp"
#include "dkv/checkpoint.hpp"
#include "dkv/eval.hpp"
#include "dkv/koopman.hpp"
#include "dkv/scenarios.hpp"
#include "dkv/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace dkv;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Configuration errors detected after parsing (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return os;
}

bool parse_on_off(const std::string& flag, const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw UsageError(flag + " expects 'on' or 'off', got '" + v + "'");
}

struct SimulateArgs {
  std::string scenario = "mixed-excitation";
  std::optional<double> duration;
  double dt = 0.025;
  int substeps = 1;
  std::uint64_t seed = 7;
  double mass_delta = 0.0;
  double inertia_delta = 0.0;
  std::optional<double> mu;
  std::string out = "trajectory.csv";
};

struct TrainArgs {
  std::string data;
  std::string out = "model.json";
  std::string log;
  std::string resume;
  std::uint64_t seed = 0;
  std::string accel_loss = "on";
  int epochs = 200;
  std::vector<int> hidden{32, 32, 32};
  int p = 12;
  std::string activation = "tanh";
  double lr = 1e-3;
  int batch = 20;
  double dt = 0.025;
  double train_fraction = 0.7;
  double w_linear = 1.0, w_recon = 1.0, w_pred = 1.0, w_accel = 1.0;
  std::string norms = "squared";
  std::string warm_start = "on";
};

struct CompareArgs {
  std::string dk;
  std::string aldk;
  std::vector<std::string> methods{"PHYS-BASELINE", "DK", "ALDK", "ALDK-RLS", "ALDK-FFRLS", "ALDK-SWLS"};
  std::vector<std::string> scenarios;
  std::uint64_t seed = 0;
  double duration = 300.0;
  int window = 100;
  double ffrls_lambda = 0.999;
  std::vector<int> sweep_window;
  std::string out = "report";
};

struct AdaptArgs {
  std::string model;
  std::string data;
  std::string scenario;
  std::uint64_t seed = 7;
  std::optional<double> duration;
  double mass_delta = 0.0;
  double inertia_delta = 0.0;
  std::optional<double> mu;
  std::string mode = "swls";
  int window = 100;
  double lambda = 0.999;
  double eps_reg = 0.0;
  double eps_reg_rel = 1e-8;
  std::string solver = "batch_window";
  double p0_scale = 1e4;
  std::string out = "predictions.csv";
  std::string history;
};

struct InspectArgs {
  std::string model;
};

// ---- simulate ------------------------------------------------------------

int cmd_simulate(const SimulateArgs& a) {
  ScenarioOptions o;
  o.duration = a.duration;
  o.dt = a.dt;
  o.substeps = a.substeps;
  o.seed = a.seed;
  o.mass_delta = a.mass_delta;
  o.inertia_delta = a.inertia_delta;
  o.mu = a.mu;
  Scenario sc;
  try {
    sc = make_scenario(a.scenario, o);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::printf("scenario %s: %s\nduration %g s, dt %g s, m %g kg, Iz %g kg m^2, mu %g\n", sc.name.c_str(),
              sc.description.c_str(), sc.duration, sc.dt, sc.params.m, sc.params.Iz, sc.params.mu);
  const Trajectory traj = run_scenario(sc);
  write_trajectory(a.out, traj);
  std::printf("wrote %zu snapshots to %s\n", traj.size(), a.out.c_str());
  std::printf("train/test boundary (70/30): %zu\n", split_boundary(traj.size(), 0.7));
  return 0;
}

// ---- train ---------------------------------------------------------------

nlohmann::json train_config_json(const TrainConfig& c, const KoopmanDims& dims, const std::string& data) {
  return {{"data", data},
          {"seed", c.seed},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"dt", c.dt},
          {"train_fraction", c.train_fraction},
          {"hidden", c.hidden},
          {"p", dims.p},
          {"activation", to_string(c.activation)},
          {"squared_norms", c.squared_norms},
          {"edmd_warm_start", c.edmd_warm_start},
          {"w_linear", c.weights.linear},
          {"w_recon", c.weights.recon},
          {"w_pred", c.weights.pred},
          {"w_accel", c.weights.accel}};
}

int cmd_train(const TrainArgs& a) {
  TrainConfig c;
  c.seed = a.seed;
  c.epochs = a.epochs;
  c.learning_rate = a.lr;
  c.batch_size = a.batch;
  c.dt = a.dt;
  c.train_fraction = a.train_fraction;
  c.hidden = a.hidden;
  c.weights = {a.w_linear, a.w_recon, a.w_pred, parse_on_off("--accel-loss", a.accel_loss) ? a.w_accel : 0.0};
  c.edmd_warm_start = parse_on_off("--warm-start", a.warm_start);
  if (a.norms != "squared" && a.norms != "plain") throw UsageError("--norms expects 'squared' or 'plain'");
  c.squared_norms = a.norms == "squared";
  KoopmanDims dims;
  dims.p = a.p;
  try {
    c.activation = parse_activation(a.activation);
    c.validate();
    dims.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Trajectory traj = read_trajectory(a.data);
  std::optional<KoopmanModel> resume;
  if (!a.resume.empty()) resume = load_checkpoint(a.resume);

  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  std::ofstream log = open_out(log_path);
  log << "epoch,loss_total,loss_linear,loss_recon,loss_pred,loss_accel,holdout_total\n";
  const int report_every = std::max(1, c.epochs / 20);
  auto observer = [&](const TrainLogRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train.total,
                  r.train.linear, r.train.recon, r.train.pred, r.train.accel, r.holdout_total);
    log << buf;
    if (r.epoch % report_every == 0) {
      std::printf("epoch %d  train %.4e  held-out %.4e\n", r.epoch, r.train.total, r.holdout_total);
      std::fflush(stdout);
    }
  };
  const TrainResult res = train(traj, dims, c, resume ? &*resume : nullptr, observer);
  if (!log) throw std::runtime_error("write to '" + log_path + "' failed");

  save_checkpoint(a.out, res.model, train_config_json(c, dims, a.data));
  std::printf("best held-out epoch %d of %d; checkpoint %s, log %s\n", res.best_epoch,
              res.model.epochs_trained, a.out.c_str(), log_path.c_str());
  return 0;
}

// ---- compare -------------------------------------------------------------

struct LoadedModels {
  std::optional<KoopmanModel> dk;
  std::optional<KoopmanModel> aldk;
};

const KoopmanModel& require_model(const std::optional<KoopmanModel>& m, const std::string& path,
                                  const std::string& method, const std::string& flag) {
  if (!m) {
    throw std::runtime_error("method '" + method + "' needs a checkpoint: " +
                             (path.empty() ? flag + " was not given" : "'" + path + "' could not be loaded"));
  }
  return *m;
}

std::optional<KoopmanModel> try_load(const std::string& path, const std::string& flag) {
  if (path.empty()) return std::nullopt;
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "warning: %s %s: %s\n", flag.c_str(), path.c_str(), e.what());
    return std::nullopt;
  }
}

std::vector<MethodSpec> build_methods(const CompareArgs& a, const LoadedModels& models, int window) {
  std::vector<MethodSpec> out;
  for (const std::string& name : a.methods) {
    MethodSpec s;
    s.name = name;
    if (name == "PHYS-BASELINE") {
      s.kind = MethodKind::PhysicsBaseline;
      s.assumed = default_baseline_params();
    } else if (name == "DK") {
      s.model = &require_model(models.dk, a.dk, name, "--dk");
    } else if (name == "ALDK") {
      s.model = &require_model(models.aldk, a.aldk, name, "--aldk");
    } else if (name == "ALDK-RLS" || name == "ALDK-FFRLS" || name == "ALDK-SWLS") {
      s.kind = MethodKind::Adaptive;
      s.model = &require_model(models.aldk, a.aldk, name, "--aldk");
      if (name == "ALDK-RLS") {
        s.adapter.mode = AdapterMode::Rls;
      } else if (name == "ALDK-FFRLS") {
        s.adapter.mode = AdapterMode::Ffrls;
        s.adapter.lambda = a.ffrls_lambda;
      } else {
        s.adapter.mode = AdapterMode::Swls;
        s.adapter.window = window;
      }
    } else {
      throw UsageError("unknown method '" + name +
                       "' (known: PHYS-BASELINE, DK, ALDK, ALDK-RLS, ALDK-FFRLS, ALDK-SWLS)");
    }
    out.push_back(s);
  }
  return out;
}

std::string file_stem(const std::string& scenario) {
  std::string s = scenario;
  for (char& ch : s) {
    if (ch == '+') ch = 'p';
    if (ch == '/' || ch == ' ') ch = '_';
  }
  return s;
}

/// Open-loop rollouts of the offline models, for plotting only.
void write_openloop(const fs::path& file, const std::vector<MethodSpec>& methods, const Trajectory& traj) {
  std::vector<std::pair<std::string, std::vector<VehicleState>>> runs;
  for (const MethodSpec& m : methods) {
    if (m.kind != MethodKind::Koopman || m.model == nullptr) continue;
    runs.emplace_back(m.name, rollout(*m.model, traj, traj.size() - 1, RolloutMode::OpenLoop));
  }
  if (runs.empty()) return;
  std::ofstream os = open_out(file);
  os << "t,Vx,Vy,wr";
  for (const auto& [name, pred] : runs) os << ',' << name << "_Vx," << name << "_Vy," << name << "_wr";
  os << '\n';
  char buf[64];
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const VehicleState& x = traj[k].state;
    std::snprintf(buf, sizeof buf, "%.17g", traj[k].t);
    os << buf;
    for (double v : {x.Vx, x.Vy, x.wr}) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    for (const auto& [name, pred] : runs) {
      for (double v : {pred[k - 1].Vx, pred[k - 1].Vy, pred[k - 1].wr}) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        os << buf;
      }
    }
    os << '\n';
  }
}

std::vector<ComparisonReport> run_reports(const CompareArgs& a, const std::vector<MethodSpec>& methods,
                                          const std::vector<Scenario>& suite,
                                          const std::vector<Trajectory>& trajs, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<ComparisonReport> reports;
  std::ofstream summary = open_out(dir / "summary.csv");
  summary << "scenario,method,channel,max,rmse\n";
  for (std::size_t i = 0; i < suite.size(); ++i) {
    ComparisonReport r = run_comparison(methods, suite[i], trajs[i]);
    const std::string stem = file_stem(r.scenario);
    {
      std::ofstream os = open_out(dir / (stem + ".txt"));
      write_report_table(os, r);
    }
    {
      std::ofstream os = open_out(dir / (stem + "_metrics.csv"));
      write_metrics_csv(os, r);
    }
    {
      std::ofstream os = open_out(dir / (stem + "_errors.csv"));
      write_error_series(os, r);
    }
    write_openloop(dir / (stem + "_openloop.csv"), methods, trajs[i]);
    char buf[256];
    for (const MethodResult& m : r.methods) {
      for (std::size_t c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%.17g,%.17g\n", r.scenario.c_str(), m.name.c_str(),
                      kChannelNames[c], m.metrics.max_abs[c], m.metrics.rmse[c]);
        summary << buf;
      }
    }
    write_report_table(std::cout, r);
    for (const MethodResult& m : r.methods) std::printf("  %-16s %.2f s\n", m.name.c_str(), m.runtime_s);
    std::cout << '\n';
    reports.push_back(std::move(r));
  }
  (void)a;
  return reports;
}

int cmd_compare(const CompareArgs& a) {
  if (a.methods.empty()) throw UsageError("--methods is empty");
  std::vector<Scenario> suite;
  {
    std::vector<Scenario> all = scenario_suite(a.seed, a.duration);
    if (a.scenarios.empty()) {
      suite = all;
    } else {
      for (const std::string& name : a.scenarios) {
        auto it = std::find_if(all.begin(), all.end(), [&](const Scenario& s) { return s.name == name; });
        if (it == all.end()) {
          std::string known;
          for (const Scenario& s : all) known += (known.empty() ? "" : ", ") + s.name;
          throw UsageError("unknown suite scenario '" + name + "' (known: " + known + ")");
        }
        suite.push_back(*it);
      }
    }
  }

  LoadedModels models;
  models.dk = try_load(a.dk, "--dk");
  models.aldk = try_load(a.aldk, "--aldk");

  std::vector<Trajectory> trajs;
  for (const Scenario& s : suite) trajs.push_back(run_scenario(s));

  const fs::path out(a.out);
  if (a.sweep_window.empty()) {
    run_reports(a, build_methods(a, models, a.window), suite, trajs, out);
    std::printf("reports written to %s\n", out.string().c_str());
    return 0;
  }

  std::map<int, std::vector<ComparisonReport>> by_window;
  for (int M : a.sweep_window) {
    if (M < 1) throw UsageError("--sweep-window values must be >= 1");
    std::printf("== window M = %d ==\n", M);
    by_window[M] = run_reports(a, build_methods(a, models, M), suite, trajs, out / ("M" + std::to_string(M)));
  }
  std::ofstream sweep = open_out(out / "sweep_summary.csv");
  sweep << "M,scenario,method,Vx_rmse,Vy_rmse,wr_rmse\n";
  char buf[256];
  for (int M : a.sweep_window) {
    for (const ComparisonReport& r : by_window[M]) {
      for (const MethodResult& m : r.methods) {
        std::snprintf(buf, sizeof buf, "%d,%s,%s,%.17g,%.17g,%.17g\n", M, r.scenario.c_str(), m.name.c_str(),
                      m.metrics.rmse[0], m.metrics.rmse[1], m.metrics.rmse[2]);
        sweep << buf;
      }
    }
  }
  std::printf("sweep reports written to %s\n", out.string().c_str());
  return 0;
}

// ---- adapt ---------------------------------------------------------------

int cmd_adapt(const AdaptArgs& a) {
  if (a.data.empty() == a.scenario.empty()) throw UsageError("adapt needs exactly one of --data or --scenario");
  AdapterConfig c;
  try {
    c.mode = parse_adapter_mode(a.mode);
    c.solver = parse_swls_solver(a.solver);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  c.window = a.window;
  c.lambda = a.lambda;
  c.eps_reg = a.eps_reg;
  c.eps_reg_rel = a.eps_reg_rel;
  c.p0_scale = a.p0_scale;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const KoopmanModel model = load_checkpoint(a.model);
  Trajectory traj;
  if (!a.data.empty()) {
    traj = read_trajectory(a.data);
  } else {
    ScenarioOptions o;
    o.seed = a.seed;
    o.duration = a.duration;
    o.dt = model.dt;
    o.mass_delta = a.mass_delta;
    o.inertia_delta = a.inertia_delta;
    o.mu = a.mu;
    try {
      traj = run_scenario(make_scenario(a.scenario, o));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (traj.size() < 2) throw std::runtime_error("adapt: trajectory has fewer than two snapshots");

  const AdaptRunResult res = adapt_run(model, traj, c);
  {
    std::ofstream os = open_out(a.out);
    os << "t,Vx,Vy,wr,Vx_true,Vy_true,wr_true\n";
    char buf[256];
    for (std::size_t k = 0; k < res.predictions.size(); ++k) {
      const VehicleState& p = res.predictions[k];
      const VehicleState& t = traj[k + 1].state;
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", traj[k + 1].t, p.Vx, p.Vy,
                    p.wr, t.Vx, t.Vy, t.wr);
      os << buf;
    }
  }
  const std::string hist_path = a.history.empty() ? a.out + ".history.csv" : a.history;
  {
    std::ofstream os = open_out(hist_path);
    write_estimate_history(os, res.history);
  }
  std::vector<VehicleState> truth;
  for (std::size_t k = 1; k < traj.size(); ++k) truth.push_back(traj[k].state);
  const ChannelMetrics m = metrics(res.predictions, truth);
  std::printf("%s one-step-ahead Max/RMSE: Vx %.4f/%.4f km/h  Vy %.4f/%.4f km/h  wr %.4f/%.4f deg/s\n",
              to_string(c.mode).c_str(), m.max_abs[0], m.rmse[0], m.max_abs[1], m.rmse[1], m.max_abs[2],
              m.rmse[2]);
  std::printf("predictions %s, estimate history %s\n", a.out.c_str(), hist_path.c_str());
  return 0;
}

// ---- inspect -------------------------------------------------------------

int cmd_inspect(const InspectArgs& a) {
  const KoopmanModel m = load_checkpoint(a.model);
  std::printf("checkpoint: %s\n", a.model.c_str());
  std::printf("dims: n=%d m=%d p=%d (lifted %d)\n", m.dims.n, m.dims.m, m.dims.p, m.dims.lifted());
  std::printf("dt: %g s, epochs trained: %d\n", m.dt, m.epochs_trained);
  std::printf("loss weights: linear %g, recon %g, pred %g, accel %g (%s norms)\n", m.weights.linear,
              m.weights.recon, m.weights.pred, m.weights.accel, m.squared_norms ? "squared" : "plain");
  auto describe = [](const char* label, const MlpNetwork& net) {
    std::printf("%s:", label);
    for (const DenseLayer& l : net.layers()) {
      std::printf(" %ldx%ld/%s", static_cast<long>(l.W.rows()), static_cast<long>(l.W.cols()),
                  to_string(l.activation).c_str());
    }
    std::printf("  (%ld parameters)\n", static_cast<long>(net.parameter_count()));
  };
  describe("encoder", m.encoder);
  describe("decoder", m.decoder);
  const Eigen::VectorXcd eig = m.A.eigenvalues();
  std::printf("A: %ldx%ld, spectral radius %.6f\n", static_cast<long>(m.A.rows()), static_cast<long>(m.A.cols()),
              eig.cwiseAbs().maxCoeff());
  std::printf("B: %ldx%ld, Frobenius norm %.6g\n", static_cast<long>(m.B.rows()), static_cast<long>(m.B.cols()),
              m.B.norm());
  const char* names[] = {"Vx", "Vy", "wr"};
  for (int i = 0; i < m.state_norm.dim() && i < 3; ++i) {
    std::printf("state range %s: [%g, %g]\n", names[i], m.state_norm.min(i), m.state_norm.max(i));
  }
  const char* inputs[] = {"T", "delta_f"};
  for (int i = 0; i < m.input_norm.dim() && i < 2; ++i) {
    std::printf("input range %s: [%g, %g]\n", inputs[i], m.input_norm.min(i), m.input_norm.max(i));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Koopman vehicle-dynamics toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file; keys go under [simulate], [train], ... sections");
  app.option_defaults()->always_capture_default();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate a scenario and write its trajectory CSV");
  s->add_option("--scenario", sim.scenario, "mixed-excitation, slalom, step-steer, constant-radius, aggressive-cornering");
  s->add_option("--duration", sim.duration, "seconds (scenario default if unset)")->default_str("scenario")->check(CLI::PositiveNumber);
  s->add_option("--dt", sim.dt, "sample time [s]")->check(CLI::PositiveNumber);
  s->add_option("--substeps", sim.substeps, "RK4 substeps per sample")->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "excitation seed");
  s->add_option("--mass-delta", sim.mass_delta, "added mass [kg]");
  s->add_option("--inertia-delta", sim.inertia_delta, "added yaw inertia [kg m^2]");
  s->add_option("--mu", sim.mu, "road friction (scenario default if unset)")->default_str("scenario")->check(CLI::PositiveNumber);
  s->add_option("--out", sim.out, "output CSV");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a deep Koopman model (DK or ALDK)");
  t->add_option("--data", tr.data, "trajectory CSV")->required();
  t->add_option("--out", tr.out, "checkpoint path");
  t->add_option("--log", tr.log, "training log CSV (default <out>.log.csv)");
  t->add_option("--resume", tr.resume, "continue training from this checkpoint");
  t->add_option("--seed", tr.seed, "training seed")->required();
  t->add_option("--accel-loss", tr.accel_loss, "on: ALDK, off: DK (w_accel = 0)");
  t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
  t->add_option("--hidden", tr.hidden, "hidden layer widths")->delimiter(',');
  t->add_option("--p", tr.p, "learned feature count")->check(CLI::PositiveNumber);
  t->add_option("--activation", tr.activation, "tanh, relu or linear");
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_option("--batch", tr.batch, "mini-batch size")->check(CLI::PositiveNumber);
  t->add_option("--dt", tr.dt, "sample time [s]")->check(CLI::PositiveNumber);
  t->add_option("--train-fraction", tr.train_fraction, "chronological train share");
  t->add_option("--w-linear", tr.w_linear);
  t->add_option("--w-recon", tr.w_recon);
  t->add_option("--w-pred", tr.w_pred);
  t->add_option("--w-accel", tr.w_accel, "acceleration-loss weight when --accel-loss on");
  t->add_option("--norms", tr.norms, "squared or plain loss norms");
  t->add_option("--warm-start", tr.warm_start, "on: initialise A, B by least squares");

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Evaluate methods one step ahead on the scenario suite");
  c->add_option("--dk", cmp.dk, "DK checkpoint");
  c->add_option("--aldk", cmp.aldk, "ALDK checkpoint");
  c->add_option("--methods", cmp.methods, "methods in report order")->delimiter(',');
  c->add_option("--scenarios", cmp.scenarios, "subset of the suite (default: all)")->delimiter(',');
  c->add_option("--seed", cmp.seed, "scenario seed")->required();
  c->add_option("--duration", cmp.duration, "seconds per scenario")->check(CLI::PositiveNumber);
  c->add_option("--window", cmp.window, "SWLS window M")->check(CLI::PositiveNumber);
  c->add_option("--ffrls-lambda", cmp.ffrls_lambda, "FFRLS forgetting factor");
  c->add_option("--sweep-window", cmp.sweep_window, "one report per window M")->delimiter(',');
  c->add_option("--out", cmp.out, "output directory");

  AdaptArgs ad;
  auto* d = app.add_subcommand("adapt", "Stream one trajectory through an online adapter");
  d->add_option("--model", ad.model, "checkpoint")->required();
  d->add_option("--data", ad.data, "trajectory CSV");
  d->add_option("--scenario", ad.scenario, "simulate this scenario instead of reading --data");
  d->add_option("--seed", ad.seed, "scenario seed");
  d->add_option("--duration", ad.duration, "scenario duration [s]")->default_str("scenario")->check(CLI::PositiveNumber);
  d->add_option("--mass-delta", ad.mass_delta);
  d->add_option("--inertia-delta", ad.inertia_delta);
  d->add_option("--mu", ad.mu)->default_str("scenario")->check(CLI::PositiveNumber);
  d->add_option("--mode", ad.mode, "swls, rls, ffrls or frozen");
  d->add_option("--window", ad.window, "SWLS window M");
  d->add_option("--lambda", ad.lambda, "FFRLS forgetting factor");
  d->add_option("--eps-reg", ad.eps_reg, "absolute ridge");
  d->add_option("--eps-reg-rel", ad.eps_reg_rel, "ridge relative to trace / dim");
  d->add_option("--solver", ad.solver, "batch_window or recursive_eq33");
  d->add_option("--p0-scale", ad.p0_scale, "RLS initial covariance scale");
  d->add_option("--out", ad.out, "predictions CSV");
  d->add_option("--history", ad.history, "estimate history CSV (default <out>.history.csv)");

  InspectArgs in;
  auto* i = app.add_subcommand("inspect", "Summarise a checkpoint");
  i->add_option("model,--model", in.model, "checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::cout << "# resolved configuration\n[" << sub->get_name() << "]\n"
            << sub->config_to_str(true, false) << std::endl;

  try {
    if (sub == s) return cmd_simulate(sim);
    if (sub == t) return cmd_train(tr);
    if (sub == c) return cmd_compare(cmp);
    if (sub == d) return cmd_adapt(ad);
    return cmd_inspect(in);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
