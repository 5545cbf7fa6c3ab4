#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "dkv/checkpoint.hpp"
#include "dkv/scenarios.hpp"
#include "dkv/trajectory_io.hpp"

using namespace dkv;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

/// Runs the CLI with stdout and stderr merged.
Run cli(const std::string& args) {
  const std::string cmd = std::string(DKV_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory per test case.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dkv_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

KoopmanModel trained_like_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KoopmanModel m = KoopmanModel::create({3, 2, 4}, {6, 5}, Activation::Tanh, rng);
  m.A += 0.01 * Eigen::MatrixXd::Random(7, 7);
  m.B = Eigen::MatrixXd::Random(7, 2);
  m.state_norm = {Eigen::Vector3d(1, -2, -0.5), Eigen::Vector3d(30, 2, 0.5)};
  m.input_norm = {Eigen::Vector2d(-500, -0.1), Eigen::Vector2d(2000, 0.1)};
  m.weights = {1, 1, 1, 0.5};
  m.epochs_trained = 17;
  m.dt = 0.025;
  return m;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("trajectory round trip") {
  ScenarioOptions o;
  o.duration = 20.0;
  const Trajectory tr = run_scenario(make_scenario("mixed-excitation", o));
  std::stringstream ss;
  write_trajectory(ss, tr);
  std::string header;
  std::getline(ss, header);
  CHECK(header == kTrajectoryHeader);
  ss.seekg(0);
  const Trajectory back = read_trajectory(ss);
  REQUIRE(back.size() == tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    CHECK(back[k].t == tr[k].t);
    CHECK(back[k].state == tr[k].state);
    CHECK(back[k].input == tr[k].input);
    CHECK(back[k].ax == tr[k].ax);
    CHECK(back[k].ay == tr[k].ay);
  }
  CHECK(trajectory_hash(back) == trajectory_hash(tr));
  Trajectory moved = tr;
  moved[5].state.wr = std::nextafter(moved[5].state.wr, 1.0);
  CHECK(trajectory_hash(moved) != trajectory_hash(tr));
}

TEST_CASE("trajectory parse errors name the line") {
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return read_trajectory(is);
  };
  const std::string h = std::string(kTrajectoryHeader) + "\n";
  CHECK(parse(h + "0,1,2,3,4,5,6,7\n").size() == 1);
  CHECK_THROWS_WITH_AS(parse(h + "0,1,2,3,4,5,6,7\n0.025,1,2,x,4,5,6,7\n"), doctest::Contains("line 3"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(parse(h + "0,1,2,3,4,5,6\n"), doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_WITH_AS(parse(h + "0,1,2,3,4,5,6,7,8\n"), doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_AS(parse("a,b,c\n0,1,2\n"), std::runtime_error);
  CHECK_THROWS_AS(parse(""), std::runtime_error);
  CHECK_THROWS_AS(read_trajectory("/nonexistent/dir/traj.csv"), std::runtime_error);
}

TEST_CASE("checkpoint round trip") {
  const KoopmanModel m = trained_like_model(1);
  const nlohmann::json cfg = {{"seed", 3}, {"epochs", 17}};
  const nlohmann::json j = checkpoint_to_json(m, cfg);
  CHECK(j.at("format") == kCheckpointFormat);
  CHECK(j.at("version") == kCheckpointVersion);
  CHECK(j.at("train_config") == cfg);
  const KoopmanModel b = checkpoint_from_json(nlohmann::json::parse(j.dump()));
  CHECK(b.dims == m.dims);
  CHECK(b.parameters() == m.parameters());
  CHECK(b.state_norm.min == m.state_norm.min);
  CHECK(b.input_norm.max == m.input_norm.max);
  CHECK(b.weights.accel == m.weights.accel);
  CHECK(b.epochs_trained == 17);
  CHECK(b.dt == m.dt);
  const Eigen::VectorXd x = Eigen::Vector3d(0.1, -0.3, 0.2);
  CHECK(lift(b, x) == lift(m, x));

  TempDir dir("ckpt");
  save_checkpoint(dir / "m.json", m);
  CHECK(load_checkpoint(dir / "m.json").parameters() == m.parameters());
}

TEST_CASE("checkpoint errors") {
  const nlohmann::json good = checkpoint_to_json(trained_like_model(2));
  nlohmann::json j = good;
  j["format"] = "other";
  CHECK_THROWS_AS(checkpoint_from_json(j), std::runtime_error);
  j = good;
  j["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(j), std::runtime_error);
  j = good;
  j["A"]["data"].erase(0);
  CHECK_THROWS(checkpoint_from_json(j));
  j = good;
  j.erase("encoder");
  CHECK_THROWS(checkpoint_from_json(j));
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/m.json"), std::runtime_error);
  TempDir dir("ckpt_bad");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), std::runtime_error);
}

TEST_CASE("cli: usage and exit codes") {
  CHECK(cli("").code == 1);
  CHECK(cli("--help").code == 0);
  CHECK(cli("frobnicate").code == 1);
  const Run unknown = cli("simulate --scenario nope --out /dev/null");
  CHECK(unknown.code == 1);
  CHECK(unknown.output.find("known: mixed-excitation, slalom") != std::string::npos);
  CHECK(cli("train --data x.csv").code == 1);  // --seed is mandatory
  CHECK(cli("compare --dk a.json").code == 1);
  CHECK(cli("simulate --scenario slalom --duration -1 --out /dev/null").code == 1);
}

TEST_CASE("cli: simulate") {
  TempDir dir("sim");
  const Run r = cli("simulate --scenario slalom --duration 5 --seed 3 --out " + dir / "a.csv");
  REQUIRE(r.code == 0);
  CHECK(r.output.rfind("# resolved configuration\n[simulate]\n", 0) == 0);
  CHECK(r.output.find("seed=3") != std::string::npos);
  CHECK(r.output.find("wrote 201 snapshots") != std::string::npos);
  const std::string a = slurp(dir / "a.csv");
  CHECK(a.rfind(std::string(kTrajectoryHeader) + "\n", 0) == 0);
  CHECK(read_trajectory(dir / "a.csv").size() == 201);

  REQUIRE(cli("simulate --scenario slalom --duration 5 --seed 3 --out " + dir / "b.csv").code == 0);
  CHECK(slurp(dir / "b.csv") == a);

  // Config file sections, with flags taking precedence.
  std::ofstream(dir / "sim.toml") << "[simulate]\nscenario = \"step-steer\"\nduration = 3\nseed = 5\n";
  const Run c = cli("simulate --config " + dir / "sim.toml" + " --duration 2 --out " + dir / "c.csv");
  REQUIRE(c.code == 0);
  CHECK(c.output.find("scenario=\"step-steer\"") != std::string::npos);
  CHECK(c.output.find("duration=2") != std::string::npos);
  CHECK(read_trajectory(dir / "c.csv").size() == 81);

  CHECK(cli("simulate --scenario slalom --duration 1 --out /nonexistent/dir/a.csv").code == 2);
}

TEST_CASE("cli: train, resume, inspect, adapt") {
  TempDir dir("train");
  REQUIRE(cli("simulate --scenario mixed-excitation --duration 20 --out " + dir / "d.csv").code == 0);
  const std::string common = " --data " + dir / "d.csv" + " --seed 4 --epochs 2 --hidden 8 --p 3 ";
  const Run off = cli("train" + common + "--accel-loss off --out " + dir / "dk.json");
  REQUIRE(off.code == 0);
  CHECK(off.output.find("[train]") != std::string::npos);
  REQUIRE(cli("train" + common + "--accel-loss on --out " + dir / "aldk.json").code == 0);

  auto config_of = [&](const std::string& f) {
    nlohmann::json c = nlohmann::json::parse(slurp(dir / f)).at("train_config");
    return c;
  };
  nlohmann::json c_off = config_of("dk.json"), c_on = config_of("aldk.json");
  CHECK(c_off["w_accel"] == 0.0);
  CHECK(c_on["w_accel"] == 1.0);
  c_off.erase("w_accel");
  c_on.erase("w_accel");
  CHECK(c_off == c_on);

  const std::string log = slurp(dir / "dk.json.log.csv");
  CHECK(log.rfind("epoch,loss_total,loss_linear,loss_recon,loss_pred,loss_accel,holdout_total\n", 0) == 0);
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);

  const Run resumed = cli("train" + common + "--accel-loss off --resume " + dir / "dk.json" + " --out " +
                          dir / "dk2.json");
  REQUIRE(resumed.code == 0);
  const std::string log2 = slurp(dir / "dk2.json.log.csv");
  CHECK(log2.find("\n3,") != std::string::npos);
  CHECK(log2.find("\n4,") != std::string::npos);
  CHECK(log2.find("\n1,") == std::string::npos);
  CHECK(load_checkpoint(dir / "dk2.json").epochs_trained == 4);

  const Run ins = cli("inspect " + dir / "aldk.json");
  REQUIRE(ins.code == 0);
  CHECK(ins.output.find("spectral radius") != std::string::npos);

  const Run ad = cli("adapt --model " + dir / "aldk.json" + " --scenario slalom --duration 5 --mode swls --out " +
                     dir / "pred.csv" + " --history " + dir / "hist.csv");
  REQUIRE(ad.code == 0);
  CHECK(slurp(dir / "pred.csv").rfind("t,Vx,Vy,wr,Vx_true,Vy_true,wr_true\n", 0) == 0);
  CHECK(slurp(dir / "hist.csv").rfind("k,frob_dA,frob_dB,cond_gram\n", 0) == 0);
  CHECK(cli("adapt --model " + dir / "aldk.json").code == 1);

  // Malformed dataset reports its row.
  std::ofstream(dir / "bad.csv") << kTrajectoryHeader << "\n0,1,2,3,4,5,6,7\n0.025,1,2,3,oops,5,6,7\n";
  const Run bad = cli("train --data " + dir / "bad.csv" + " --seed 1 --out " + dir / "x.json");
  CHECK(bad.code == 2);
  CHECK(bad.output.find("line 3") != std::string::npos);
}

TEST_CASE("cli: compare") {
  TempDir dir("compare");
  REQUIRE(cli("simulate --scenario mixed-excitation --duration 20 --out " + dir / "d.csv").code == 0);
  const std::string common = " --data " + dir / "d.csv" + " --seed 4 --epochs 1 --hidden 8 --p 3 ";
  REQUIRE(cli("train" + common + "--accel-loss off --out " + dir / "dk.json").code == 0);
  REQUIRE(cli("train" + common + "--accel-loss on --out " + dir / "aldk.json").code == 0);

  const std::string models = " --dk " + dir / "dk.json" + " --aldk " + dir / "aldk.json";
  const Run r = cli("compare" + models +
                    " --seed 9 --duration 10 --scenarios nominal,slalom-mu0.6 --methods ALDK-SWLS,PHYS-BASELINE,DK --out " +
                    dir / "rep");
  REQUIRE(r.code == 0);
  const std::string summary = slurp(dir / "rep/summary.csv");
  CHECK(summary.rfind("scenario,method,channel,max,rmse\n", 0) == 0);
  const auto p1 = summary.find("nominal,ALDK-SWLS"), p2 = summary.find("nominal,PHYS-BASELINE"),
             p3 = summary.find("nominal,DK");
  CHECK(p1 < p2);
  CHECK(p2 < p3);
  CHECK(summary.find("ALDK-RLS") == std::string::npos);
  CHECK(fs::exists(dir / "rep/nominal.txt"));
  CHECK(fs::exists(dir / "rep/slalom-mu0.6_errors.csv"));
  CHECK(fs::exists(dir / "rep/mass+160.txt") == false);
  const std::string openloop = slurp(dir / "rep/nominal_openloop.csv");
  CHECK(openloop.rfind("t,Vx,Vy,wr,DK_Vx,DK_Vy,DK_wr\n", 0) == 0);
  CHECK(std::count(openloop.begin(), openloop.end(), '\n') == 401);

  const Run missing = cli("compare --dk " + dir / "dk.json" + " --seed 9 --duration 5 --scenarios nominal --out " +
                          dir / "rep2");
  CHECK(missing.code == 2);
  CHECK(missing.output.find("method 'ALDK'") != std::string::npos);

  const Run unknown = cli("compare" + models + " --seed 9 --methods DK,KALMAN --out " + dir / "rep3");
  CHECK(unknown.code == 1);

  const Run sweep = cli("compare" + models + " --seed 9 --duration 10 --scenarios nominal --methods ALDK,ALDK-SWLS" +
                        " --sweep-window 25,50 --out " + dir / "sw");
  REQUIRE(sweep.code == 0);
  CHECK(fs::exists(dir / "sw/M25/summary.csv"));
  CHECK(fs::exists(dir / "sw/M50/summary.csv"));
  const std::string ss = slurp(dir / "sw/sweep_summary.csv");
  CHECK(ss.rfind("M,scenario,method,Vx_rmse,Vy_rmse,wr_rmse\n", 0) == 0);
  CHECK(std::count(ss.begin(), ss.end(), '\n') == 5);
  CHECK(ss.find("\n25,nominal,ALDK-SWLS,") != std::string::npos);
  CHECK(ss.find("\n50,nominal,ALDK-SWLS,") != std::string::npos);
}

}
