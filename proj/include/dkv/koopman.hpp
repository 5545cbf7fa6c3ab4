#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dkv/mlp.hpp"
#include "dkv/vehicle.hpp"

namespace dkv {

/// n original states, m inputs, p learned features; lifted dim is n + p.
struct KoopmanDims {
  int n = 3;
  int m = 2;
  int p = 12;

  int lifted() const { return n + p; }
  void validate() const;
  bool operator==(const KoopmanDims&) const = default;
};

struct LossWeights {
  double linear = 1.0;
  double recon = 1.0;
  double pred = 1.0;
  double accel = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Deep Koopman model. The encoder maps normalized states to p features,
/// the decoder maps them back; A and B act on z = [x; encoder(x)] and the
/// normalized input.
struct KoopmanModel {
  KoopmanDims dims;
  MlpNetwork encoder;
  MlpNetwork decoder;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Normalizer state_norm;
  Normalizer input_norm;
  double dt = 0.025;
  LossWeights weights;
  bool squared_norms = true;
  int epochs_trained = 0;

  /// Xavier encoder/decoder, A = I, B = 0, identity-range normalizers.
  static KoopmanModel create(const KoopmanDims& dims, const std::vector<int>& hidden,
                             Activation activation, std::mt19937_64& rng);

  void validate() const;

  Eigen::VectorXd normalize_state(const VehicleState& s) const;
  Eigen::VectorXd normalize_input(const ControlInput& u) const;
  VehicleState denormalize_state(const Eigen::VectorXd& x_norm) const;

  /// Flat layout: encoder, decoder, A row-major, B row-major.
  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);
};

/// z = [x; Phi(x)] for a normalized state (or one state per column).
Eigen::VectorXd lift(const KoopmanModel& model, const Eigen::VectorXd& x_norm);
Eigen::MatrixXd lift_batch(const KoopmanModel& model, const Eigen::MatrixXd& x_norm);

/// First n components of z.
Eigen::VectorXd project(const KoopmanDims& dims, const Eigen::VectorXd& z);

/// A z + B u.
Eigen::VectorXd predict_one_step(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::VectorXd& z, const Eigen::VectorXd& u);
Eigen::VectorXd predict_one_step(const KoopmanModel& model, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& u);

/// Consecutive snapshot pairs (k, k+1), one per column.
struct PairBatch {
  Eigen::MatrixXd x;           // n x b, normalized state at k
  Eigen::MatrixXd u;           // m x b, normalized input at k
  Eigen::MatrixXd x_next;      // n x b, normalized state at k+1
  Eigen::MatrixXd v_now;       // 2 x b, physical [Vx; Vy] at k
  Eigen::MatrixXd accel_next;  // 2 x b, [ax + Vy wr; ay - Vx wr] at k+1; empty if absent

  Eigen::Index size() const { return x.cols(); }
  bool has_accel() const { return accel_next.cols() == x.cols() && x.cols() > 0; }
  PairBatch select(std::span<const Eigen::Index> columns) const;
};

/// Pairs (first + i, first + i + 1) for i < count. Throws if any pair is not
/// spaced by `dt` (relative tolerance 1e-9).
PairBatch make_pairs(const KoopmanModel& model, const Trajectory& traj, std::size_t first,
                     std::size_t count, double dt);
PairBatch make_pairs(const KoopmanModel& model, const Trajectory& traj, double dt);

struct LossBreakdown {
  double linear = 0.0;
  double recon = 0.0;
  double pred = 0.0;
  double accel = 0.0;
  double total = 0.0;
};

/// Batch-mean loss terms and their weighted sum. The acceleration term is
/// computed whenever the batch carries accelerations (and required when
/// its weight is positive).
LossBreakdown evaluate_loss(const KoopmanModel& model, const PairBatch& batch,
                            const LossWeights& weights);

/// Same as evaluate_loss, plus d(total)/d(parameters) in the flat layout.
LossBreakdown loss_and_gradient(const KoopmanModel& model, const PairBatch& batch,
                                const LossWeights& weights, Eigen::VectorXd& grad);

double loss_linear(const KoopmanModel& model, const PairBatch& batch);
double loss_recon(const KoopmanModel& model, const PairBatch& batch);
double loss_pred(const KoopmanModel& model, const PairBatch& batch);
/// Uses model.dt as the differencing interval.
double loss_accel(const KoopmanModel& model, const PairBatch& batch);
double loss_total(const KoopmanModel& model, const PairBatch& batch, const LossWeights& weights);

struct EdmdResult {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  bool regularized = false;
};

/// Least-squares [A B] = Z_Y G^T (G G^T)^+ with G = [Z_X; U], columns are
/// snapshots. When G G^T is numerically singular a ridge of
/// eps_reg * trace / dim is added before the pseudo-inverse.
EdmdResult edmd_fit(const Eigen::MatrixXd& ZX, const Eigen::MatrixXd& ZY, const Eigen::MatrixXd& U,
                    double eps_reg = 1e-8);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 20;
  int epochs = 200;
  LossWeights weights;
  double dt = 0.025;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  std::vector<int> hidden{32, 32, 32};
  Activation activation = Activation::Tanh;
  bool squared_norms = true;
  bool edmd_warm_start = true;

  void validate() const;
};

/// Chronological split: snapshots [0, boundary) train, [boundary, N) test.
std::size_t split_boundary(std::size_t snapshots, double train_fraction);

struct TrainLogRow {
  int epoch = 0;
  LossBreakdown train;
  double holdout_total = 0.0;
};

struct TrainResult {
  KoopmanModel model;
  std::vector<TrainLogRow> log;
  int best_epoch = 0;
};

using TrainObserver = std::function<void(const TrainLogRow&)>;

/// Mini-batch Adam on the weighted loss over encoder, decoder, A and B.
/// Returns the parameters with the lowest held-out total loss. When
/// `resume` is given, training continues from it (its normalizers are kept
/// and epoch numbering continues).
TrainResult train(const Trajectory& traj, const KoopmanDims& dims, const TrainConfig& config,
                  const KoopmanModel* resume = nullptr, const TrainObserver& observer = {});

enum class RolloutMode { OpenLoop, OneStepAhead };

/// Predicted states for snapshots 1..horizon of `traj`. Open loop lifts
/// traj[0] once and iterates; one-step-ahead re-lifts each measured state.
std::vector<VehicleState> rollout(const KoopmanModel& model, const Trajectory& traj,
                                  std::size_t horizon, RolloutMode mode);

/// Open-loop rollout from x0 under the given inputs.
std::vector<VehicleState> rollout(const KoopmanModel& model, const VehicleState& x0,
                                  std::span<const ControlInput> inputs, std::size_t horizon);

}  // namespace dkv
