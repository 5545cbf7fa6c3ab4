#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dkv/koopman.hpp"
#include "dkv/vehicle.hpp"

namespace dkv {

enum class AdapterMode { Swls, Rls, Ffrls, Frozen };

enum class SwlsSolver {
  /// Exact least squares over the current window, recomputed every step.
  BatchWindow,
  /// Batch solve until the window first fills, then the recursive
  /// correction Theta += (z_k - Theta g) g^T P_k with P_k from the window.
  RecursiveEq33,
};

std::string to_string(AdapterMode mode);
AdapterMode parse_adapter_mode(const std::string& name);
std::string to_string(SwlsSolver solver);
SwlsSolver parse_swls_solver(const std::string& name);

struct AdapterConfig {
  AdapterMode mode = AdapterMode::Swls;
  int window = 100;
  double lambda = 1.0;  // forgetting factor, FFRLS only
  /// Ridge on the window Gram matrix: eps_reg + eps_reg_rel * trace / dim.
  /// The ridge pulls toward the initial (A0, B0) rather than toward zero.
  double eps_reg = 0.0;
  double eps_reg_rel = 1e-8;
  SwlsSolver solver = SwlsSolver::BatchWindow;
  /// Initial covariance scale for RLS / FFRLS: P0 = p0_scale * I.
  double p0_scale = 1e4;

  void validate() const;
};

/// Online estimator of Theta = [A B] in the lifted space. Strictly
/// sequential: feed lifted measurements in time order.
class Adapter {
 public:
  /// Starts from (A0, B0) with z0, u0 as the first regressor.
  Adapter(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& B0, const Eigen::VectorXd& z0,
          const Eigen::VectorXd& u0, const AdapterConfig& config);

  /// Adds the pair ([z_{k-1}; u_prev] -> z_k) and refreshes the estimate
  /// according to the configured mode.
  void update(const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_prev);

  /// Exponentially weighted RLS step with the configured lambda (any mode).
  void ffrls_update(const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_prev);

  Eigen::MatrixXd A() const { return theta_.leftCols(d_); }
  Eigen::MatrixXd B() const { return theta_.rightCols(m_); }
  const Eigen::MatrixXd& theta() const { return theta_; }
  const Eigen::MatrixXd& A0() const { return A0_; }
  const Eigen::MatrixXd& B0() const { return B0_; }
  const Eigen::MatrixXd& P() const { return P_; }
  long step() const { return k_; }
  const AdapterConfig& config() const { return config_; }
  /// Condition number of the (regularized) Gram matrix inverted last; 0 if none.
  double gram_condition() const { return cond_; }

  /// Window contents in time order: regressors [z; u] and target lifted states.
  int window_size() const { return count_; }
  Eigen::MatrixXd window_regressors() const;
  Eigen::MatrixXd window_targets() const;

  Eigen::VectorXd predict(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;

 private:
  void push_pair(const Eigen::VectorXd& g, const Eigen::VectorXd& target);
  void solve_window();
  double ridge(const Eigen::MatrixXd& gram) const;
  Eigen::VectorXd regressor(const Eigen::VectorXd& z_prev, const Eigen::VectorXd& u_prev) const;
  void check_input(const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_prev) const;

  AdapterConfig config_;
  int d_ = 0;
  int m_ = 0;
  Eigen::MatrixXd A0_, B0_;
  Eigen::MatrixXd theta_;
  Eigen::MatrixXd theta0_;
  Eigen::MatrixXd P_;
  Eigen::VectorXd z_last_;
  // Ring buffers of window columns; `head_` is the oldest.
  Eigen::MatrixXd G_;
  Eigen::MatrixXd Y_;
  int head_ = 0;
  int count_ = 0;
  long k_ = 0;
  double cond_ = 0.0;
};

struct EstimateRecord {
  long k = 0;
  double frob_dA = 0.0;  // ||A_k - A0||_F
  double frob_dB = 0.0;  // ||B_k - B0||_F
  double cond_gram = 0.0;
};

struct AdaptRunResult {
  /// Prediction of snapshot k + 1 made at step k, for k = 0 .. N-2.
  std::vector<VehicleState> predictions;
  std::vector<EstimateRecord> history;
};

/// Streams the trajectory through lift -> update -> predict-next.
AdaptRunResult adapt_run(const KoopmanModel& model, const Trajectory& traj, const AdapterConfig& config);

void write_estimate_history(std::ostream& os, const std::vector<EstimateRecord>& history);

}  // namespace dkv
