#include "dkv/adapt.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace dkv {

std::string to_string(AdapterMode mode) {
  switch (mode) {
    case AdapterMode::Swls:
      return "swls";
    case AdapterMode::Rls:
      return "rls";
    case AdapterMode::Ffrls:
      return "ffrls";
    case AdapterMode::Frozen:
      return "frozen";
  }
  return "?";
}

AdapterMode parse_adapter_mode(const std::string& name) {
  if (name == "swls") return AdapterMode::Swls;
  if (name == "rls") return AdapterMode::Rls;
  if (name == "ffrls") return AdapterMode::Ffrls;
  if (name == "frozen") return AdapterMode::Frozen;
  throw std::invalid_argument("unknown adapter mode '" + name + "' (swls, rls, ffrls, frozen)");
}

std::string to_string(SwlsSolver solver) {
  return solver == SwlsSolver::BatchWindow ? "batch_window" : "recursive_eq33";
}

SwlsSolver parse_swls_solver(const std::string& name) {
  if (name == "batch_window") return SwlsSolver::BatchWindow;
  if (name == "recursive_eq33") return SwlsSolver::RecursiveEq33;
  throw std::invalid_argument("unknown SWLS solver '" + name + "' (batch_window, recursive_eq33)");
}

void AdapterConfig::validate() const {
  if (window < 1) throw std::invalid_argument("adapter: window length must be >= 1");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("adapter: lambda must lie in (0, 1]");
  if (eps_reg < 0.0 || eps_reg_rel < 0.0) throw std::invalid_argument("adapter: eps_reg must be >= 0");
  if (!(p0_scale > 0.0)) throw std::invalid_argument("adapter: p0_scale must be positive");
}

namespace {

void symmetrize(Eigen::MatrixXd& P) { P = 0.5 * (P + P.transpose()).eval(); }

}  // namespace

Adapter::Adapter(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& B0, const Eigen::VectorXd& z0,
                 const Eigen::VectorXd& u0, const AdapterConfig& config)
    : config_(config),
      d_(static_cast<int>(A0.rows())),
      m_(static_cast<int>(B0.cols())),
      A0_(A0),
      B0_(B0) {
  config_.validate();
  if (A0.cols() != d_ || B0.rows() != d_ || z0.size() != d_ || u0.size() != m_) {
    throw std::invalid_argument("adapter: dimension mismatch in A0, B0, z0, u0");
  }
  theta_.resize(d_, d_ + m_);
  theta_ << A0, B0;
  theta0_ = theta_;
  z_last_ = z0;
  const int q = d_ + m_;

  if (config_.mode == AdapterMode::Rls || config_.mode == AdapterMode::Ffrls) {
    P_ = config_.p0_scale * Eigen::MatrixXd::Identity(q, q);
    return;
  }
  if (config_.mode == AdapterMode::Swls) {
    G_.resize(q, config_.window);
    Y_.resize(d_, config_.window);
  }
  // P0 = (g0 g0^T + rho I)^-1; rank one, so rho = 0 falls back to the pseudo-inverse.
  const Eigen::VectorXd g0 = regressor(z0, u0);
  Eigen::MatrixXd gram = g0 * g0.transpose();
  const double rho = ridge(gram);
  gram.diagonal().array() += rho;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = 1e-14 * ev.maxCoeff();
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  P_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  symmetrize(P_);
  cond_ = ev.minCoeff() > 0 ? ev.maxCoeff() / ev.minCoeff() : INFINITY;
}

Eigen::VectorXd Adapter::regressor(const Eigen::VectorXd& z_prev, const Eigen::VectorXd& u_prev) const {
  Eigen::VectorXd g(d_ + m_);
  g << z_prev, u_prev;
  return g;
}

void Adapter::check_input(const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_prev) const {
  if (z_k.size() != d_ || u_prev.size() != m_) throw std::invalid_argument("adapter: dimension mismatch");
  if (!z_k.allFinite() || !u_prev.allFinite()) {
    throw std::domain_error("adapter: non-finite measurement at step " + std::to_string(k_ + 1));
  }
}

double Adapter::ridge(const Eigen::MatrixXd& gram) const {
  return config_.eps_reg + config_.eps_reg_rel * gram.trace() / static_cast<double>(gram.rows());
}

void Adapter::push_pair(const Eigen::VectorXd& g, const Eigen::VectorXd& target) {
  const int M = config_.window;
  int slot;
  if (count_ < M) {
    slot = (head_ + count_) % M;
    ++count_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % M;
  }
  G_.col(slot) = g;
  Y_.col(slot) = target;
}

Eigen::MatrixXd Adapter::window_regressors() const {
  Eigen::MatrixXd out(d_ + m_, count_);
  for (int i = 0; i < count_; ++i) out.col(i) = G_.col((head_ + i) % config_.window);
  return out;
}

Eigen::MatrixXd Adapter::window_targets() const {
  Eigen::MatrixXd out(d_, count_);
  for (int i = 0; i < count_; ++i) out.col(i) = Y_.col((head_ + i) % config_.window);
  return out;
}

void Adapter::solve_window() {
  const Eigen::MatrixXd G = window_regressors();
  const Eigen::MatrixXd Y = window_targets();
  Eigen::MatrixXd gram = G * G.transpose();
  const double rho = ridge(gram);
  gram.diagonal().array() += rho;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double lmin = ev.minCoeff();
  const double lmax = ev.maxCoeff();
  cond_ = lmin > 0 ? lmax / lmin : INFINITY;
  if (!(lmin > 1e-14 * lmax)) {
    std::ostringstream msg;
    msg << "adapter: window Gram matrix is singular at step " << k_ << " (condition estimate "
        << cond_ << "); set eps_reg > 0";
    throw std::runtime_error(msg.str());
  }
  P_ = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  symmetrize(P_);
  if (config_.solver == SwlsSolver::RecursiveEq33 && k_ > config_.window) {
    theta_ += (Y.col(count_ - 1) - theta_ * G.col(count_ - 1)) * (G.col(count_ - 1).transpose() * P_);
  } else {
    Eigen::MatrixXd rhs = Y * G.transpose();
    rhs += rho * theta0_;
    theta_ = rhs * P_;
  }
}

void Adapter::update(const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_prev) {
  check_input(z_k, u_prev);
  switch (config_.mode) {
    case AdapterMode::Frozen:
      ++k_;
      break;
    case AdapterMode::Rls: {
      const double lambda = config_.lambda;
      config_.lambda = 1.0;
      ffrls_update(z_k, u_prev);
      config_.lambda = lambda;
      return;
    }
    case AdapterMode::Ffrls:
      ffrls_update(z_k, u_prev);
      return;
    case AdapterMode::Swls:
      ++k_;
      push_pair(regressor(z_last_, u_prev), z_k);
      solve_window();
      break;
  }
  z_last_ = z_k;
}

void Adapter::ffrls_update(const Eigen::VectorXd& z_k, const Eigen::VectorXd& u_prev) {
  check_input(z_k, u_prev);
  const double lambda = config_.lambda;
  if (!(lambda > 0.0)) throw std::invalid_argument("ffrls: lambda must be positive");
  const int q = d_ + m_;
  if (P_.rows() != q) P_ = config_.p0_scale * Eigen::MatrixXd::Identity(q, q);
  const Eigen::VectorXd g = regressor(z_last_, u_prev);
  const Eigen::VectorXd Pg = P_ * g;
  const Eigen::VectorXd K = Pg / (lambda + g.dot(Pg));
  theta_ += (z_k - theta_ * g) * K.transpose();
  P_ = (P_ - K * Pg.transpose()) / lambda;
  symmetrize(P_);
  ++k_;
  z_last_ = z_k;
}

Eigen::VectorXd Adapter::predict(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const {
  return predict_one_step(A(), B(), z, u);
}

AdaptRunResult adapt_run(const KoopmanModel& model, const Trajectory& traj, const AdapterConfig& config) {
  model.validate();
  AdaptRunResult out;
  if (traj.size() < 2) return out;
  out.predictions.reserve(traj.size() - 1);
  out.history.reserve(traj.size() - 1);

  Eigen::VectorXd z = lift(model, model.normalize_state(traj[0].state));
  Eigen::VectorXd u = model.normalize_input(traj[0].input);
  Adapter adapter(model.A, model.B, z, u, config);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    if (k > 0) {
      const Eigen::VectorXd u_prev = u;
      z = lift(model, model.normalize_state(traj[k].state));
      u = model.normalize_input(traj[k].input);
      adapter.update(z, u_prev);
    }
    const Eigen::VectorXd z_next = config.mode == AdapterMode::Frozen
                                       ? predict_one_step(model, z, u)
                                       : adapter.predict(z, u);
    out.predictions.push_back(model.denormalize_state(project(model.dims, z_next)));
    out.history.push_back({static_cast<long>(k), (adapter.A() - model.A).norm(),
                           (adapter.B() - model.B).norm(), adapter.gram_condition()});
  }
  return out;
}

void write_estimate_history(std::ostream& os, const std::vector<EstimateRecord>& history) {
  os << "k,frob_dA,frob_dB,cond_gram\n";
  char buf[256];
  for (const EstimateRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g\n", r.k, r.frob_dA, r.frob_dB, r.cond_gram);
    os << buf;
  }
}

}  // namespace dkv
