#include "dkv/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace dkv {

void KoopmanDims::validate() const {
  if (n <= 0 || m <= 0 || p <= 0) throw std::invalid_argument("koopman dims must be positive");
}

void LossWeights::validate() const {
  if (linear < 0 || recon < 0 || pred < 0 || accel < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (linear == 0 && recon == 0 && pred == 0 && accel == 0) {
    throw std::invalid_argument("loss weights must not all be zero");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("train: learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (!(dt > 0)) throw std::invalid_argument("train: dt must be positive");
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("train: train fraction must lie in (0, 1)");
  }
  weights.validate();
}

KoopmanModel KoopmanModel::create(const KoopmanDims& dims, const std::vector<int>& hidden,
                                  Activation activation, std::mt19937_64& rng) {
  dims.validate();
  KoopmanModel model;
  model.dims = dims;
  model.encoder = MlpNetwork::xavier(MlpNetwork::chain(dims.n, hidden, dims.p, activation), rng);
  model.decoder = MlpNetwork::xavier(MlpNetwork::chain(dims.p, hidden, dims.n, activation), rng);
  model.A = Eigen::MatrixXd::Identity(dims.lifted(), dims.lifted());
  model.B = Eigen::MatrixXd::Zero(dims.lifted(), dims.m);
  model.state_norm = {Eigen::VectorXd::Constant(dims.n, -1.0), Eigen::VectorXd::Constant(dims.n, 1.0)};
  model.input_norm = {Eigen::VectorXd::Constant(dims.m, -1.0), Eigen::VectorXd::Constant(dims.m, 1.0)};
  return model;
}

void KoopmanModel::validate() const {
  dims.validate();
  const int d = dims.lifted();
  if (encoder.input_dim() != dims.n || encoder.output_dim() != dims.p) {
    throw std::invalid_argument("koopman: encoder must map n -> p");
  }
  if (decoder.input_dim() != dims.p || decoder.output_dim() != dims.n) {
    throw std::invalid_argument("koopman: decoder must map p -> n");
  }
  if (A.rows() != d || A.cols() != d || B.rows() != d || B.cols() != dims.m) {
    throw std::invalid_argument("koopman: A must be (n+p)x(n+p) and B (n+p)xm");
  }
  if (!A.allFinite() || !B.allFinite()) throw std::invalid_argument("koopman: non-finite A or B");
  if (state_norm.dim() != dims.n || input_norm.dim() != dims.m) {
    throw std::invalid_argument("koopman: normalizer dims do not match");
  }
  if (!(dt > 0)) throw std::invalid_argument("koopman: dt must be positive");
}

Eigen::VectorXd KoopmanModel::normalize_state(const VehicleState& s) const {
  return state_norm.apply(Eigen::VectorXd(s.vec()));
}

Eigen::VectorXd KoopmanModel::normalize_input(const ControlInput& u) const {
  return input_norm.apply(Eigen::VectorXd(u.vec()));
}

VehicleState KoopmanModel::denormalize_state(const Eigen::VectorXd& x_norm) const {
  return VehicleState::from(state_norm.invert(x_norm).col(0));
}

Eigen::Index KoopmanModel::parameter_count() const {
  return encoder.parameter_count() + decoder.parameter_count() + A.size() + B.size();
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::VectorXd KoopmanModel::parameters() const {
  Eigen::VectorXd theta(parameter_count());
  double* p = theta.data();
  encoder.copy_parameters_to(p);
  p += encoder.parameter_count();
  decoder.copy_parameters_to(p);
  p += decoder.parameter_count();
  Eigen::Map<RowMajor>(p, A.rows(), A.cols()) = A;
  p += A.size();
  Eigen::Map<RowMajor>(p, B.rows(), B.cols()) = B;
  return theta;
}

void KoopmanModel::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count()) throw std::invalid_argument("koopman: parameter size mismatch");
  const double* p = theta.data();
  encoder.copy_parameters_from(p);
  p += encoder.parameter_count();
  decoder.copy_parameters_from(p);
  p += decoder.parameter_count();
  A = Eigen::Map<const RowMajor>(p, A.rows(), A.cols());
  p += A.size();
  B = Eigen::Map<const RowMajor>(p, B.rows(), B.cols());
}

Eigen::MatrixXd lift_batch(const KoopmanModel& model, const Eigen::MatrixXd& x_norm) {
  if (x_norm.rows() != model.dims.n) throw std::invalid_argument("lift: state dim mismatch");
  Eigen::MatrixXd z(model.dims.lifted(), x_norm.cols());
  z.topRows(model.dims.n) = x_norm;
  z.bottomRows(model.dims.p) = model.encoder.forward(x_norm);
  return z;
}

Eigen::VectorXd lift(const KoopmanModel& model, const Eigen::VectorXd& x_norm) {
  return lift_batch(model, Eigen::MatrixXd(x_norm)).col(0);
}

Eigen::VectorXd project(const KoopmanDims& dims, const Eigen::VectorXd& z) {
  if (z.size() != dims.lifted()) throw std::invalid_argument("project: lifted dim mismatch");
  return z.head(dims.n);
}

Eigen::VectorXd predict_one_step(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::VectorXd& z, const Eigen::VectorXd& u) {
  if (A.cols() != z.size() || B.cols() != u.size() || A.rows() != B.rows()) {
    throw std::invalid_argument("predict_one_step: dimension mismatch");
  }
  Eigen::VectorXd out = A * z;
  out.noalias() += B * u;
  return out;
}

Eigen::VectorXd predict_one_step(const KoopmanModel& model, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& u) {
  return predict_one_step(model.A, model.B, z, u);
}

PairBatch PairBatch::select(std::span<const Eigen::Index> columns) const {
  const std::vector<Eigen::Index> idx(columns.begin(), columns.end());
  PairBatch out;
  out.x = x(Eigen::all, idx);
  out.u = u(Eigen::all, idx);
  out.x_next = x_next(Eigen::all, idx);
  out.v_now = v_now(Eigen::all, idx);
  if (has_accel()) out.accel_next = accel_next(Eigen::all, idx);
  return out;
}

PairBatch make_pairs(const KoopmanModel& model, const Trajectory& traj, std::size_t first,
                     std::size_t count, double dt) {
  if (model.dims.n != 3 || model.dims.m != 2) {
    throw std::invalid_argument("make_pairs: vehicle trajectories need n = 3, m = 2");
  }
  if (first + count + 1 > traj.size()) throw std::invalid_argument("make_pairs: range exceeds trajectory");
  const auto b = static_cast<Eigen::Index>(count);
  Eigen::MatrixXd xs(3, b), us(2, b), xn(3, b);
  PairBatch out;
  out.v_now.resize(2, b);
  out.accel_next.resize(2, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Snapshot& s0 = traj[first + static_cast<std::size_t>(i)];
    const Snapshot& s1 = traj[first + static_cast<std::size_t>(i) + 1];
    if (std::abs((s1.t - s0.t) - dt) > 1e-9 * std::max(1.0, std::abs(s1.t))) {
      std::ostringstream msg;
      msg << "make_pairs: snapshots at t = " << s0.t << " and t = " << s1.t
          << " are not consecutive for dt = " << dt;
      throw std::invalid_argument(msg.str());
    }
    xs.col(i) = s0.state.vec();
    us.col(i) = s0.input.vec();
    xn.col(i) = s1.state.vec();
    out.v_now.col(i) << s0.state.Vx, s0.state.Vy;
    out.accel_next.col(i) << s1.ax + s1.state.Vy * s1.state.wr, s1.ay - s1.state.Vx * s1.state.wr;
  }
  out.x = model.state_norm.apply(xs);
  out.u = model.input_norm.apply(us);
  out.x_next = model.state_norm.apply(xn);
  return out;
}

PairBatch make_pairs(const KoopmanModel& model, const Trajectory& traj, double dt) {
  if (traj.size() < 2) throw std::invalid_argument("make_pairs: need at least two snapshots");
  return make_pairs(model, traj, 0, traj.size() - 1, dt);
}

namespace {

/// Batch mean of ||r_i||^2 (or ||r_i||); optionally writes d(mean)/dR scaled by `weight`.
double mean_norm(const Eigen::MatrixXd& R, bool squared, double weight, Eigen::MatrixXd* dR) {
  const double inv_b = 1.0 / static_cast<double>(R.cols());
  const Eigen::RowVectorXd sq = R.colwise().squaredNorm();
  if (squared) {
    if (dR) *dR = (2.0 * weight * inv_b) * R;
    return sq.sum() * inv_b;
  }
  const Eigen::RowVectorXd nr = sq.cwiseSqrt();
  if (dR) {
    dR->resize(R.rows(), R.cols());
    for (Eigen::Index i = 0; i < R.cols(); ++i) {
      dR->col(i) = nr(i) > 0 ? Eigen::VectorXd((weight * inv_b / nr(i)) * R.col(i))
                             : Eigen::VectorXd::Zero(R.rows());
    }
  }
  return nr.sum() * inv_b;
}

LossBreakdown compute_loss(const KoopmanModel& model, const PairBatch& batch, const LossWeights& w,
                           Eigen::VectorXd* grad) {
  const KoopmanDims& dm = model.dims;
  const Eigen::Index b = batch.size();
  if (b == 0) throw std::invalid_argument("loss: empty batch");
  if (batch.x.rows() != dm.n || batch.u.rows() != dm.m || batch.x_next.rows() != dm.n) {
    throw std::invalid_argument("loss: batch dims do not match the model");
  }
  if (w.accel > 0 && !batch.has_accel()) {
    throw std::invalid_argument("loss: acceleration loss requested but batch has no ax/ay channels");
  }

  // One encoder pass over [x, x_next].
  Eigen::MatrixXd enc_in(dm.n, 2 * b);
  enc_in << batch.x, batch.x_next;
  MlpNetwork::Cache enc_cache, dec_cache;
  const Eigen::MatrixXd phi = model.encoder.forward(enc_in, grad ? &enc_cache : nullptr);

  Eigen::MatrixXd z(dm.lifted(), b), z_next(dm.lifted(), b);
  z << batch.x, phi.leftCols(b);
  z_next << batch.x_next, phi.rightCols(b);
  Eigen::MatrixXd z_hat = model.A * z;
  z_hat.noalias() += model.B * batch.u;

  const Eigen::MatrixXd rec = model.decoder.forward(phi.leftCols(b), grad ? &dec_cache : nullptr);

  const bool sq = model.squared_norms;
  LossBreakdown out;
  Eigen::MatrixXd g_lin, g_rec, g_pred, g_acc;
  Eigen::MatrixXd* gp = nullptr;

  gp = grad ? &g_lin : nullptr;
  out.linear = mean_norm(z_next - z_hat, sq, w.linear, gp);
  gp = grad ? &g_rec : nullptr;
  out.recon = mean_norm(batch.x - rec, sq, w.recon, gp);
  gp = grad ? &g_pred : nullptr;
  out.pred = mean_norm(batch.x_next - z_hat.topRows(dm.n), sq, w.pred, gp);

  // Predicted velocities back in m/s so that dt carries physical meaning.
  Eigen::Vector2d half_range;
  half_range << 0.5 * (model.state_norm.max(0) - model.state_norm.min(0)),
      0.5 * (model.state_norm.max(1) - model.state_norm.min(1));
  if (batch.has_accel()) {
    Eigen::MatrixXd v_hat(2, b);
    for (int c = 0; c < 2; ++c) {
      v_hat.row(c) = ((z_hat.row(c).array() + 1.0) * half_range(c) + model.state_norm.min(c)).matrix();
    }
    const Eigen::MatrixXd a_hat = (v_hat - batch.v_now) / model.dt;
    gp = grad ? &g_acc : nullptr;
    out.accel = mean_norm(batch.accel_next - a_hat, sq, w.accel, gp);
  }
  out.total = w.linear * out.linear + w.recon * out.recon + w.pred * out.pred + w.accel * out.accel;
  if (!grad) return out;

  // Residual r = target - prediction, so d/d(prediction) = -g.
  Eigen::MatrixXd d_zhat = -g_lin;
  d_zhat.topRows(dm.n) -= g_pred;
  if (batch.has_accel()) {
    for (int c = 0; c < 2; ++c) d_zhat.row(c) -= g_acc.row(c) * (half_range(c) / model.dt);
  }

  const Eigen::MatrixXd dA = d_zhat * z.transpose();
  const Eigen::MatrixXd dB = d_zhat * batch.u.transpose();
  const Eigen::MatrixXd dz = model.A.transpose() * d_zhat;

  const MlpNetwork::Gradients dec_g = model.decoder.backward(dec_cache, -g_rec);

  Eigen::MatrixXd d_phi(dm.p, 2 * b);
  d_phi.leftCols(b) = dz.bottomRows(dm.p) + dec_g.dX;
  d_phi.rightCols(b) = g_lin.bottomRows(dm.p);
  const MlpNetwork::Gradients enc_g = model.encoder.backward(enc_cache, d_phi);

  grad->resize(model.parameter_count());
  double* p = grad->data();
  MlpNetwork::copy_gradients_to(enc_g, p);
  p += model.encoder.parameter_count();
  MlpNetwork::copy_gradients_to(dec_g, p);
  p += model.decoder.parameter_count();
  Eigen::Map<RowMajor>(p, dA.rows(), dA.cols()) = dA;
  p += dA.size();
  Eigen::Map<RowMajor>(p, dB.rows(), dB.cols()) = dB;
  return out;
}

}  // namespace

LossBreakdown evaluate_loss(const KoopmanModel& model, const PairBatch& batch,
                            const LossWeights& weights) {
  return compute_loss(model, batch, weights, nullptr);
}

LossBreakdown loss_and_gradient(const KoopmanModel& model, const PairBatch& batch,
                                const LossWeights& weights, Eigen::VectorXd& grad) {
  return compute_loss(model, batch, weights, &grad);
}

double loss_linear(const KoopmanModel& model, const PairBatch& batch) {
  return evaluate_loss(model, batch, {1, 0, 0, 0}).linear;
}

double loss_recon(const KoopmanModel& model, const PairBatch& batch) {
  return evaluate_loss(model, batch, {0, 1, 0, 0}).recon;
}

double loss_pred(const KoopmanModel& model, const PairBatch& batch) {
  return evaluate_loss(model, batch, {0, 0, 1, 0}).pred;
}

double loss_accel(const KoopmanModel& model, const PairBatch& batch) {
  return evaluate_loss(model, batch, {0, 0, 0, 1}).accel;
}

double loss_total(const KoopmanModel& model, const PairBatch& batch, const LossWeights& weights) {
  return evaluate_loss(model, batch, weights).total;
}

EdmdResult edmd_fit(const Eigen::MatrixXd& ZX, const Eigen::MatrixXd& ZY, const Eigen::MatrixXd& U,
                    double eps_reg) {
  if (ZX.cols() < 2) throw std::invalid_argument("edmd_fit: need at least 2 snapshots");
  if (ZY.rows() != ZX.rows() || ZY.cols() != ZX.cols() || U.cols() != ZX.cols()) {
    throw std::invalid_argument("edmd_fit: snapshot matrices disagree in shape");
  }
  const Eigen::Index d = ZX.rows();
  const Eigen::Index m = U.rows();
  Eigen::MatrixXd G(d + m, ZX.cols());
  G << ZX, U;
  Eigen::MatrixXd gram = G * G.transpose();
  const Eigen::MatrixXd rhs = ZY * G.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  EdmdResult out;
  if (!(lmin > 1e-12 * lmax)) {
    const double ridge = eps_reg * gram.trace() / static_cast<double>(gram.rows());
    if (ridge > 0) {
      gram.diagonal().array() += ridge;
      eig.compute(gram);
      out.regularized = true;
    }
  }
  // Pseudo-inverse through the eigendecomposition; drops null directions.
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(ev.maxCoeff(), 0.0);
  Eigen::VectorXd inv_ev(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv_ev(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::MatrixXd theta = (rhs * V) * inv_ev.asDiagonal() * V.transpose();
  out.A = theta.leftCols(d);
  out.B = theta.rightCols(m);
  return out;
}

std::size_t split_boundary(std::size_t snapshots, double train_fraction) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  }
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(snapshots)));
}

TrainResult train(const Trajectory& traj, const KoopmanDims& dims, const TrainConfig& cfg,
                  const KoopmanModel* resume, const TrainObserver& observer) {
  cfg.validate();
  dims.validate();
  const std::size_t boundary = split_boundary(traj.size(), cfg.train_fraction);
  if (boundary < 3 || traj.size() - boundary < 2) {
    throw std::invalid_argument("train: dataset too small for a train/test split");
  }

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  KoopmanModel& model = result.model;
  if (resume) {
    model = *resume;
    model.validate();
    if (!(model.dims == dims)) throw std::invalid_argument("train: resume checkpoint has different dims");
    rng.seed(cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(model.epochs_trained));
  } else {
    model = KoopmanModel::create(dims, cfg.hidden, cfg.activation, rng);
    Eigen::MatrixXd xs(dims.n, static_cast<Eigen::Index>(boundary));
    Eigen::MatrixXd us(dims.m, static_cast<Eigen::Index>(boundary));
    for (std::size_t i = 0; i < boundary; ++i) {
      xs.col(static_cast<Eigen::Index>(i)) = traj[i].state.vec();
      us.col(static_cast<Eigen::Index>(i)) = traj[i].input.vec();
    }
    model.state_norm = Normalizer::fit(xs);
    model.input_norm = Normalizer::fit(us);
  }
  model.dt = cfg.dt;
  model.weights = cfg.weights;
  model.squared_norms = cfg.squared_norms;

  const PairBatch train_pairs = make_pairs(model, traj, 0, boundary - 1, cfg.dt);
  const PairBatch test_pairs = make_pairs(model, traj, boundary, traj.size() - boundary - 1, cfg.dt);

  if (!resume && cfg.edmd_warm_start) {
    const EdmdResult warm = edmd_fit(lift_batch(model, train_pairs.x),
                                     lift_batch(model, train_pairs.x_next), train_pairs.u);
    model.A = warm.A;
    model.B = warm.B;
  }

  Eigen::VectorXd theta = model.parameters();
  Eigen::VectorXd best_theta = theta;
  double best_holdout = evaluate_loss(model, test_pairs, cfg.weights).total;
  result.best_epoch = model.epochs_trained;

  AdamState adam;
  adam.lr = cfg.learning_rate;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_pairs.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd grad;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  for (int e = 0; e < cfg.epochs; ++e) {
    const int epoch = model.epochs_trained + 1;
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      const PairBatch batch = train_pairs.select(std::span(order).subspan(start, len));
      const LossBreakdown l = loss_and_gradient(model, batch, cfg.weights, grad);
      if (!std::isfinite(l.total) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch " << batches;
        throw std::runtime_error(msg.str());
      }
      adam_step(theta, grad, adam);
      model.set_parameters(theta);
      sum.linear += l.linear;
      sum.recon += l.recon;
      sum.pred += l.pred;
      sum.accel += l.accel;
      sum.total += l.total;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    TrainLogRow row;
    row.epoch = epoch;
    row.train = {sum.linear * inv, sum.recon * inv, sum.pred * inv, sum.accel * inv, sum.total * inv};
    row.holdout_total = evaluate_loss(model, test_pairs, cfg.weights).total;
    if (!std::isfinite(row.holdout_total)) {
      throw std::runtime_error("train: non-finite held-out loss at epoch " + std::to_string(epoch));
    }
    model.epochs_trained = epoch;
    if (row.holdout_total < best_holdout) {
      best_holdout = row.holdout_total;
      best_theta = theta;
      result.best_epoch = epoch;
    }
    result.log.push_back(row);
    if (observer) observer(row);
  }
  model.set_parameters(best_theta);
  return result;
}

std::vector<VehicleState> rollout(const KoopmanModel& model, const Trajectory& traj,
                                  std::size_t horizon, RolloutMode mode) {
  if (horizon == 0) return {};
  if (horizon >= traj.size()) throw std::invalid_argument("rollout: horizon exceeds trajectory length");
  std::vector<VehicleState> out;
  out.reserve(horizon);
  Eigen::VectorXd z = lift(model, model.normalize_state(traj[0].state));
  for (std::size_t k = 0; k < horizon; ++k) {
    if (mode == RolloutMode::OneStepAhead && k > 0) {
      z = lift(model, model.normalize_state(traj[k].state));
    }
    z = predict_one_step(model, z, model.normalize_input(traj[k].input));
    out.push_back(model.denormalize_state(project(model.dims, z)));
  }
  return out;
}

std::vector<VehicleState> rollout(const KoopmanModel& model, const VehicleState& x0,
                                  std::span<const ControlInput> inputs, std::size_t horizon) {
  if (horizon == 0) return {};
  if (horizon > inputs.size()) throw std::invalid_argument("rollout: horizon exceeds input sequence");
  std::vector<VehicleState> out;
  out.reserve(horizon);
  Eigen::VectorXd z = lift(model, model.normalize_state(x0));
  for (std::size_t k = 0; k < horizon; ++k) {
    z = predict_one_step(model, z, model.normalize_input(inputs[k]));
    out.push_back(model.denormalize_state(project(model.dims, z)));
  }
  return out;
}

}  // namespace dkv
