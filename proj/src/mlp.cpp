#include "dkv/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dkv {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Linear:
      return "linear";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation '" + name + "' (tanh, relu, linear)");
}

MlpNetwork::MlpNetwork(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("mlp: at least one layer required");
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const LayerSpec& s = specs[j];
    if (s.in_dim <= 0 || s.out_dim <= 0) throw std::invalid_argument("mlp: layer dims must be positive");
    if (j > 0 && specs[j - 1].out_dim != s.in_dim) {
      throw std::invalid_argument("mlp: layer " + std::to_string(j) + " input dim does not chain");
    }
    DenseLayer layer;
    layer.W = Eigen::MatrixXd::Zero(s.out_dim, s.in_dim);
    if (s.has_bias) layer.b = Eigen::VectorXd::Zero(s.out_dim);
    layer.activation = s.activation;
    layers_.push_back(std::move(layer));
  }
}

MlpNetwork MlpNetwork::xavier(const std::vector<LayerSpec>& specs, std::mt19937_64& rng) {
  MlpNetwork net(specs);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (DenseLayer& layer : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.W.rows() + layer.W.cols()));
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) layer.W(r, c) = limit * unit(rng);
    }
  }
  return net;
}

std::vector<LayerSpec> MlpNetwork::chain(int in, const std::vector<int>& hidden, int out,
                                         Activation hidden_act) {
  std::vector<LayerSpec> specs;
  int prev = in;
  for (int h : hidden) {
    specs.push_back({prev, h, hidden_act, true});
    prev = h;
  }
  specs.push_back({prev, out, Activation::Linear, true});
  return specs;
}

int MlpNetwork::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().W.cols());
}

int MlpNetwork::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows());
}

namespace {

void activate(Activation a, Eigen::MatrixXd& y) {
  switch (a) {
    case Activation::Tanh:
      y = y.array().tanh().matrix();
      break;
    case Activation::Relu:
      y = y.cwiseMax(0.0);
      break;
    case Activation::Linear:
      break;
  }
}

// dL/d(pre-activation) from dL/d(output) and the output itself.
Eigen::MatrixXd activation_backward(Activation a, const Eigen::MatrixXd& y, const Eigen::MatrixXd& dy) {
  switch (a) {
    case Activation::Tanh:
      return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::Relu:
      return (dy.array() * (y.array() > 0.0).cast<double>()).matrix();
    case Activation::Linear:
      return dy;
  }
  return dy;
}

}  // namespace

Eigen::MatrixXd MlpNetwork::forward(const Eigen::MatrixXd& X, Cache* cache) const {
  if (layers_.empty()) throw std::logic_error("mlp: forward on an empty network");
  if (X.rows() != input_dim()) {
    throw std::invalid_argument("mlp: input has " + std::to_string(X.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Eigen::MatrixXd y = X;
  for (const DenseLayer& layer : layers_) {
    Eigen::MatrixXd pre = layer.W * y;
    if (layer.has_bias()) pre.colwise() += layer.b;
    activate(layer.activation, pre);
    if (cache) {
      cache->inputs.push_back(std::move(y));
      cache->outputs.push_back(pre);
    }
    y = std::move(pre);
  }
  return y;
}

Eigen::VectorXd MlpNetwork::forward_one(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

MlpNetwork::Gradients MlpNetwork::backward(const Cache& cache, const Eigen::MatrixXd& dY) const {
  const std::size_t L = layers_.size();
  if (cache.inputs.size() != L || cache.outputs.size() != L) {
    throw std::invalid_argument("mlp: cache does not match network depth");
  }
  if (dY.rows() != output_dim() || dY.cols() != cache.outputs.back().cols()) {
    throw std::invalid_argument("mlp: output gradient shape mismatch");
  }
  Gradients g;
  g.dW.resize(L);
  g.db.resize(L);
  Eigen::MatrixXd d = dY;
  for (std::size_t j = L; j-- > 0;) {
    const DenseLayer& layer = layers_[j];
    const Eigen::MatrixXd dpre = activation_backward(layer.activation, cache.outputs[j], d);
    g.dW[j] = dpre * cache.inputs[j].transpose();
    if (layer.has_bias()) g.db[j] = dpre.rowwise().sum();
    d = layer.W.transpose() * dpre;
  }
  g.dX = std::move(d);
  return g;
}

Eigen::Index MlpNetwork::parameter_count() const {
  Eigen::Index n = 0;
  for (const DenseLayer& layer : layers_) n += layer.W.size() + layer.b.size();
  return n;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void MlpNetwork::copy_parameters_to(double* dst) const {
  for (const DenseLayer& layer : layers_) {
    Eigen::Map<RowMajor>(dst, layer.W.rows(), layer.W.cols()) = layer.W;
    dst += layer.W.size();
    Eigen::Map<Eigen::VectorXd>(dst, layer.b.size()) = layer.b;
    dst += layer.b.size();
  }
}

void MlpNetwork::copy_parameters_from(const double* src) {
  for (DenseLayer& layer : layers_) {
    layer.W = Eigen::Map<const RowMajor>(src, layer.W.rows(), layer.W.cols());
    src += layer.W.size();
    layer.b = Eigen::Map<const Eigen::VectorXd>(src, layer.b.size());
    src += layer.b.size();
  }
}

void MlpNetwork::copy_gradients_to(const Gradients& g, double* dst) {
  for (std::size_t j = 0; j < g.dW.size(); ++j) {
    Eigen::Map<RowMajor>(dst, g.dW[j].rows(), g.dW[j].cols()) = g.dW[j];
    dst += g.dW[j].size();
    Eigen::Map<Eigen::VectorXd>(dst, g.db[j].size()) = g.db[j];
    dst += g.db[j].size();
  }
}

void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& s) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam: gradient size mismatch");
  if (!grads.allFinite()) throw std::domain_error("adam: non-finite gradient");
  if (s.m.size() != params.size()) {
    s.m = Eigen::VectorXd::Zero(params.size());
    s.v = Eigen::VectorXd::Zero(params.size());
  }
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

Normalizer Normalizer::fit(const Eigen::MatrixXd& samples) {
  if (samples.rows() == 0 || samples.cols() == 0) {
    throw std::invalid_argument("normalizer: empty dataset");
  }
  return {samples.rowwise().minCoeff(), samples.rowwise().maxCoeff()};
}

Eigen::VectorXd Normalizer::gain() const {
  Eigen::VectorXd g(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    const double range = max(i) - min(i);
    g(i) = range > 0.0 ? 2.0 / range : 0.0;
  }
  return g;
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != dim()) throw std::invalid_argument("normalizer: channel count mismatch");
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    const double range = max(i) - min(i);
    if (range > 0.0) {
      y.row(i) = ((x.row(i).array() - min(i)) * (2.0 / range) - 1.0).matrix();
    } else {
      y.row(i).setZero();
    }
  }
  return y;
}

Eigen::MatrixXd Normalizer::invert(const Eigen::MatrixXd& y) const {
  if (y.rows() != dim()) throw std::invalid_argument("normalizer: channel count mismatch");
  Eigen::MatrixXd x(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < dim(); ++i) {
    const double range = max(i) - min(i);
    x.row(i) = ((y.row(i).array() + 1.0) * (0.5 * range) + min(i)).matrix();
  }
  return x;
}

}  // namespace dkv
