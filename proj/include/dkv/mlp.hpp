#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dkv {

enum class Activation { Tanh, Relu, Linear };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::Tanh;
  bool has_bias = true;
};

/// y = act(W x + b). Samples are columns.
struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;  // empty when the layer has no bias
  Activation activation = Activation::Linear;

  bool has_bias() const { return b.size() > 0; }
  LayerSpec spec() const {
    return {static_cast<int>(W.cols()), static_cast<int>(W.rows()), activation, has_bias()};
  }
};

class MlpNetwork {
 public:
  /// Per-layer inputs and post-activation outputs of one forward pass.
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> outputs;
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    Eigen::MatrixXd dX;  // gradient w.r.t. the network input
  };

  MlpNetwork() = default;
  /// Zero-initialized network; throws if the layer dims do not chain.
  explicit MlpNetwork(const std::vector<LayerSpec>& specs);

  /// Xavier-uniform weights, zero biases.
  static MlpNetwork xavier(const std::vector<LayerSpec>& specs, std::mt19937_64& rng);

  /// in -> hidden... -> out with `hidden_act` on hidden layers and a linear output.
  static std::vector<LayerSpec> chain(int in, const std::vector<int>& hidden, int out,
                                      Activation hidden_act = Activation::Tanh);

  int input_dim() const;
  int output_dim() const;
  std::size_t depth() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Cache* cache = nullptr) const;
  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

  /// Reverse-mode gradients of <dY, forward(X)> for the X cached in `cache`.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& dY) const;

  /// Flat parameter layout: for each layer, W row-major then b.
  Eigen::Index parameter_count() const;
  void copy_parameters_to(double* dst) const;
  void copy_parameters_from(const double* src);
  static void copy_gradients_to(const Gradients& g, double* dst);

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

/// Bias-corrected Adam. Moments are lazily sized on the first call.
void adam_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, AdamState& state);

/// Per-channel affine map of [min, max] onto [-1, 1]. Constant channels map to 0.
struct Normalizer {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  /// `samples` holds one sample per column.
  static Normalizer fit(const Eigen::MatrixXd& samples);

  Eigen::Index dim() const { return min.size(); }
  /// d(normalized)/d(raw) per channel; 0 for constant channels.
  Eigen::VectorXd gain() const;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& y) const;
};

}  // namespace dkv
