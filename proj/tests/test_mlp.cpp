#include <doctest.h>

#include <cmath>
#include <random>

#include "dkv/mlp.hpp"

using namespace dkv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// <R, net(X)> for a fixed random projection R, as a scalar test loss.
double projected(const MlpNetwork& net, const MatrixXd& X, const MatrixXd& R) {
  return (net.forward(X).array() * R.array()).sum();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

void check_gradients(MlpNetwork net, const MatrixXd& X, const MatrixXd& R, double tol) {
  MlpNetwork::Cache cache;
  net.forward(X, &cache);
  const MlpNetwork::Gradients g = net.backward(cache, R);
  VectorXd analytic(net.parameter_count());
  MlpNetwork::copy_gradients_to(g, analytic.data());

  VectorXd theta(net.parameter_count());
  net.copy_parameters_to(theta.data());
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    VectorXd tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    net.copy_parameters_from(tp.data());
    const double fp = projected(net, X, R);
    net.copy_parameters_from(tm.data());
    const double fm = projected(net, X, R);
    worst = std::max(worst, rel_err((fp - fm) / (2 * h), analytic(i)));
  }
  net.copy_parameters_from(theta.data());
  CHECK(worst < tol);

  double worst_x = 0.0;
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      MatrixXd Xp = X, Xm = X;
      Xp(r, c) += h;
      Xm(r, c) -= h;
      worst_x = std::max(worst_x, rel_err((projected(net, Xp, R) - projected(net, Xm, R)) / (2 * h), g.dX(r, c)));
    }
  }
  CHECK(worst_x < tol);
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("construction checks layer chaining") {
  CHECK_THROWS_AS(MlpNetwork(std::vector<LayerSpec>{}), std::invalid_argument);
  CHECK_THROWS_AS(MlpNetwork({{2, 3, Activation::Tanh, true}, {4, 1, Activation::Linear, true}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(MlpNetwork({{0, 3, Activation::Tanh, true}}), std::invalid_argument);
  const auto specs = MlpNetwork::chain(3, {8, 8}, 2);
  REQUIRE(specs.size() == 3);
  CHECK(specs.back().activation == Activation::Linear);
  const MlpNetwork net(specs);
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 2);
  CHECK(net.parameter_count() == (3 * 8 + 8) + (8 * 8 + 8) + (8 * 2 + 2));
}

TEST_CASE("activation names round-trip") {
  for (Activation a : {Activation::Tanh, Activation::Relu, Activation::Linear}) {
    CHECK(parse_activation(to_string(a)) == a);
  }
  CHECK_THROWS_AS(parse_activation("sigmoid"), std::invalid_argument);
}

TEST_CASE("identity and zero layers") {
  MlpNetwork lin({{3, 3, Activation::Linear, true}});
  lin.layers()[0].W.setIdentity();
  const VectorXd x = VectorXd::LinSpaced(3, -1.0, 2.0);
  CHECK(lin.forward_one(x) == x);

  const MlpNetwork zero({{3, 4, Activation::Tanh, true}});
  CHECK(zero.forward_one(x).isZero(0.0));
}

TEST_CASE("two-layer forward matches a scalar evaluation") {
  MlpNetwork net({{2, 3, Activation::Tanh, true}, {3, 1, Activation::Linear, true}});
  net.layers()[0].W << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  net.layers()[0].b << 0.01, -0.02, 0.03;
  net.layers()[1].W << 0.7, -0.8, 0.9;
  net.layers()[1].b << -0.1;
  const double x0 = 0.5, x1 = -1.5;
  const double h0 = std::tanh(0.1 * x0 - 0.2 * x1 + 0.01);
  const double h1 = std::tanh(0.3 * x0 + 0.4 * x1 - 0.02);
  const double h2 = std::tanh(-0.5 * x0 + 0.6 * x1 + 0.03);
  const double expected = 0.7 * h0 - 0.8 * h1 + 0.9 * h2 - 0.1;
  CHECK(net.forward_one((VectorXd(2) << x0, x1).finished())(0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("forward rejects wrong input dims and is deterministic") {
  std::mt19937_64 rng(1);
  const MlpNetwork net = MlpNetwork::xavier(MlpNetwork::chain(3, {5}, 2), rng);
  CHECK_THROWS_AS(net.forward(MatrixXd::Zero(4, 2)), std::invalid_argument);
  const MatrixXd X = MatrixXd::Random(3, 7);
  const MatrixXd a = net.forward(X), b = net.forward(X);
  CHECK(a == b);
  for (Eigen::Index c = 0; c < X.cols(); ++c) CHECK(net.forward_one(X.col(c)).isApprox(a.col(c), 1e-15));
}

TEST_CASE("backward: zero output gradient and linear closed form") {
  std::mt19937_64 rng(2);
  const MlpNetwork net = MlpNetwork::xavier(MlpNetwork::chain(3, {4, 4}, 2), rng);
  const MatrixXd X = MatrixXd::Random(3, 5);
  MlpNetwork::Cache cache;
  net.forward(X, &cache);
  const auto g = net.backward(cache, MatrixXd::Zero(2, 5));
  for (const auto& dW : g.dW) CHECK(dW.isZero(0.0));
  for (const auto& db : g.db) CHECK(db.isZero(0.0));
  CHECK(g.dX.isZero(0.0));
  CHECK_THROWS_AS(net.backward(cache, MatrixXd::Zero(3, 5)), std::invalid_argument);

  const MlpNetwork lin = MlpNetwork::xavier({{3, 2, Activation::Linear, false}}, rng);
  MlpNetwork::Cache c2;
  lin.forward(X, &c2);
  const MatrixXd dY = MatrixXd::Random(2, 5);
  const auto gl = lin.backward(c2, dY);
  CHECK(gl.dW[0].isApprox(dY * X.transpose(), 1e-14));
  CHECK(gl.dX.isApprox(lin.layers()[0].W.transpose() * dY, 1e-14));
}

TEST_CASE("gradients match central finite differences") {
  std::mt19937_64 rng(7);
  const std::vector<std::vector<LayerSpec>> nets = {
      MlpNetwork::chain(3, {8, 8}, 4, Activation::Tanh),
      MlpNetwork::chain(5, {16, 7, 9}, 3, Activation::Tanh),
      {{4, 6, Activation::Tanh, false}, {6, 2, Activation::Linear, true}},
      MlpNetwork::chain(2, {6}, 2, Activation::Linear),
  };
  for (const auto& specs : nets) {
    MlpNetwork net = MlpNetwork::xavier(specs, rng);
    // Non-zero biases so every bias gradient is exercised.
    std::normal_distribution<double> N(0.0, 0.3);
    for (auto& l : net.layers()) {
      for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = N(rng);
    }
    const MatrixXd X = MatrixXd::Random(net.input_dim(), 4);
    const MatrixXd R = MatrixXd::Random(net.output_dim(), 4);
    check_gradients(net, X, R, 1e-6);
  }
}

TEST_CASE("relu gradients away from the kink") {
  std::mt19937_64 rng(9);
  MlpNetwork net = MlpNetwork::xavier(MlpNetwork::chain(3, {6, 6}, 2, Activation::Relu), rng);
  for (auto& l : net.layers()) l.b.setConstant(0.05);
  const MatrixXd X = MatrixXd::Random(3, 3);
  check_gradients(net, X, MatrixXd::Random(2, 3), 1e-6);
}

TEST_CASE("parameter copy round-trip") {
  std::mt19937_64 rng(4);
  MlpNetwork a = MlpNetwork::xavier(MlpNetwork::chain(3, {5, 5}, 3), rng);
  VectorXd theta(a.parameter_count());
  a.copy_parameters_to(theta.data());
  MlpNetwork b(MlpNetwork::chain(3, {5, 5}, 3));
  b.copy_parameters_from(theta.data());
  const MatrixXd X = MatrixXd::Random(3, 4);
  CHECK(a.forward(X) == b.forward(X));
  // Row-major W then b.
  CHECK(theta(1) == a.layers()[0].W(0, 1));
  CHECK(theta(3) == a.layers()[0].W(1, 0));
  CHECK(theta(15) == a.layers()[0].b(0));
}

TEST_CASE("xavier initialisation bounds") {
  std::mt19937_64 rng(5);
  const MlpNetwork net = MlpNetwork::xavier(MlpNetwork::chain(10, {30}, 6), rng);
  const double lim0 = std::sqrt(6.0 / (10 + 30));
  CHECK(net.layers()[0].W.cwiseAbs().maxCoeff() <= lim0);
  CHECK(net.layers()[0].b.isZero(0.0));
  std::mt19937_64 rng2(5);
  CHECK(MlpNetwork::xavier(MlpNetwork::chain(10, {30}, 6), rng2).layers()[0].W == net.layers()[0].W);
}

TEST_CASE("adam: zero gradient, first step, quadratic descent") {
  AdamState s;
  VectorXd p = VectorXd::LinSpaced(4, -1.0, 1.0);
  const VectorXd p0 = p;
  adam_step(p, VectorXd::Zero(4), s);
  CHECK(p == p0);
  CHECK(s.step == 1);

  AdamState s1;
  VectorXd q = p0;
  VectorXd g(4);
  g << 3.0, -0.2, 0.5, -50.0;
  adam_step(q, g, s1);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs((q(i) - p0(i)) + s1.lr * (g(i) > 0 ? 1.0 : -1.0)) < 1e-9);
  }

  AdamState s2;
  s2.lr = 0.1;
  VectorXd x(1);
  x << 2.0;
  const double f0 = x(0) * x(0);
  for (int k = 0; k < 2; ++k) {
    VectorXd grad(1);
    grad << 2.0 * x(0);
    adam_step(x, grad, s2);
  }
  CHECK(x(0) * x(0) < f0);

  VectorXd bad(4);
  bad << 1.0, NAN, 0.0, 0.0;
  CHECK_THROWS_AS(adam_step(p, bad, s), std::domain_error);
  CHECK_THROWS_AS(adam_step(p, VectorXd::Zero(3), s), std::invalid_argument);
}

TEST_CASE("normalizer endpoints, roundtrip and constant channels") {
  MatrixXd data(3, 4);
  data << 0.0, 1.0, 2.0, 4.0,  //
      -5.0, 5.0, 0.0, 1.0,     //
      5.0, 5.0, 5.0, 5.0;
  const Normalizer n = Normalizer::fit(data);
  CHECK(n.min(0) == 0.0);
  CHECK(n.max(0) == 4.0);
  const MatrixXd y = n.apply(data);
  CHECK(y(0, 0) == -1.0);
  CHECK(y(0, 3) == 1.0);
  CHECK(y(1, 0) == -1.0);
  CHECK(y(1, 1) == 1.0);
  CHECK(y.row(2).isZero(0.0));
  CHECK(n.gain()(2) == 0.0);

  Eigen::VectorXd five(3);
  five << 2.0, 0.0, 5.0;
  CHECK(n.apply(five)(2) == 0.0);
  CHECK(n.invert(Eigen::VectorXd::Zero(3))(2) == 5.0);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(3);
    x << 4.0 * U(rng), -5.0 + 10.0 * U(rng), 5.0;
    CHECK((n.invert(n.apply(x)) - x).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(Normalizer::fit(MatrixXd(3, 0)), std::invalid_argument);
  CHECK_THROWS_AS(n.apply(MatrixXd::Zero(2, 1)), std::invalid_argument);
}

}
