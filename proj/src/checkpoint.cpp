#include "dkv/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace dkv {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw std::runtime_error("checkpoint: matrix data size does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json network_to_json(const MlpNetwork& net) {
  json layers = json::array();
  for (const DenseLayer& layer : net.layers()) {
    json l = {{"in", layer.W.cols()},
              {"out", layer.W.rows()},
              {"activation", to_string(layer.activation)},
              {"has_bias", layer.has_bias()},
              {"W", matrix_to_json(layer.W)}};
    if (layer.has_bias()) l["b"] = vector_to_json(layer.b);
    layers.push_back(std::move(l));
  }
  return {{"layers", std::move(layers)}};
}

MlpNetwork network_from_json(const json& j) {
  std::vector<LayerSpec> specs;
  for (const json& l : j.at("layers")) {
    specs.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                     parse_activation(l.at("activation").get<std::string>()), l.at("has_bias").get<bool>()});
  }
  MlpNetwork net(specs);
  std::size_t i = 0;
  for (const json& l : j.at("layers")) {
    DenseLayer& layer = net.layers()[i++];
    const Eigen::MatrixXd W = matrix_from_json(l.at("W"));
    if (W.rows() != layer.W.rows() || W.cols() != layer.W.cols()) {
      throw std::runtime_error("checkpoint: layer weight shape does not match its spec");
    }
    layer.W = W;
    if (layer.has_bias()) {
      const Eigen::VectorXd b = vector_from_json(l.at("b"));
      if (b.size() != layer.b.size()) throw std::runtime_error("checkpoint: bias length mismatch");
      layer.b = b;
    }
  }
  return net;
}

json normalizer_to_json(const Normalizer& n) {
  return {{"min", vector_to_json(n.min)}, {"max", vector_to_json(n.max)}};
}

Normalizer normalizer_from_json(const json& j) {
  Normalizer n{vector_from_json(j.at("min")), vector_from_json(j.at("max"))};
  if (n.min.size() != n.max.size()) throw std::runtime_error("checkpoint: normalizer min/max length mismatch");
  for (Eigen::Index i = 0; i < n.dim(); ++i) {
    if (n.min(i) > n.max(i)) throw std::runtime_error("checkpoint: normalizer has min > max");
  }
  return n;
}

json checkpoint_to_json(const KoopmanModel& model, const json& train_config) {
  json j = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"dims", {{"n", model.dims.n}, {"m", model.dims.m}, {"p", model.dims.p}}},
      {"dt", model.dt},
      {"epochs_trained", model.epochs_trained},
      {"squared_norms", model.squared_norms},
      {"loss_weights",
       {{"linear", model.weights.linear},
        {"recon", model.weights.recon},
        {"pred", model.weights.pred},
        {"accel", model.weights.accel}}},
      {"state_normalizer", normalizer_to_json(model.state_norm)},
      {"input_normalizer", normalizer_to_json(model.input_norm)},
      {"encoder", network_to_json(model.encoder)},
      {"decoder", network_to_json(model.decoder)},
      {"A", matrix_to_json(model.A)},
      {"B", matrix_to_json(model.B)},
  };
  if (!train_config.is_null()) j["train_config"] = train_config;
  return j;
}

KoopmanModel checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw std::runtime_error("checkpoint: unrecognized format tag");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("checkpoint: unsupported version " + j.at("version").dump());
    }
    KoopmanModel model;
    const json& d = j.at("dims");
    model.dims = {d.at("n").get<int>(), d.at("m").get<int>(), d.at("p").get<int>()};
    model.dt = j.at("dt").get<double>();
    model.epochs_trained = j.at("epochs_trained").get<int>();
    model.squared_norms = j.at("squared_norms").get<bool>();
    const json& w = j.at("loss_weights");
    model.weights = {w.at("linear").get<double>(), w.at("recon").get<double>(), w.at("pred").get<double>(),
                     w.at("accel").get<double>()};
    model.state_norm = normalizer_from_json(j.at("state_normalizer"));
    model.input_norm = normalizer_from_json(j.at("input_normalizer"));
    model.encoder = network_from_json(j.at("encoder"));
    model.decoder = network_from_json(j.at("decoder"));
    model.A = matrix_from_json(j.at("A"));
    model.B = matrix_from_json(j.at("B"));
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: inconsistent model: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const KoopmanModel& model, const json& train_config) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << checkpoint_to_json(model, train_config).dump(1) << '\n';
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

KoopmanModel load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": not valid JSON: " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace dkv
