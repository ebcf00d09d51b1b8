#include "isg/weights.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "isg/features.hpp"
#include "isg/rng.hpp"
#include "isg/types.hpp"

namespace isg {

using nlohmann::json;

void NetworkConfig::validate() const {
  if (node_dim <= 0 || edge_dim <= 0 || geo_dim <= 0 || hidden_dim <= 0)
    throw InvalidArgument("network dimensions must be positive");
  if (geo_dim != node_dim) throw InvalidArgument("geo_dim must equal node_dim");
  if (layers < 0) throw InvalidArgument("layer count must be >= 0");
  if (node_classes <= 0 || edge_classes <= 0) throw InvalidArgument("class counts must be positive");
}

std::map<std::string, TensorShape> expected_shapes(const NetworkConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = cfg.node_dim, e = cfg.edge_dim, g = cfg.geo_dim, h = cfg.hidden_dim;
  std::map<std::string, TensorShape> s;
  auto linear = [&](const std::string& block, int index, Eigen::Index out, Eigen::Index in, bool bias = true) {
    const std::string base = block + "." + std::to_string(index) + ".";
    s[base + "weight"] = {out, in};
    if (bias) s[base + "bias"] = {out, 1};
  };
  linear("image_proj", 0, n, kPatchLength, false);
  linear("point_enc", 0, h, 3);
  linear("point_enc", 1, g, h);
  linear("edge_mlp", 0, h, kEdgeInputLength);
  linear("edge_mlp", 1, e, h);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string mp = "mp" + std::to_string(l) + "_";
    linear(mp + "gate", 0, 1, n + g, false);
    linear(mp + "fan_att", 0, h, n + e);
    linear(mp + "fan_att", 1, n, h);
    linear(mp + "fan_value", 0, n, n, false);
    linear(mp + "node_mlp", 0, h, 2 * n);
    linear(mp + "node_mlp", 1, n, h);
    linear(mp + "edge_mlp", 0, h, 2 * n + e);
    linear(mp + "edge_mlp", 1, e, h);
  }
  for (const auto& [block, dim] : {std::pair<std::string, Eigen::Index>{"node_gru", n}, {"edge_gru", e}}) {
    for (const char* gate : {"r", "z", "n"}) {
      s[block + ".0.w_" + gate] = {dim, dim};
      s[block + ".0.u_" + gate] = {dim, dim};
      s[block + ".0.b_" + gate] = {dim, 1};
    }
  }
  linear("node_head", 0, cfg.node_classes, n);
  linear("edge_head", 0, cfg.edge_classes, e);
  return s;
}

bool is_trainable(const std::string& name) { return name.rfind("image_proj.", 0) != 0; }

NetworkWeights NetworkWeights::random(const NetworkConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  NetworkWeights w;
  for (const auto& [name, shape] : expected_shapes(cfg)) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(shape.first, shape.second);
    const bool is_bias = name.find(".b_") != std::string::npos || name.ends_with(".bias");
    if (!is_bias) {
      const double a = std::sqrt(6.0 / static_cast<double>(shape.first + shape.second));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-a, a);
    }
    w.tensors_[name] = std::move(m);
  }
  return w;
}

NetworkWeights NetworkWeights::zeros(const NetworkConfig& cfg) {
  NetworkWeights w;
  for (const auto& [name, shape] : expected_shapes(cfg)) w.tensors_[name] = Eigen::MatrixXd::Zero(shape.first, shape.second);
  return w;
}

const Eigen::MatrixXd& NetworkWeights::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("missing tensor '" + name + "'");
  return it->second;
}

Eigen::MatrixXd& NetworkWeights::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("missing tensor '" + name + "'");
  return it->second;
}

void NetworkWeights::validate(const NetworkConfig& cfg) const {
  const auto shapes = expected_shapes(cfg);
  for (const auto& [name, m] : tensors_) {
    auto it = shapes.find(name);
    if (it == shapes.end()) throw ShapeError("unknown tensor '" + name + "'");
    if (m.rows() != it->second.first || m.cols() != it->second.second)
      throw ShapeError("tensor '" + name + "' has shape [" + std::to_string(m.rows()) + ", " + std::to_string(m.cols()) +
                       "], expected [" + std::to_string(it->second.first) + ", " + std::to_string(it->second.second) +
                       "]");
    if (!m.allFinite()) throw ShapeError("tensor '" + name + "' has non-finite entries");
  }
  for (const auto& [name, shape] : shapes)
    if (!tensors_.contains(name)) throw ShapeError("missing tensor '" + name + "'");
}

std::string NetworkWeights::to_json() const {
  json doc = json::object();
  for (const auto& [name, m] : tensors_) {
    json data = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    doc[name] = {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
  }
  return doc.dump(1);
}

NetworkWeights NetworkWeights::from_json(const std::string& text, const NetworkConfig& cfg, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(origin, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw IoError(origin, 0, "weight file must be a JSON object");
  NetworkWeights w;
  for (const auto& [name, entry] : doc.items()) {
    if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data"))
      throw IoError(origin, 0, "tensor '" + name + "' needs 'shape' and 'data'");
    const auto& shape = entry["shape"];
    const auto& data = entry["data"];
    if (!shape.is_array() || shape.size() < 1 || shape.size() > 2 || !data.is_array())
      throw IoError(origin, 0, "tensor '" + name + "' has a malformed shape or data field");
    const auto rows = shape[0].get<Eigen::Index>();
    const auto cols = shape.size() == 2 ? shape[1].get<Eigen::Index>() : Eigen::Index{1};
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
      throw IoError(origin, 0, "tensor '" + name + "': data length does not match shape");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    w.tensors_[name] = std::move(m);
  }
  try {
    w.validate(cfg);
  } catch (const ShapeError& e) {
    throw IoError(origin, 0, e.what());
  }
  return w;
}

void NetworkWeights::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), 0, "cannot open for writing");
  out << to_json() << '\n';
}

NetworkWeights NetworkWeights::load(const std::filesystem::path& path, const NetworkConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), 0, "cannot open weight file");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), cfg, path.string());
}

bool NetworkWeights::operator==(const NetworkWeights& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (const auto& [name, m] : tensors_) {
    auto it = other.tensors_.find(name);
    if (it == other.tensors_.end() || it->second.rows() != m.rows() || it->second.cols() != m.cols() || it->second != m)
      return false;
  }
  return true;
}

}  // namespace isg
