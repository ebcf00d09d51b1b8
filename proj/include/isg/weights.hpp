#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace isg {

enum class PredicateMode { Single, Multi };

/// Dimensions of the scene-graph network. geo_dim must equal node_dim
/// because the gated geometric term is added to the node feature.
struct NetworkConfig {
  int node_dim = 32;
  int edge_dim = 32;
  int geo_dim = 32;
  int hidden_dim = 32;
  int layers = 2;
  int node_classes = 20;
  /// Single mode: includes the "none" class at index 0. Multi mode: one entry per predicate.
  int edge_classes = 9;
  PredicateMode mode = PredicateMode::Single;
  /// Cap on points fed to the point encoder per entity.
  std::size_t max_points = 512;

  void validate() const;
};

using TensorShape = std::pair<Eigen::Index, Eigen::Index>;

/// Every tensor name the configuration requires, with its shape.
std::map<std::string, TensorShape> expected_shapes(const NetworkConfig& cfg);

/// The image projection stands in for a frozen pretrained encoder and is not
/// trained; every other tensor is.
bool is_trainable(const std::string& name);

/// Named row-major tensors, "<block>.<layer>.<param>".
class NetworkWeights {
 public:
  NetworkWeights() = default;

  /// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases zero.
  static NetworkWeights random(const NetworkConfig& cfg, std::uint64_t seed);
  static NetworkWeights zeros(const NetworkConfig& cfg);

  const Eigen::MatrixXd& at(const std::string& name) const;
  Eigen::MatrixXd& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  void set(const std::string& name, Eigen::MatrixXd value) { tensors_[name] = std::move(value); }

  const std::map<std::string, Eigen::MatrixXd>& tensors() const { return tensors_; }

  /// Throws ShapeError on missing, unknown or mis-shaped tensors.
  void validate(const NetworkConfig& cfg) const;

  std::string to_json() const;
  /// Parses and validates against `cfg`.
  static NetworkWeights from_json(const std::string& text, const NetworkConfig& cfg, const std::string& origin = "<memory>");
  void save(const std::filesystem::path& path) const;
  static NetworkWeights load(const std::filesystem::path& path, const NetworkConfig& cfg);

  bool operator==(const NetworkWeights& other) const;

 private:
  std::map<std::string, Eigen::MatrixXd> tensors_;
};

}  // namespace isg
