#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "isg/ad.hpp"
#include "isg/features.hpp"
#include "isg/weights.hpp"

namespace isg {

/// Network inputs for one graph snapshot. Nodes are indexed 0..N-1; edges are
/// directed pairs of node indices.
struct GraphInputs {
  /// Initial node features f_i (node_dim).
  std::vector<FeatureVec> node_features;
  /// Normalised entity points (3 x n_i) for the point encoder.
  std::vector<Eigen::Matrix3Xd> node_points;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  /// Raw edge inputs [c_j - c_i, d_j - d_i, R] (12), one per edge.
  std::vector<FeatureVec> edge_inputs;

  std::size_t node_count() const { return node_features.size(); }
  /// Throws ShapeError on inconsistent sizes or dimensions.
  void validate(const NetworkConfig& cfg) const;
};

struct Prediction {
  std::vector<Eigen::VectorXd> node_logits, node_probs;
  /// Single mode: softmax distribution; Multi mode: per-predicate sigmoid.
  std::vector<Eigen::VectorXd> edge_logits, edge_probs;
  PredicateMode mode = PredicateMode::Single;
};

/// Ground truth for the loss. Single mode uses edge_classes, Multi mode uses
/// edge_multi (0/1 per predicate).
struct GraphTargets {
  std::vector<int> node_classes;
  std::vector<int> edge_classes;
  std::vector<Eigen::VectorXd> edge_multi;
};

/// Per-layer intermediate values, exposed for inspection and tests.
struct LayerTrace {
  std::vector<FeatureVec> fused;          // v+
  std::vector<FeatureVec> attention;      // per edge
  std::vector<FeatureVec> node_messages;  // m_i
  std::vector<FeatureVec> edge_messages;  // m_ij
};

// Value-level building blocks. Each evaluates the same tape code as forward.

/// PointNet without feature transforms: shared per-point MLP, then max over points.
FeatureVec point_encoder(const Eigen::Matrix3Xd& points, const NetworkWeights& w);
/// g_e applied to the 12-vector edge input.
FeatureVec edge_feature(const FeatureVec& edge_input, const NetworkWeights& w);
/// v + sigmoid(gate . [v, g]) * sigmoid(g). `gate` is 1 x (|v| + |g|).
FeatureVec gated_fuse(const FeatureVec& v, const FeatureVec& g, const Eigen::MatrixXd& gate);

struct FanResult {
  FeatureVec attention;  // softmax over feature components
  FeatureVec output;     // attention (.) (W_v v_j)
};
FanResult fan(const FeatureVec& query, const FeatureVec& key, const FeatureVec& value, const NetworkWeights& w,
              int layer);

struct Messages {
  std::vector<FeatureVec> node;  // m_i
  std::vector<FeatureVec> edge;  // m_ij, aligned with the edge list
};
Messages message_layer(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       const std::vector<FeatureVec>& fused_nodes, const std::vector<FeatureVec>& edge_features,
                       const NetworkWeights& w, int layer);

/// GRU cell `block` ("node_gru" or "edge_gru") with x as input and h as state.
FeatureVec gru_update(const FeatureVec& h, const FeatureVec& x, const NetworkWeights& w, const std::string& block);

Prediction forward(const GraphInputs& inputs, const NetworkWeights& w, const NetworkConfig& cfg,
                   std::vector<LayerTrace>* trace = nullptr);

/// Mean node cross-entropy plus mean edge cross-entropy (Single) or mean
/// binary cross-entropy over edges and predicates (Multi).
double loss(const Prediction& pred, const GraphTargets& gt);

struct LossAndGrad {
  double loss = 0.0;
  std::map<std::string, Eigen::MatrixXd> grads;
};
LossAndGrad loss_and_grad(const GraphInputs& inputs, const GraphTargets& gt, const NetworkWeights& w,
                          const NetworkConfig& cfg);

}  // namespace isg
