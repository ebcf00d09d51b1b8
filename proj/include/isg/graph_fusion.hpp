#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "isg/graph_extract.hpp"
#include "isg/network.hpp"

namespace isg {

inline constexpr double kDefaultMaxWeight = 100.0;

struct Belief {
  Eigen::VectorXd probs;
  double weight = 0.0;
};

/// probs' = (p_new w_new + p_old w_old) / (w_new + w_old); weight' = min(max_weight, w_new + w_old).
/// An empty stored belief (weight 0) adopts the incoming distribution.
Belief fuse_belief(const Belief& stored, const Eigen::VectorXd& incoming, double incoming_weight = 1.0,
                   double max_weight = kDefaultMaxWeight);

/// Lowest index among the maximal entries.
int argmax_class(const Eigen::VectorXd& probs);

struct SceneNode {
  EntityNode entity;
  Belief belief;
};

using EdgeKey = std::pair<EntityLabel, EntityLabel>;

class GlobalSceneGraph {
 public:
  explicit GlobalSceneGraph(double max_weight = kDefaultMaxWeight);

  /// Fuses a prediction made on a snapshot. `nodes[i]` is the entity behind
  /// prediction node i, `edges[k]` the label pair of prediction edge k.
  void integrate(const Prediction& pred, const std::vector<EntityNode>& nodes, const std::vector<EdgeKey>& edges);

  /// Drops nodes whose labels are not in `alive`, with their incident edges.
  void retain(const std::set<EntityLabel>& alive);

  const std::map<EntityLabel, SceneNode>& nodes() const { return nodes_; }
  const std::map<EdgeKey, Belief>& edges() const { return edges_; }
  double max_weight() const { return max_weight_; }

 private:
  double max_weight_;
  std::map<EntityLabel, SceneNode> nodes_;
  std::map<EdgeKey, Belief> edges_;
};

}  // namespace isg
