#include "isg/graph_fusion.hpp"

#include <algorithm>
#include <cmath>

#include "isg/types.hpp"

namespace isg {

Belief fuse_belief(const Belief& stored, const Eigen::VectorXd& incoming, double incoming_weight, double max_weight) {
  if (!(incoming_weight > 0.0)) throw InvalidArgument("incoming belief weight must be positive");
  if (stored.weight <= 0.0) return {incoming, std::min(max_weight, incoming_weight)};
  if (stored.probs.size() != incoming.size())
    throw ShapeError("belief has " + std::to_string(stored.probs.size()) + " entries, prediction has " +
                     std::to_string(incoming.size()));
  const double total = incoming_weight + stored.weight;
  Belief out;
  out.probs = (incoming * incoming_weight + stored.probs * stored.weight) / total;
  out.weight = std::min(max_weight, total);
  return out;
}

int argmax_class(const Eigen::VectorXd& probs) {
  if (probs.size() == 0) throw EmptyInput("argmax of an empty distribution");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs(i) > probs(best)) best = i;
  return static_cast<int>(best);
}

GlobalSceneGraph::GlobalSceneGraph(double max_weight) : max_weight_(max_weight) {
  if (!(max_weight > 0.0)) throw InvalidArgument("maximum belief weight must be positive");
}

void GlobalSceneGraph::integrate(const Prediction& pred, const std::vector<EntityNode>& nodes,
                                 const std::vector<EdgeKey>& edges) {
  if (pred.node_probs.size() != nodes.size()) throw ShapeError("prediction and snapshot disagree on node count");
  if (pred.edge_probs.size() != edges.size()) throw ShapeError("prediction and snapshot disagree on edge count");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& slot = nodes_[nodes[i].label];
    slot.entity = nodes[i];
    slot.belief = fuse_belief(slot.belief, pred.node_probs[i], 1.0, max_weight_);
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& key = edges[k];
    if (key.first == key.second) throw InvalidArgument("self edges are not allowed");
    if (!nodes_.contains(key.first) || !nodes_.contains(key.second))
      throw InvalidArgument("edge endpoint is not a node");
    auto& b = edges_[key];
    b = fuse_belief(b, pred.edge_probs[k], 1.0, max_weight_);
  }
}

void GlobalSceneGraph::retain(const std::set<EntityLabel>& alive) {
  std::erase_if(nodes_, [&](const auto& kv) { return !alive.contains(kv.first); });
  std::erase_if(edges_, [&](const auto& kv) {
    return !alive.contains(kv.first.first) || !alive.contains(kv.first.second);
  });
}

}  // namespace isg
