#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "isg/graph_fusion.hpp"
#include "isg/types.hpp"

namespace isg {

using InstanceId = std::uint32_t;

struct GtPoint {
  Vec3 position;
  InstanceId instance = 0;
};

struct Triplet {
  InstanceId subject = 0;
  int predicate = 0;
  InstanceId object = 0;
  auto operator<=>(const Triplet&) const = default;
};

struct GroundTruth {
  std::vector<GtPoint> points;
  std::map<InstanceId, int> instance_class;
  std::vector<Triplet> triplets;
  std::vector<std::string> node_classes;
  std::vector<std::string> edge_classes;

  /// Throws InvalidArgument when triplet endpoints or point instances are unknown.
  void validate() const;
};

struct EstPoint {
  Vec3 position;
  EntityLabel label = kUnlabeled;
};

/// GT instance of the nearest GT point, for every estimated point.
std::vector<InstanceId> nearest_instances(std::span<const EstPoint> est, std::span<const GtPoint> gt);

/// Dominant-segment points over all labelled estimated points. Unlabelled
/// estimated points are ignored. Throws EmptyInput when either side is empty.
double aos(std::span<const EstPoint> est, std::span<const GtPoint> gt);

/// Sum over instances of (dominant / |S_i|), the displayed-formula variant;
/// not bounded by 1.
double aos_sum_of_ratios(std::span<const EstPoint> est, std::span<const GtPoint> gt);

struct SegmentMapping {
  std::map<EntityLabel, InstanceId> instance;
  std::map<EntityLabel, std::size_t> point_count;
};

/// Majority vote of nearest-neighbour GT instances per estimated label,
/// ties to the lower instance id.
SegmentMapping map_segments(std::span<const EstPoint> est, std::span<const GtPoint> gt);

struct PredictedGraph {
  std::map<EntityLabel, Eigen::VectorXd> node_probs;
  std::map<EdgeKey, Eigen::VectorXd> edge_probs;
  PredicateMode mode = PredicateMode::Single;

  static PredictedGraph from(const GlobalSceneGraph& graph, PredicateMode mode);
};

struct RecallOptions {
  /// Single mode: also score pairs that have no GT relationship as class 0.
  bool include_none = true;
};

struct RecallSuite {
  double obj_recall = 0.0, pred_recall = 0.0, rel_recall = 0.0;
  double obj_mrecall = 0.0, pred_mrecall = 0.0;
};

/// Top-1 recalls. Every GT instance is represented by the mapped segment with
/// the most points (ties to the lower label); instances without a segment
/// count as misses. Scored relationships are the GT triplets plus, with
/// include_none, every predicted edge between two representatives that has no
/// GT relationship (target class 0). A missing predicted edge predicts class 0.
/// Multi mode counts a triplet predicate when its probability exceeds 0.5.
RecallSuite recall_suite(const PredictedGraph& pred, const SegmentMapping& mapping, const GroundTruth& gt,
                         const RecallOptions& options = {});

/// Flat metric map with sorted keys.
std::string metrics_json(const std::map<std::string, double>& metrics);

std::map<std::string, double> metrics_map(double aos_value, double aos_ratio_sum, const RecallSuite& r);

}  // namespace isg
