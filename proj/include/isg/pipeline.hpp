#pragma once

#include <map>
#include <string>
#include <vector>

#include "isg/entity_map.hpp"
#include "isg/graph_extract.hpp"
#include "isg/graph_fusion.hpp"
#include "isg/io.hpp"
#include "isg/network.hpp"
#include "isg/sequence.hpp"

namespace isg {

struct PipelineConfig {
  AssociationConfig association;
  RenderConfig render;
  KeyframeGate keyframe;
  ExtractConfig extract;
  NetworkConfig network;
  double rho = 0.5;
  double omega_max = kDefaultMaxWeight;
  /// Graph prediction every `tick_every` keyframes; the last keyframe always
  /// gets one.
  int tick_every = 1;
  /// Run the graph back end on a worker thread.
  bool async = true;
  /// false: label fusion only (no graph prediction).
  bool predict_graph = true;

  void validate() const;
};

/// Keys: theta, strategy, splat_radius, keyframe{rot_deg, trans_m, min_box_px, require_both},
/// min_points, outlier{mean_k, std_ratio}, gravity_up, rho, omega_max, layers,
/// dims{node, edge, hidden}, classes{node, edge}, mode, max_points, tick_every, async.
/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig parse_config(const std::string& json_text, const std::string& origin = "<memory>");
std::string config_json(const PipelineConfig& cfg);

struct FrameLog {
  std::size_t frame = 0;
  bool keyframe = false;
  std::map<EntityLabel, EntityLabel> mapping;  // mask label -> map label
  std::vector<EntityLabel> new_labels;
};

struct RunResult {
  PointMap map;
  GlobalSceneGraph graph;
  io::ExportedGraph exported;
  std::vector<FrameLog> frames;
  std::size_t keyframes = 0;
  std::size_t ticks = 0;
  std::vector<double> label_fusion_ms;
  std::vector<double> graph_estimation_ms;

  std::map<std::string, io::StageStats> timings() const;
};

/// Replays every frame in order: upsert points, gate keyframes, associate and
/// fuse labels, collect per-view features, and hand immutable snapshots to the
/// graph back end (extract, predict, integrate).
RunResult run_pipeline(const FrameSource& source, const NetworkWeights& weights, const PipelineConfig& cfg);

/// Estimated points of a map (labelled and unlabelled) for evaluation.
std::vector<EstPoint> estimated_points(const PointMap& map);

/// Metrics for a finished run against ground truth.
std::map<std::string, double> evaluate(const PointMap& map, const PredictedGraph& pred, const GroundTruth& gt,
                                       const RecallOptions& options = {});

/// Writes map.ply, scene_graph.json, graph.dot, timings.json and, when `gt`
/// is given, metrics.json.
void write_outputs(const std::filesystem::path& out, const RunResult& r, const GroundTruth* gt,
                   const std::vector<std::string>& node_classes = {}, const std::vector<std::string>& edge_classes = {});

}  // namespace isg
