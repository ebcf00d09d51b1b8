#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isg/entity_map.hpp"
#include "isg/eval.hpp"
#include "isg/features.hpp"
#include "isg/graph_fusion.hpp"

namespace isg::io {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string read_text(const fs::path& path);
/// Writes atomically enough for our purposes: truncate, write, close, check.
void write_text(const fs::path& path, const std::string& content);

CameraIntrinsics read_intrinsics(const fs::path& path);
void write_intrinsics(const fs::path& path, const CameraIntrinsics& K);

/// 4x4 row-major world-from-camera matrix.
RigidPose read_pose(const fs::path& path);
void write_pose(const fs::path& path, const RigidPose& pose);

struct ObservedPoint {
  PointId id = 0;
  Vec3 position = Vec3::Zero();
};
std::vector<ObservedPoint> read_points(const fs::path& path);
void write_points(const fs::path& path, const std::vector<ObservedPoint>& points);

/// Binary PGM (P5). 16-bit samples are big-endian; maxval < 256 is read as 8-bit.
Raster<std::uint16_t> read_pgm(const fs::path& path);
void write_pgm16(const fs::path& path, const Raster<std::uint16_t>& image);

EntityMask read_label_mask(const fs::path& path);
void write_label_mask(const fs::path& path, const EntityMask& mask);
/// Samples are value / 65535.
ConfidenceMask read_confidence_mask(const fs::path& path);
/// Confidences are rounded to the nearest 1/65535.
void write_confidence_mask(const fs::path& path, const ConfidenceMask& mask);
/// The value a confidence takes after a write/read round trip.
double quantize_confidence(double c);

/// Binary PPM (P6, maxval 255).
RgbImage read_ppm(const fs::path& path);
void write_ppm(const fs::path& path, const RgbImage& image);

/// Lines "label v_1 ... v_D".
std::map<EntityLabel, FeatureVec> read_features(const fs::path& path);
void write_features(const fs::path& path, const std::map<EntityLabel, FeatureVec>& features);

/// ASCII PLY with x y z id label weight.
void write_map_ply(const fs::path& path, const PointMap& map);
PointMap read_map_ply(const fs::path& path);

struct GtCloudPoint {
  PointId id = 0;
  Vec3 position = Vec3::Zero();
  InstanceId instance = 0;
  int class_id = 0;
};
/// ASCII PLY with x y z id instance class.
void write_gt_ply(const fs::path& path, const std::vector<GtCloudPoint>& points);
std::vector<GtCloudPoint> read_gt_ply(const fs::path& path);

struct GtGraph {
  std::vector<std::string> node_classes;
  std::vector<std::string> edge_classes;
  std::map<InstanceId, int> instance_class;
  std::vector<Triplet> triplets;
  PredicateMode mode = PredicateMode::Single;
};
std::string gt_graph_json(const GtGraph& g);
GtGraph parse_gt_graph(const std::string& text, const std::string& origin = "<memory>");

/// Loads gt_graph.json and gt_points.ply from a directory.
GroundTruth read_ground_truth(const fs::path& dir);

/// The exported scene graph: what scene_graph.json holds.
struct ExportedNode {
  EntityLabel label = 0;
  int class_id = 0;
  Eigen::VectorXd class_probs;
  Obb obb;
  double weight = 0.0;
};
struct ExportedEdge {
  EntityLabel from = 0, to = 0;
  Eigen::VectorXd pred_probs;
  double weight = 0.0;
};
struct ExportedGraph {
  PredicateMode mode = PredicateMode::Single;
  std::vector<ExportedNode> nodes;
  std::vector<ExportedEdge> edges;

  static ExportedGraph from(const GlobalSceneGraph& graph, PredicateMode mode);
  PredictedGraph predicted() const;
};
std::string scene_graph_json(const ExportedGraph& g);
ExportedGraph parse_scene_graph(const std::string& text, const std::string& origin = "<memory>");
/// Graphviz rendering; class names are used when given.
std::string scene_graph_dot(const ExportedGraph& g, const std::vector<std::string>& node_classes = {},
                            const std::vector<std::string>& edge_classes = {});

std::map<std::string, double> parse_metrics(const std::string& text, const std::string& origin = "<memory>");

struct StageStats {
  double mean_ms = 0.0, p50_ms = 0.0, p90_ms = 0.0, p99_ms = 0.0;
  std::size_t count = 0;
};
/// Nearest-rank percentiles of the samples.
StageStats summarize(std::vector<double> samples_ms);
std::string timings_json(const std::map<std::string, StageStats>& stages);

std::string frame_stem(std::size_t index);

}  // namespace isg::io
