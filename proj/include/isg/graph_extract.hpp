#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "isg/entity_map.hpp"
#include "isg/geometry.hpp"

namespace isg {

struct Keyframe {
  KeyframeId id = 0;
  RigidPose pose;
  CameraIntrinsics intrinsics;
};

struct PixelBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounds
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
};

/// Pixel bounding box of every non-zero label in a mask.
std::map<EntityLabel, PixelBox> label_boxes(const EntityMask& mask);

struct KeyframeGate {
  double rot_thresh_deg = 5.0;
  double trans_thresh_m = 0.3;
  int min_box_px = 200;
  /// true: a frame is too similar only if close in rotation AND translation.
  bool require_both = true;
};

/// Accepts a frame that is dissimilar to every existing keyframe and shows at
/// least one entity box whose smaller side exceeds min_box_px.
bool select_keyframe(const RigidPose& candidate, std::span<const RigidPose> existing,
                     const std::vector<PixelBox>& boxes, const KeyframeGate& gate = {});

struct EntityNode {
  EntityLabel label = kUnlabeled;
  std::vector<PointId> points;  // ascending, after outlier removal
  Obb obb;
};

struct ExtractConfig {
  std::size_t min_points = 10;
  OutlierConfig outliers;
  GravityConfig gravity;
};

/// Groups points by label, drops labels with fewer than min_points points,
/// removes outliers and fits a box. Labels whose filtered points are
/// degenerate for fit_obb are skipped. Result ordered by ascending label.
std::vector<EntityNode> extract_entities(const PointMap& map, const ExtractConfig& cfg = {});

/// Single-label variant used by the back end's cache; nullopt when rejected.
std::optional<EntityNode> extract_entity(EntityLabel label, std::span<const LabeledPoint> points,
                                         const ExtractConfig& cfg = {});

/// Bipartite entity-keyframe visibility with one witness point per edge.
struct VisibilityGraph {
  struct Edge {
    EntityLabel node;
    KeyframeId keyframe;
    PointId witness;
    auto operator<=>(const Edge&) const = default;
  };
  std::vector<Edge> edges;  // sorted by (node, keyframe)

  std::vector<KeyframeId> keyframes_of(EntityLabel node) const;
  bool has(EntityLabel node, KeyframeId kf) const;
};

VisibilityGraph build_visibility(std::span<const EntityNode> nodes, const PointMap& map,
                                 std::span<const Keyframe> keyframes);

/// Undirected proximity graph over node labels, no self loops.
struct NeighbourGraph {
  std::vector<std::pair<EntityLabel, EntityLabel>> edges;  // (a, b) with a < b, sorted

  std::map<EntityLabel, std::vector<EntityLabel>> adjacency() const;
  bool has(EntityLabel a, EntityLabel b) const;
};

NeighbourGraph build_neighbour(std::span<const EntityNode> nodes, double rho = 0.5, const GravityConfig& gravity = {});

}  // namespace isg
