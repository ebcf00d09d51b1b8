#include "isg/graph_extract.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace isg {

std::map<EntityLabel, PixelBox> label_boxes(const EntityMask& mask) {
  std::map<EntityLabel, PixelBox> boxes;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const EntityLabel l = mask.at(x, y);
      if (l == kUnlabeled) continue;
      auto [it, inserted] = boxes.try_emplace(l, PixelBox{x, y, x, y});
      if (!inserted) {
        auto& b = it->second;
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
  }
  return boxes;
}

bool select_keyframe(const RigidPose& candidate, std::span<const RigidPose> existing,
                     const std::vector<PixelBox>& boxes, const KeyframeGate& gate) {
  const bool has_valid_box = std::any_of(boxes.begin(), boxes.end(), [&](const PixelBox& b) {
    return std::min(b.width(), b.height()) > gate.min_box_px;
  });
  if (!has_valid_box) return false;

  const double rot_thresh = gate.rot_thresh_deg * std::numbers::pi / 180.0;
  for (const auto& kf : existing) {
    const bool close_rot = rotation_angle(kf.rotation, candidate.rotation) <= rot_thresh;
    const bool close_trans = (kf.translation - candidate.translation).norm() <= gate.trans_thresh_m;
    const bool too_similar = gate.require_both ? (close_rot && close_trans) : (close_rot || close_trans);
    if (too_similar) return false;
  }
  return true;
}

std::optional<EntityNode> extract_entity(EntityLabel label, std::span<const LabeledPoint> points,
                                         const ExtractConfig& cfg) {
  if (points.size() < cfg.min_points || points.empty()) return std::nullopt;
  std::vector<const LabeledPoint*> sorted;
  sorted.reserve(points.size());
  for (const auto& p : points) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  std::vector<Vec3> positions;
  positions.reserve(sorted.size());
  for (const auto* p : sorted) positions.push_back(p->position);
  const auto kept = outlier_inliers(positions, cfg.outliers);

  std::vector<Vec3> filtered;
  EntityNode node;
  node.label = label;
  for (std::size_t i : kept) {
    filtered.push_back(positions[i]);
    node.points.push_back(sorted[i]->id);
  }
  try {
    node.obb = fit_obb(filtered, cfg.gravity);
  } catch (const DegenerateGeometry&) {
    return std::nullopt;
  }
  return node;
}

std::vector<EntityNode> extract_entities(const PointMap& map, const ExtractConfig& cfg) {
  std::map<EntityLabel, std::vector<LabeledPoint>> groups;
  for (const auto& [id, p] : map.points())
    if (p.label != kUnlabeled) groups[p.label].push_back(p);

  std::vector<EntityNode> nodes;
  for (const auto& [label, pts] : groups)
    if (auto node = extract_entity(label, pts, cfg)) nodes.push_back(std::move(*node));
  return nodes;
}

std::vector<KeyframeId> VisibilityGraph::keyframes_of(EntityLabel node) const {
  std::vector<KeyframeId> out;
  for (const auto& e : edges)
    if (e.node == node) out.push_back(e.keyframe);
  return out;
}

bool VisibilityGraph::has(EntityLabel node, KeyframeId kf) const {
  return std::any_of(edges.begin(), edges.end(), [&](const Edge& e) { return e.node == node && e.keyframe == kf; });
}

VisibilityGraph build_visibility(std::span<const EntityNode> nodes, const PointMap& map,
                                 std::span<const Keyframe> keyframes) {
  VisibilityGraph g;
  for (const auto& node : nodes) {
    for (const auto& kf : keyframes) {
      for (PointId pid : node.points) {
        const LabeledPoint* p = map.find(pid);
        if (p == nullptr) continue;
        if (project(p->position, kf.pose, kf.intrinsics)) {
          g.edges.push_back({node.label, kf.id, pid});
          break;
        }
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::map<EntityLabel, std::vector<EntityLabel>> NeighbourGraph::adjacency() const {
  std::map<EntityLabel, std::vector<EntityLabel>> adj;
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& [label, list] : adj) std::sort(list.begin(), list.end());
  return adj;
}

bool NeighbourGraph::has(EntityLabel a, EntityLabel b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges.begin(), edges.end(), std::pair{a, b});
}

NeighbourGraph build_neighbour(std::span<const EntityNode> nodes, double rho, const GravityConfig& gravity) {
  if (rho < 0) throw InvalidArgument("neighbour margin must be >= 0");
  NeighbourGraph g;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (nodes[i].label == nodes[j].label) continue;
      if (obb_collide(nodes[i].obb, nodes[j].obb, rho, gravity)) {
        auto a = nodes[i].label, b = nodes[j].label;
        g.edges.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace isg
