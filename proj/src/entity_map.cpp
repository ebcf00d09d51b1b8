#include "isg/entity_map.hpp"

#include <algorithm>
#include <string>

namespace isg {

LabeledPoint& PointMap::upsert(PointId id, const Vec3& position) {
  auto [it, inserted] = points_.try_emplace(id);
  if (inserted) it->second.id = id;
  it->second.position = position;
  return it->second;
}

void PointMap::set(const LabeledPoint& point) {
  if (point.weight < 0) throw InvalidArgument("point weight must be non-negative");
  if ((point.label == kUnlabeled) != (point.weight == 0.0))
    throw InvalidArgument("point " + std::to_string(point.id) + ": label 0 iff weight 0");
  points_[point.id] = point;
  if (point.label >= next_label_) next_label_ = point.label + 1;
}

const LabeledPoint* PointMap::find(PointId id) const {
  auto it = points_.find(id);
  return it == points_.end() ? nullptr : &it->second;
}

LabeledPoint* PointMap::find(PointId id) {
  auto it = points_.find(id);
  return it == points_.end() ? nullptr : &it->second;
}

std::set<EntityLabel> PointMap::labels() const {
  std::set<EntityLabel> out;
  for (const auto& [id, p] : points_)
    if (p.label != kUnlabeled) out.insert(p.label);
  return out;
}

bool PointMap::operator==(const PointMap& other) const {
  if (next_label_ != other.next_label_ || points_.size() != other.points_.size()) return false;
  return std::equal(points_.begin(), points_.end(), other.points_.begin(), [](const auto& a, const auto& b) {
    return a.first == b.first && a.second.position == b.second.position && a.second.label == b.second.label &&
           a.second.weight == b.second.weight;
  });
}

ReferenceRender render_reference(const PointMap& map, const RigidPose& pose, const CameraIntrinsics& K,
                                 const RenderConfig& cfg) {
  if (cfg.splat_radius < 0) throw InvalidArgument("splat radius must be >= 0");
  ReferenceRender r;
  r.labels = EntityMask(K.width, K.height, kUnlabeled);
  r.weights = Raster<double>(K.width, K.height, 0.0);
  r.provenance = Raster<PointId>(K.width, K.height, kNoPoint);
  r.depth = Raster<double>(K.width, K.height, INFINITY);
  r.center = Raster<std::uint8_t>(K.width, K.height, 0);
  r.unlabeled = Raster<PointId>(K.width, K.height, kNoPoint);
  Raster<double> unlabeled_depth(K.width, K.height, INFINITY);

  const int rad = cfg.splat_radius;
  for (const auto& [id, p] : map.points()) {
    const auto proj = project(p.position, pose, K);
    if (!proj) continue;
    const int cx = proj->px(), cy = proj->py();
    if (p.label == kUnlabeled) {
      const std::size_t i = r.unlabeled.index(cx, cy);
      if (proj->depth < unlabeled_depth[i]) {
        unlabeled_depth[i] = proj->depth;
        r.unlabeled[i] = id;
      }
      continue;
    }
    for (int y = std::max(0, cy - rad); y <= std::min(K.height - 1, cy + rad); ++y) {
      for (int x = std::max(0, cx - rad); x <= std::min(K.width - 1, cx + rad); ++x) {
        const std::size_t i = r.labels.index(x, y);
        if (!(proj->depth < r.depth[i])) continue;
        r.depth[i] = proj->depth;
        r.labels[i] = p.label;
        r.weights[i] = p.weight;
        r.provenance[i] = id;
        r.center[i] = (x == cx && y == cy) ? 1 : 0;
      }
    }
  }
  return r;
}

double mean_confidence(EntityLabel img_label, EntityLabel ref_label, const EntityMask& img,
                       const ReferenceRender& render) {
  if (img_label == kUnlabeled || ref_label == kUnlabeled) throw InvalidLabel("mean_confidence: labels must be non-zero");
  if (!img.same_shape(render.labels)) throw ShapeError("mean_confidence: mask size mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img[i] == img_label && render.labels[i] == ref_label) {
      sum += render.weights[i];
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::string_view to_string(AssociationStrategy s) {
  switch (s) {
    case AssociationStrategy::MeanConfidence:
      return "mean_confidence";
    case AssociationStrategy::MaxOverlap:
      return "max_overlap";
    case AssociationStrategy::IoU:
      return "iou";
  }
  return "unknown";
}

AssociationStrategy parse_strategy(std::string_view name) {
  if (name == "mean_confidence" || name == "MeanConfidence") return AssociationStrategy::MeanConfidence;
  if (name == "max_overlap" || name == "MaxOverlap") return AssociationStrategy::MaxOverlap;
  if (name == "iou" || name == "IoU") return AssociationStrategy::IoU;
  throw InvalidArgument("unknown association strategy '" + std::string(name) + "'");
}

void AssociationConfig::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidArgument("association theta must lie in (0, 1]");
}

OverlapStats overlap_stats(const EntityMask& img, const ReferenceRender& render) {
  if (!img.same_shape(render.labels)) throw ShapeError("association: mask size mismatch");
  OverlapStats s;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const EntityLabel a = img[i], b = render.labels[i];
    if (a != kUnlabeled) ++s.input_count[a];
    if (b != kUnlabeled) ++s.reference_count[b];
    if (a != kUnlabeled && b != kUnlabeled) {
      auto& pair = s.pairs[{a, b}];
      ++pair.overlap;
      pair.weight_sum += render.weights[i];
    }
  }
  return s;
}

std::map<EntityLabel, std::vector<Candidate>> association_candidates(const OverlapStats& stats,
                                                                     const AssociationConfig& cfg) {
  cfg.validate();
  std::map<EntityLabel, std::vector<Candidate>> out;
  for (const auto& [label, count] : stats.input_count) out[label];
  for (const auto& [key, pair] : stats.pairs) {
    const auto [in, ref] = key;
    const double overlap = static_cast<double>(pair.overlap);
    const double ref_count = static_cast<double>(stats.reference_count.at(ref));
    const double in_count = static_cast<double>(stats.input_count.at(in));
    const double coverage = overlap / ref_count;
    double score = 0.0;
    bool accepted = false;
    switch (cfg.strategy) {
      case AssociationStrategy::MeanConfidence:
        accepted = coverage > cfg.theta;
        score = pair.weight_sum / overlap;
        break;
      case AssociationStrategy::MaxOverlap:
        accepted = coverage > cfg.theta;
        score = overlap;
        break;
      case AssociationStrategy::IoU:
        score = overlap / (in_count + ref_count - overlap);
        accepted = score > cfg.theta;
        break;
    }
    if (accepted) out[in].push_back({ref, score});
  }
  for (auto& [label, cands] : out) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.score > b.score || (a.score == b.score && a.ref_label < b.ref_label);
    });
  }
  return out;
}

AssociationResult associate(const EntityMask& img, const ReferenceRender& render, const AssociationConfig& cfg,
                            PointMap& map) {
  const auto candidates = association_candidates(overlap_stats(img, render), cfg);

  std::vector<EntityLabel> order;
  for (const auto& [label, cands] : candidates) order.push_back(label);
  std::stable_sort(order.begin(), order.end(), [&](EntityLabel a, EntityLabel b) {
    const auto& ca = candidates.at(a);
    const auto& cb = candidates.at(b);
    if (ca.empty() != cb.empty()) return !ca.empty();
    if (ca.empty()) return false;
    return ca.front().score > cb.front().score;
  });

  AssociationResult result;
  std::set<EntityLabel> taken;
  for (EntityLabel in : order) {
    EntityLabel assigned = kUnlabeled;
    for (const auto& c : candidates.at(in)) {
      if (!taken.contains(c.ref_label)) {
        assigned = c.ref_label;
        break;
      }
    }
    if (assigned == kUnlabeled) {
      assigned = map.allocate_label();
      result.new_labels.push_back(assigned);
    }
    taken.insert(assigned);
    result.mapping[in] = assigned;
  }

  result.consistent = EntityMask(img.width(), img.height(), kUnlabeled);
  for (std::size_t i = 0; i < img.size(); ++i)
    if (img[i] != kUnlabeled) result.consistent[i] = result.mapping.at(img[i]);
  return result;
}

void fuse(PointMap& map, const EntityMask& consistent, const ConfidenceMask& img_conf, const ReferenceRender& render) {
  if (!consistent.same_shape(img_conf) || !consistent.same_shape(render.labels))
    throw ShapeError("fuse: mask size mismatch");
  for (std::size_t i = 0; i < consistent.size(); ++i) {
    const double conf = std::clamp(img_conf[i], 0.0, 1.0);
    const EntityLabel observed = consistent[i];

    if (render.center[i] && render.provenance[i] != kNoPoint) {
      LabeledPoint* p = map.find(render.provenance[i]);
      if (p == nullptr || p->label == kUnlabeled) continue;  // map changed since render
      if (render.labels[i] == observed) {
        p->weight += conf;
      } else {
        p->weight -= conf;
        // A non-positive weight means the evidence for the old label is used
        // up; the point takes the observed label (0 leaves it unlabeled).
        if (p->weight <= 0.0) {
          p->label = observed;
          p->weight = observed == kUnlabeled ? 0.0 : conf;
        }
      }
    }

    if (render.unlabeled[i] != kNoPoint && observed != kUnlabeled && conf > 0.0) {
      LabeledPoint* p = map.find(render.unlabeled[i]);
      if (p != nullptr && p->label == kUnlabeled) {
        p->label = observed;
        p->weight = conf;
      }
    }
  }
}

}  // namespace isg
