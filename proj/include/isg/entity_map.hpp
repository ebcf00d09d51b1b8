#pragma once

#include <map>
#include <set>
#include <string_view>
#include <vector>

#include "isg/geometry.hpp"
#include "isg/raster.hpp"
#include "isg/types.hpp"

namespace isg {

/// A sparse map point with its entity label and confidence weight.
/// Invariant at rest: label == 0 <=> weight == 0, weight >= 0.
struct LabeledPoint {
  PointId id = 0;
  Vec3 position = Vec3::Zero();
  EntityLabel label = kUnlabeled;
  double weight = 0.0;
};

/// Id-indexed labeled point map. Iteration is in ascending point id.
class PointMap {
 public:
  using Storage = std::map<PointId, LabeledPoint>;

  /// Inserts an unlabeled point or moves an existing one (label and weight kept).
  LabeledPoint& upsert(PointId id, const Vec3& position);
  /// Inserts or overwrites a point including its label state; bumps next_label.
  void set(const LabeledPoint& point);
  bool erase(PointId id) { return points_.erase(id) > 0; }

  const LabeledPoint* find(PointId id) const;
  LabeledPoint* find(PointId id);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Storage& points() const { return points_; }

  /// Labels currently carried by at least one point.
  std::set<EntityLabel> labels() const;

  EntityLabel next_label() const { return next_label_; }
  /// Issues a label that is not yet in use.
  EntityLabel allocate_label() { return next_label_++; }

  bool operator==(const PointMap& other) const;

 private:
  Storage points_;
  EntityLabel next_label_ = 1;
};

using EntityMask = Raster<EntityLabel>;
using ConfidenceMask = Raster<double>;

inline constexpr PointId kNoPoint = -1;

/// Labels, weights and provenance of map points projected into a keyframe.
struct ReferenceRender {
  EntityMask labels;           // reference entity mask
  Raster<double> weights;      // projected point weights
  Raster<PointId> provenance;  // point that produced the pixel, kNoPoint where labels == 0
  Raster<double> depth;        // camera depth of the provenance point
  /// 1 where the provenance point projects exactly to this pixel (as opposed
  /// to a splat neighbour). Fusion updates each point once, at its own pixel.
  Raster<std::uint8_t> center;
  /// Unlabeled map points at their own projection pixel (nearest wins).
  Raster<PointId> unlabeled;
};

struct RenderConfig {
  int splat_radius = 2;
};

/// Projects every labeled map point into the keyframe, writing a
/// (2r+1)^2 square splat; nearer points win contended pixels, exact depth
/// ties keep the lower point id.
ReferenceRender render_reference(const PointMap& map, const RigidPose& pose, const CameraIntrinsics& K,
                                 const RenderConfig& cfg = {});

/// Mean reference weight over pixels where the input mask shows `img_label`
/// and the reference shows `ref_label`; 0 for an empty overlap.
double mean_confidence(EntityLabel img_label, EntityLabel ref_label, const EntityMask& img,
                       const ReferenceRender& render);

enum class AssociationStrategy { MeanConfidence, MaxOverlap, IoU };

std::string_view to_string(AssociationStrategy s);
AssociationStrategy parse_strategy(std::string_view name);

struct AssociationConfig {
  double theta = 0.2;
  AssociationStrategy strategy = AssociationStrategy::MeanConfidence;

  void validate() const;
};

/// Pixel statistics for every overlapping (input label, reference label) pair.
struct OverlapStats {
  struct Pair {
    std::size_t overlap = 0;
    double weight_sum = 0.0;
  };
  std::map<EntityLabel, std::size_t> input_count;      // pixels per input label
  std::map<EntityLabel, std::size_t> reference_count;  // pixels per reference label
  std::map<std::pair<EntityLabel, EntityLabel>, Pair> pairs;
};

OverlapStats overlap_stats(const EntityMask& img, const ReferenceRender& render);

struct Candidate {
  EntityLabel ref_label;
  double score;
};

/// Candidates per input label passing the strategy's acceptance test, sorted by
/// descending score then ascending reference label. Input labels with no
/// candidates map to an empty list.
std::map<EntityLabel, std::vector<Candidate>> association_candidates(const OverlapStats& stats,
                                                                     const AssociationConfig& cfg);

struct AssociationResult {
  EntityMask consistent;
  std::map<EntityLabel, EntityLabel> mapping;  // input label -> map label
  std::vector<EntityLabel> new_labels;         // labels issued during this call, in issue order
};

/// One-to-one label association. Input labels are visited in descending order
/// of their best candidate score (ties: ascending label); each takes its best
/// untaken reference label or a freshly allocated one.
AssociationResult associate(const EntityMask& img, const ReferenceRender& render, const AssociationConfig& cfg,
                            PointMap& map);

/// Per-point label/weight update from an associated mask.
void fuse(PointMap& map, const EntityMask& consistent, const ConfidenceMask& img_conf, const ReferenceRender& render);

}  // namespace isg
