#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "isg/geometry.hpp"
#include "isg/graph_extract.hpp"
#include "isg/raster.hpp"

namespace isg {

using FeatureVec = Eigen::VectorXd;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};
using RgbImage = Raster<Rgb>;

/// Side of the square patch an ROI is resampled to by the built-in provider.
inline constexpr int kPatchSide = 8;
inline constexpr int kPatchLength = 3 * kPatchSide * kPatchSide;

/// ROI resampled to an 8x8x3 patch by pixel-centre sampling, values in [0,1],
/// flattened channel-major (c, y, x). Throws InvalidRoi for empty or
/// out-of-bounds boxes.
FeatureVec image_patch(const RgbImage& image, const PixelBox& roi);

/// Image used when a keyframe carries no colour image: the entity's own mask
/// rendered white on black.
RgbImage mask_image(const EntityMask& mask, EntityLabel label);

/// Source of per-view entity features.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  /// Feature for the entity drawn with `label` in `roi` of the current view.
  virtual FeatureVec feature(EntityLabel label, const PixelBox& roi) const = 0;
};

/// Built-in provider: projection * image_patch(image, roi).
class PatchFeatureProvider final : public FeatureProvider {
 public:
  PatchFeatureProvider(const Eigen::MatrixXd& projection, const RgbImage& image)
      : projection_(projection), image_(image) {}
  FeatureVec feature(EntityLabel label, const PixelBox& roi) const override;

 private:
  const Eigen::MatrixXd& projection_;
  const RgbImage& image_;
};

/// Vectors supplied externally per (view, entity label); returned unchanged.
class PrecomputedFeatureProvider final : public FeatureProvider {
 public:
  explicit PrecomputedFeatureProvider(std::map<EntityLabel, FeatureVec> features) : features_(std::move(features)) {}
  FeatureVec feature(EntityLabel label, const PixelBox& roi) const override;
  bool has(EntityLabel label) const { return features_.contains(label); }

 private:
  std::map<EntityLabel, FeatureVec> features_;
};

/// Running mean of per-view features: mean' = mean + (x - mean) / (count + 1).
class MultiviewAccumulator {
 public:
  void add(const FeatureVec& view);
  std::size_t count() const { return count_; }
  /// Throws NoObservations when no view was added.
  const FeatureVec& mean() const;

 private:
  FeatureVec mean_;
  std::size_t count_ = 0;
};

/// One incremental step of the running mean.
FeatureVec update_mean(const FeatureVec& mean, std::size_t count, const FeatureVec& view);

/// Batch mean over the keyframes in which `node` is visible and has a view
/// feature. Throws NoObservations when there is none.
FeatureVec multiview_feature(EntityLabel node, const VisibilityGraph& visibility,
                             const std::map<std::pair<EntityLabel, KeyframeId>, FeatureVec>& views);

/// Points centred on the box centre and divided by its largest extent, as
/// columns of a 3xN matrix. At most `max_points` columns are kept, chosen by a
/// deterministic uniform stride.
Eigen::Matrix3Xd normalize_points(std::span<const Vec3> points, const Obb& obb, std::size_t max_points);

struct DescriptorEps {
  double divisor = 1e-6;
  double log = 1e-12;
};

using RelPoseDescriptor = Eigen::Matrix<double, 6, 1>;

/// Log-absolute ratios of the two entities' extreme coordinates in the pair
/// frame (origin at the centre midpoint, y = up, x = horizontal direction to
/// c_j, z = x cross y): [log|max_i / max_j|, log|min_i / min_j|].
RelPoseDescriptor rel_pose_descriptor(const Obb& obb_i, const Obb& obb_j, std::span<const Vec3> points_i,
                                      std::span<const Vec3> points_j, const GravityConfig& gravity = {},
                                      const DescriptorEps& eps = {});

/// Columns of the pair frame (x, y, z) used by rel_pose_descriptor.
Mat3 pair_frame(const Vec3& center_i, const Vec3& center_j, const GravityConfig& gravity);

inline constexpr int kEdgeInputLength = 12;

/// [c_j - c_i, d_j - d_i, R], the input of the edge MLP.
Eigen::Matrix<double, kEdgeInputLength, 1> edge_input(const Obb& obb_i, const Obb& obb_j, const RelPoseDescriptor& r);

}  // namespace isg
