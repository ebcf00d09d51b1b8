#include "isg/features.hpp"

#include <algorithm>
#include <cmath>

namespace isg {

FeatureVec image_patch(const RgbImage& image, const PixelBox& roi) {
  if (roi.x1 < roi.x0 || roi.y1 < roi.y0) throw InvalidRoi("empty ROI");
  if (!image.contains(roi.x0, roi.y0) || !image.contains(roi.x1, roi.y1)) throw InvalidRoi("ROI outside the image");
  FeatureVec patch(kPatchLength);
  const double w = roi.width(), h = roi.height();
  for (int py = 0; py < kPatchSide; ++py) {
    const int y = roi.y0 + std::min(roi.height() - 1, static_cast<int>((py + 0.5) * h / kPatchSide));
    for (int px = 0; px < kPatchSide; ++px) {
      const int x = roi.x0 + std::min(roi.width() - 1, static_cast<int>((px + 0.5) * w / kPatchSide));
      const Rgb c = image.at(x, y);
      const int cell = py * kPatchSide + px;
      patch(0 * kPatchSide * kPatchSide + cell) = c.r / 255.0;
      patch(1 * kPatchSide * kPatchSide + cell) = c.g / 255.0;
      patch(2 * kPatchSide * kPatchSide + cell) = c.b / 255.0;
    }
  }
  return patch;
}

RgbImage mask_image(const EntityMask& mask, EntityLabel label) {
  RgbImage img(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == label) img[i] = Rgb{255, 255, 255};
  return img;
}

FeatureVec PatchFeatureProvider::feature(EntityLabel, const PixelBox& roi) const {
  if (projection_.cols() != kPatchLength) throw ShapeError("image projection must have 192 columns");
  return projection_ * image_patch(image_, roi);
}

FeatureVec PrecomputedFeatureProvider::feature(EntityLabel label, const PixelBox&) const {
  auto it = features_.find(label);
  if (it == features_.end()) throw NoObservations("no precomputed feature for label " + std::to_string(label));
  return it->second;
}

FeatureVec update_mean(const FeatureVec& mean, std::size_t count, const FeatureVec& view) {
  if (count == 0) return view;
  if (mean.size() != view.size()) throw ShapeError("multiview feature dimension mismatch");
  return mean + (view - mean) / static_cast<double>(count + 1);
}

void MultiviewAccumulator::add(const FeatureVec& view) {
  mean_ = update_mean(mean_, count_, view);
  ++count_;
}

const FeatureVec& MultiviewAccumulator::mean() const {
  if (count_ == 0) throw NoObservations("multiview feature requested with zero views");
  return mean_;
}

FeatureVec multiview_feature(EntityLabel node, const VisibilityGraph& visibility,
                             const std::map<std::pair<EntityLabel, KeyframeId>, FeatureVec>& views) {
  FeatureVec total;
  std::size_t n = 0;
  for (KeyframeId kf : visibility.keyframes_of(node)) {
    auto it = views.find({node, kf});
    if (it == views.end()) continue;
    if (n == 0)
      total = it->second;
    else if (it->second.size() != total.size())
      throw ShapeError("multiview feature dimension mismatch");
    else
      total += it->second;
    ++n;
  }
  if (n == 0) throw NoObservations("entity " + std::to_string(node) + " has no visible views");
  return total / static_cast<double>(n);
}

Eigen::Matrix3Xd normalize_points(std::span<const Vec3> points, const Obb& obb, std::size_t max_points) {
  if (points.empty()) throw EmptyPointSet("point encoder input is empty");
  if (max_points == 0) max_points = points.size();
  const std::size_t n = std::min(points.size(), max_points);
  const double scale = std::max(obb.dims.maxCoeff(), 1e-9);
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = n == points.size() ? i : i * points.size() / n;
    out.col(static_cast<Eigen::Index>(i)) = (points[src] - obb.center) / scale;
  }
  return out;
}

Mat3 pair_frame(const Vec3& center_i, const Vec3& center_j, const GravityConfig& gravity) {
  const Vec3& y = gravity.up;
  const Vec3 d = center_j - center_i;
  Vec3 x = d - d.dot(y) * y;
  if (x.norm() < 1e-9) x = gravity.horizontal_basis().first;
  x.normalize();
  const Vec3 z = x.cross(y);
  Mat3 frame;
  frame.col(0) = x;
  frame.col(1) = y;
  frame.col(2) = z;
  return frame;
}

namespace {

std::pair<Vec3, Vec3> extremes_in_frame(std::span<const Vec3> points, const Mat3& frame, const Vec3& origin) {
  Vec3 lo = Vec3::Constant(INFINITY), hi = Vec3::Constant(-INFINITY);
  for (const auto& p : points) {
    const Vec3 local = frame.transpose() * (p - origin);
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  return {hi, lo};
}

double clamp_divisor(double d, double eps) {
  if (std::abs(d) >= eps) return d;
  return d < 0 ? -eps : eps;
}

}  // namespace

RelPoseDescriptor rel_pose_descriptor(const Obb& obb_i, const Obb& obb_j, std::span<const Vec3> points_i,
                                      std::span<const Vec3> points_j, const GravityConfig& gravity,
                                      const DescriptorEps& eps) {
  if (points_i.empty() || points_j.empty()) throw EmptyPointSet("relative pose descriptor needs points");
  const Mat3 frame = pair_frame(obb_i.center, obb_j.center, gravity);
  const Vec3 origin = 0.5 * (obb_i.center + obb_j.center);
  const auto [max_i, min_i] = extremes_in_frame(points_i, frame, origin);
  const auto [max_j, min_j] = extremes_in_frame(points_j, frame, origin);
  RelPoseDescriptor r;
  for (int k = 0; k < 3; ++k) {
    r(k) = std::log(std::abs(max_i(k) / clamp_divisor(max_j(k), eps.divisor)) + eps.log);
    r(k + 3) = std::log(std::abs(min_i(k) / clamp_divisor(min_j(k), eps.divisor)) + eps.log);
  }
  return r;
}

Eigen::Matrix<double, kEdgeInputLength, 1> edge_input(const Obb& obb_i, const Obb& obb_j, const RelPoseDescriptor& r) {
  Eigen::Matrix<double, kEdgeInputLength, 1> v;
  v << obb_j.center - obb_i.center, obb_j.dims - obb_i.dims, r;
  return v;
}

}  // namespace isg
