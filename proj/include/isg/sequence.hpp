#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "isg/io.hpp"

namespace isg {

/// Everything recorded for one frame of a sequence.
struct Frame {
  std::size_t index = 0;
  RigidPose pose;
  std::vector<io::ObservedPoint> points;
  std::optional<EntityMask> labels;
  std::optional<ConfidenceMask> confidence;
  /// Precomputed image features keyed by mask label.
  std::optional<std::map<EntityLabel, FeatureVec>> features;
  std::optional<RgbImage> image;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual CameraIntrinsics intrinsics() const = 0;
  virtual std::size_t frame_count() const = 0;
  virtual Frame frame(std::size_t i) const = 0;
};

/// Sequence directory: intrinsics.txt and frames/NNNNNN.{pose,points,labels.pgm,conf.pgm,feat,ppm}.
/// Frames are the .pose files in ascending name order; everything else is
/// loaded on demand.
class SequenceReader final : public FrameSource {
 public:
  explicit SequenceReader(const std::filesystem::path& dir);
  CameraIntrinsics intrinsics() const override { return intrinsics_; }
  std::size_t frame_count() const override { return stems_.size(); }
  Frame frame(std::size_t i) const override;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  CameraIntrinsics intrinsics_;
  std::vector<std::string> stems_;
};

/// Writes one frame under dir/frames with the given index.
void write_frame(const std::filesystem::path& dir, const Frame& frame);

}  // namespace isg
