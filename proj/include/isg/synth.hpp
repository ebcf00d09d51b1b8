#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "isg/eval.hpp"
#include "isg/io.hpp"
#include "isg/sequence.hpp"

namespace isg::synth {

enum class PrimitiveKind { Box, Plane };

/// Boxes are solid; their bottom face is not sampled. Planes are horizontal
/// rectangles at center.z with extents dims.x by dims.y. World up is +Z.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  int class_id = 0;
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();
  double yaw = 0.0;
  /// Surface points per square metre.
  double density = 100.0;
};

struct LookAt {
  Vec3 eye = Vec3::Zero();
  Vec3 target = Vec3::UnitX();
};

/// Helix around `target`: frame k sits at angle k * step_deg, radius `radius`,
/// height `height + rise_per_rev * k * step_deg / 360`. Explicit `poses`
/// override the helix when non-empty.
struct CameraPath {
  Vec3 target = Vec3(0, 0, 0.4);
  double radius = 2.5;
  double height = 1.2;
  double rise_per_rev = 0.36;
  double step_deg = 6.0;
  int frames = 200;
  std::vector<LookAt> poses;

  std::size_t size() const { return poses.empty() ? static_cast<std::size_t>(frames) : poses.size(); }
};

struct Noise {
  double point_sigma = 0.002;
  double conf_min = 0.6;
  double conf_max = 0.95;
};

struct SceneSpec {
  std::uint64_t seed = 1;
  CameraIntrinsics intrinsics{150.0, 150.0, 80.0, 60.0, 160, 120};
  std::vector<std::string> node_classes;
  std::vector<std::string> edge_classes{"none", "standing on", "attached to"};
  std::vector<Primitive> primitives;
  CameraPath camera;
  Noise noise;
  /// Flat class-coloured images written next to the masks.
  bool images = true;

  /// Throws SpecError for invalid values.
  void validate() const;
};

SceneSpec parse_spec(const std::string& json_text, const std::string& origin = "<memory>");
std::string spec_json(const SceneSpec& spec);

/// Camera pose with z forward, x right and y down.
RigidPose look_at(const Vec3& eye, const Vec3& target);

/// A sampled scene; frames are rendered on demand and are a pure function of
/// (spec, frame index).
class Scene final : public FrameSource {
 public:
  explicit Scene(SceneSpec spec);

  CameraIntrinsics intrinsics() const override { return spec_.intrinsics; }
  std::size_t frame_count() const override { return spec_.camera.size(); }
  Frame frame(std::size_t i) const override;

  const SceneSpec& spec() const { return spec_; }
  RigidPose pose(std::size_t i) const;
  /// Every sampled surface point; ids are indices.
  const std::vector<io::GtCloudPoint>& points() const { return points_; }
  InstanceId instance_of(PointId id) const { return points_[static_cast<std::size_t>(id)].instance; }
  io::GtGraph gt_graph() const;
  GroundTruth ground_truth() const;

  /// Per-frame mask label -> instance.
  std::map<EntityLabel, InstanceId> frame_labels(std::size_t i) const;

  /// Nearest primitive hit by the ray through the pixel centre; instance 0 for none.
  struct Hit {
    InstanceId instance = 0;
    double depth = 0.0;
  };
  Hit cast(const RigidPose& pose, int x, int y) const;

 private:
  SceneSpec spec_;
  std::vector<io::GtCloudPoint> points_;
};

/// Writes the sequence plus gt_graph.json, gt_points.ply and gt_frame_labels.json.
void generate(const SceneSpec& spec, const std::filesystem::path& out_dir);

/// Geometric GT predicates: subject "standing on" object when the subject's
/// bottom is within 2 cm of the object's top and their footprints overlap;
/// smaller box "attached to" larger box when they overlap vertically and
/// their faces are within 2 cm.
std::vector<Triplet> support_relations(const std::vector<Primitive>& primitives);

/// Dense floor, sparse table and a three-frame sweep in which the floor points
/// behind the table (mapped by the second frame) fall inside the table's mask
/// in the third.
SceneSpec stress_scene_nonuniform();

/// Small furnished room with a 200-frame helix path.
SceneSpec desk_scene();

}  // namespace isg::synth
