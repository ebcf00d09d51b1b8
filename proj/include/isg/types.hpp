#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace isg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Persistent entity id stored on map points. 0 means "unlabeled".
using EntityLabel = std::uint32_t;
using PointId = std::int64_t;
using KeyframeId = std::int64_t;

inline constexpr EntityLabel kUnlabeled = 0;

/// World-from-camera rigid transform.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation.transpose() * (world - translation); }
  Vec3 to_world(const Vec3& camera) const { return rotation * camera + translation; }

  /// Throws InvalidArgument when the rotation is not orthonormal within 1e-6.
  void validate() const;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
};

// Error hierarchy. Every library failure derives from isg::Error so callers
// can catch one type; the CLI maps subclasses onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyPointSet : public Error {
 public:
  EmptyPointSet() : Error("empty point set") {}
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class InvalidLabel : public Error {
 public:
  using Error::Error;
};

class InvalidRoi : public Error {
 public:
  using Error::Error;
};

class NoObservations : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

/// File-level failure; message is prefixed with "path:line: ".
class IoError : public Error {
 public:
  IoError(const std::string& path, long line, const std::string& what)
      : Error(line > 0 ? path + ":" + std::to_string(line) + ": " + what : path + ": " + what) {}
};

}  // namespace isg
