#include "isg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "isg/rng.hpp"

namespace isg::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kContactTolerance = 0.02;

Mat3 yaw_rotation(double yaw) {
  Mat3 r = Mat3::Identity();
  r(0, 0) = std::cos(yaw);
  r(0, 1) = -std::sin(yaw);
  r(1, 0) = std::sin(yaw);
  r(1, 1) = std::cos(yaw);
  return r;
}

double top_of(const Primitive& p) { return p.kind == PrimitiveKind::Plane ? p.center.z() : p.center.z() + p.dims.z() / 2; }
double bottom_of(const Primitive& p) {
  return p.kind == PrimitiveKind::Plane ? p.center.z() : p.center.z() - p.dims.z() / 2;
}

// Separating-axis test between two yawed rectangles whose half extents are
// grown by `grow`; true when they overlap (strictly, for grow == 0).
bool footprints_overlap(const Primitive& a, const Primitive& b, double grow) {
  const Eigen::Vector2d d(b.center.x() - a.center.x(), b.center.y() - a.center.y());
  auto axes = [](double yaw) {
    return std::array<Eigen::Vector2d, 2>{Eigen::Vector2d(std::cos(yaw), std::sin(yaw)),
                                          Eigen::Vector2d(-std::sin(yaw), std::cos(yaw))};
  };
  const auto aa = axes(a.yaw), ba = axes(b.yaw);
  auto radius = [](const std::array<Eigen::Vector2d, 2>& ax, const Vec3& dims, const Eigen::Vector2d& n, double g) {
    return (dims.x() / 2 + g) * std::abs(ax[0].dot(n)) + (dims.y() / 2 + g) * std::abs(ax[1].dot(n));
  };
  for (const auto& n : {aa[0], aa[1], ba[0], ba[1]}) {
    if (std::abs(d.dot(n)) >= radius(aa, a.dims, n, grow) + radius(ba, b.dims, n, grow)) return false;
  }
  return true;
}

double volume_of(const Primitive& p) { return p.dims.x() * p.dims.y() * (p.kind == PrimitiveKind::Box ? p.dims.z() : 0.0); }

Vec3 read_vec3(const json& j, const char* key, const std::string& origin) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    throw SpecError(origin + ": '" + key + "' must be an array of three numbers");
  return {j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>()};
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Rgb class_colour(int class_id) {
  // Fixed palette; class ids beyond it wrap.
  static constexpr std::array<Rgb, 10> palette{{{200, 200, 200},
                                                {230, 25, 75},
                                                {60, 180, 75},
                                                {255, 225, 25},
                                                {0, 130, 200},
                                                {245, 130, 48},
                                                {145, 30, 180},
                                                {70, 240, 240},
                                                {240, 50, 230},
                                                {128, 128, 0}}};
  return palette[static_cast<std::size_t>(class_id) % palette.size()];
}

std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame) {
  return seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(frame) + 1);
}

}  // namespace

void SceneSpec::validate() const {
  try {
    intrinsics.validate();
  } catch (const Error& e) {
    throw SpecError(std::string("intrinsics: ") + e.what());
  }
  if (primitives.empty()) throw SpecError("scene has no primitives");
  if (node_classes.empty()) throw SpecError("node_classes must not be empty");
  if (edge_classes.size() < 3) throw SpecError("edge_classes needs 'none' plus two predicates");
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& p = primitives[i];
    const std::string where = "primitive " + std::to_string(i);
    if (p.class_id < 0 || static_cast<std::size_t>(p.class_id) >= node_classes.size())
      throw SpecError(where + ": class id out of range");
    if (!(p.density > 0.0) || !std::isfinite(p.density)) throw SpecError(where + ": density must be positive");
    if (!p.center.allFinite() || !p.dims.allFinite() || !std::isfinite(p.yaw)) throw SpecError(where + ": non-finite pose");
    if (p.dims.x() <= 0 || p.dims.y() <= 0 || (p.kind == PrimitiveKind::Box && p.dims.z() <= 0))
      throw SpecError(where + ": dimensions must be positive");
  }
  if (primitives.size() > 65535) throw SpecError("too many primitives for 16-bit masks");
  if (camera.poses.empty()) {
    if (camera.frames <= 0) throw SpecError("camera needs at least one frame");
    if (!(camera.radius > 0)) throw SpecError("camera radius must be positive");
  }
  for (const auto& p : camera.poses)
    if ((p.target - p.eye).norm() < 1e-9) throw SpecError("camera eye and target coincide");
  if (!(noise.point_sigma >= 0)) throw SpecError("point_sigma must be >= 0");
  if (!(noise.conf_min > 0 && noise.conf_min <= noise.conf_max && noise.conf_max <= 1.0))
    throw SpecError("confidence range must satisfy 0 < conf_min <= conf_max <= 1");
}

SceneSpec parse_spec(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SpecError(origin + ": invalid JSON: " + e.what());
  }
  SceneSpec s;
  s.node_classes.clear();
  try {
    s.seed = doc.value("seed", std::uint64_t{1});
    if (doc.contains("intrinsics")) {
      const auto& k = doc["intrinsics"];
      s.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                      k.at("cy").get<double>(), k.at("width").get<int>(),  k.at("height").get<int>()};
    }
    s.node_classes = doc.at("node_classes").get<std::vector<std::string>>();
    if (doc.contains("edge_classes")) s.edge_classes = doc["edge_classes"].get<std::vector<std::string>>();
    for (const auto& p : doc.at("primitives")) {
      Primitive prim;
      const auto kind = p.at("kind").get<std::string>();
      if (kind == "box")
        prim.kind = PrimitiveKind::Box;
      else if (kind == "plane")
        prim.kind = PrimitiveKind::Plane;
      else
        throw SpecError(origin + ": unknown primitive kind '" + kind + "'");
      const auto& cls = p.at("class");
      if (cls.is_string()) {
        auto it = std::find(s.node_classes.begin(), s.node_classes.end(), cls.get<std::string>());
        if (it == s.node_classes.end()) throw SpecError(origin + ": unknown class '" + cls.get<std::string>() + "'");
        prim.class_id = static_cast<int>(it - s.node_classes.begin());
      } else {
        prim.class_id = cls.get<int>();
      }
      prim.center = read_vec3(p, "center", origin);
      prim.dims = read_vec3(p, "dims", origin);
      prim.yaw = p.value("yaw", 0.0);
      prim.density = p.at("density").get<double>();
      s.primitives.push_back(prim);
    }
    if (doc.contains("camera")) {
      const auto& c = doc["camera"];
      if (c.contains("poses")) {
        for (const auto& p : c["poses"]) s.camera.poses.push_back({read_vec3(p, "eye", origin), read_vec3(p, "target", origin)});
      } else {
        if (c.contains("target")) s.camera.target = read_vec3(c, "target", origin);
        s.camera.radius = c.value("radius", s.camera.radius);
        s.camera.height = c.value("height", s.camera.height);
        s.camera.rise_per_rev = c.value("rise_per_rev", s.camera.rise_per_rev);
        s.camera.step_deg = c.value("step_deg", s.camera.step_deg);
        s.camera.frames = c.value("frames", s.camera.frames);
      }
    }
    if (doc.contains("noise")) {
      const auto& n = doc["noise"];
      s.noise.point_sigma = n.value("point_sigma", s.noise.point_sigma);
      s.noise.conf_min = n.value("conf_min", s.noise.conf_min);
      s.noise.conf_max = n.value("conf_max", s.noise.conf_max);
    }
    s.images = doc.value("images", s.images);
  } catch (const json::exception& e) {
    throw SpecError(origin + ": " + e.what());
  }
  s.validate();
  return s;
}

std::string spec_json(const SceneSpec& s) {
  nlohmann::ordered_json doc;
  doc["seed"] = s.seed;
  doc["intrinsics"] = {{"fx", s.intrinsics.fx}, {"fy", s.intrinsics.fy},       {"cx", s.intrinsics.cx},
                       {"cy", s.intrinsics.cy}, {"width", s.intrinsics.width}, {"height", s.intrinsics.height}};
  doc["node_classes"] = s.node_classes;
  doc["edge_classes"] = s.edge_classes;
  nlohmann::ordered_json prims = nlohmann::ordered_json::array();
  for (const auto& p : s.primitives) {
    nlohmann::ordered_json j;
    j["kind"] = p.kind == PrimitiveKind::Box ? "box" : "plane";
    j["class"] = s.node_classes[static_cast<std::size_t>(p.class_id)];
    j["center"] = vec3_json(p.center);
    j["dims"] = vec3_json(p.dims);
    j["yaw"] = p.yaw;
    j["density"] = p.density;
    prims.push_back(std::move(j));
  }
  doc["primitives"] = std::move(prims);
  nlohmann::ordered_json cam;
  if (!s.camera.poses.empty()) {
    nlohmann::ordered_json poses = nlohmann::ordered_json::array();
    for (const auto& p : s.camera.poses) poses.push_back({{"eye", vec3_json(p.eye)}, {"target", vec3_json(p.target)}});
    cam["poses"] = std::move(poses);
  } else {
    cam["target"] = vec3_json(s.camera.target);
    cam["radius"] = s.camera.radius;
    cam["height"] = s.camera.height;
    cam["rise_per_rev"] = s.camera.rise_per_rev;
    cam["step_deg"] = s.camera.step_deg;
    cam["frames"] = s.camera.frames;
  }
  doc["camera"] = std::move(cam);
  doc["noise"] = {{"point_sigma", s.noise.point_sigma}, {"conf_min", s.noise.conf_min}, {"conf_max", s.noise.conf_max}};
  doc["images"] = s.images;
  return doc.dump(2) + "\n";
}

RigidPose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitX();  // looking straight up or down
  right.normalize();
  const Vec3 down = forward.cross(right);
  RigidPose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = forward;
  p.translation = eye;
  return p;
}

Scene::Scene(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(spec_.seed);
  for (std::size_t pi = 0; pi < spec_.primitives.size(); ++pi) {
    const auto& prim = spec_.primitives[pi];
    const Mat3 rot = yaw_rotation(prim.yaw);
    const double per_metre = std::sqrt(prim.density);
    const Vec3 h = prim.dims / 2;
    // face: origin, u axis (length a), v axis (length b), all in the local frame
    struct Face {
      Vec3 origin, u, v;
    };
    std::vector<Face> faces;
    if (prim.kind == PrimitiveKind::Plane) {
      faces.push_back({Vec3(-h.x(), -h.y(), 0), Vec3(prim.dims.x(), 0, 0), Vec3(0, prim.dims.y(), 0)});
    } else {
      faces.push_back({Vec3(-h.x(), -h.y(), h.z()), Vec3(prim.dims.x(), 0, 0), Vec3(0, prim.dims.y(), 0)});
      faces.push_back({Vec3(h.x(), -h.y(), -h.z()), Vec3(0, prim.dims.y(), 0), Vec3(0, 0, prim.dims.z())});
      faces.push_back({Vec3(-h.x(), -h.y(), -h.z()), Vec3(0, prim.dims.y(), 0), Vec3(0, 0, prim.dims.z())});
      faces.push_back({Vec3(-h.x(), h.y(), -h.z()), Vec3(prim.dims.x(), 0, 0), Vec3(0, 0, prim.dims.z())});
      faces.push_back({Vec3(-h.x(), -h.y(), -h.z()), Vec3(prim.dims.x(), 0, 0), Vec3(0, 0, prim.dims.z())});
    }
    for (const auto& f : faces) {
      const long nu = std::max(1L, std::lround(f.u.norm() * per_metre));
      const long nv = std::max(1L, std::lround(f.v.norm() * per_metre));
      for (long i = 0; i < nu; ++i) {
        for (long j = 0; j < nv; ++j) {
          const Vec3 local = f.origin + f.u * ((static_cast<double>(i) + 0.5) / static_cast<double>(nu)) +
                             f.v * ((static_cast<double>(j) + 0.5) / static_cast<double>(nv));
          Vec3 world = prim.center + rot * local;
          for (int k = 0; k < 3; ++k) world(k) += rng.normal(0.0, spec_.noise.point_sigma);
          io::GtCloudPoint gp;
          gp.id = static_cast<PointId>(points_.size());
          gp.position = world;
          gp.instance = static_cast<InstanceId>(pi + 1);
          gp.class_id = prim.class_id;
          points_.push_back(gp);
        }
      }
    }
  }
}

RigidPose Scene::pose(std::size_t i) const {
  const auto& c = spec_.camera;
  if (i >= c.size()) throw InvalidArgument("frame index out of range");
  if (!c.poses.empty()) return look_at(c.poses[i].eye, c.poses[i].target);
  const double deg = static_cast<double>(i) * c.step_deg;
  const double a = deg * std::numbers::pi / 180.0;
  const Vec3 eye = c.target + Vec3(c.radius * std::cos(a), c.radius * std::sin(a), 0.0) +
                   Vec3(0, 0, c.height - c.target.z() + c.rise_per_rev * deg / 360.0);
  return look_at(eye, c.target);
}

Scene::Hit Scene::cast(const RigidPose& pose, int x, int y) const {
  const auto& K = spec_.intrinsics;
  const Vec3 dir_cam((x + 0.5 - K.cx) / K.fx, (y + 0.5 - K.cy) / K.fy, 1.0);
  const Vec3 dir = pose.rotation * dir_cam;
  const Vec3& origin = pose.translation;
  Hit best;
  double best_t = INFINITY;
  for (std::size_t pi = 0; pi < spec_.primitives.size(); ++pi) {
    const auto& p = spec_.primitives[pi];
    const Mat3 inv = yaw_rotation(p.yaw).transpose();
    const Vec3 o = inv * (origin - p.center), d = inv * dir;
    double t = INFINITY;
    if (p.kind == PrimitiveKind::Plane) {
      if (std::abs(d.z()) > 1e-12) {
        const double tt = -o.z() / d.z();
        const Vec3 q = o + tt * d;
        if (tt > 0 && std::abs(q.x()) <= p.dims.x() / 2 && std::abs(q.y()) <= p.dims.y() / 2) t = tt;
      }
    } else {
      double t0 = -INFINITY, t1 = INFINITY;
      bool miss = false;
      for (int k = 0; k < 3 && !miss; ++k) {
        const double h = p.dims(k) / 2;
        if (std::abs(d(k)) < 1e-12) {
          if (std::abs(o(k)) > h) miss = true;
          continue;
        }
        double a = (-h - o(k)) / d(k), b = (h - o(k)) / d(k);
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
      }
      if (!miss && t0 <= t1 && t0 > 0) t = t0;
    }
    if (t < best_t) {
      best_t = t;
      best = {static_cast<InstanceId>(pi + 1), t};
    }
  }
  return best;
}

std::map<EntityLabel, InstanceId> Scene::frame_labels(std::size_t i) const {
  const std::size_t n = spec_.primitives.size();
  std::vector<EntityLabel> perm(n);
  for (std::size_t k = 0; k < n; ++k) perm[k] = static_cast<EntityLabel>(k + 1);
  Rng rng(frame_seed(spec_.seed, i));
  for (std::size_t k = n; k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
  std::map<EntityLabel, InstanceId> out;
  for (std::size_t k = 0; k < n; ++k) out[perm[k]] = static_cast<InstanceId>(k + 1);
  return out;
}

Frame Scene::frame(std::size_t i) const {
  const auto& K = spec_.intrinsics;
  Frame f;
  f.index = i;
  f.pose = pose(i);
  std::map<InstanceId, EntityLabel> label_of;
  for (const auto& [label, inst] : frame_labels(i)) label_of[inst] = label;
  // Per-instance confidence for this frame, drawn after the permutation stream.
  Rng rng(frame_seed(spec_.seed, i) ^ 0x5851F42D4C957F2DULL);
  std::vector<double> conf(spec_.primitives.size() + 1, 0.0);
  for (std::size_t k = 1; k < conf.size(); ++k)
    conf[k] = io::quantize_confidence(rng.uniform(spec_.noise.conf_min, spec_.noise.conf_max));

  Raster<InstanceId> inst(K.width, K.height, 0);
  Raster<double> depth(K.width, K.height, INFINITY);
  for (int y = 0; y < K.height; ++y)
    for (int x = 0; x < K.width; ++x) {
      const Hit h = cast(f.pose, x, y);
      inst.at(x, y) = h.instance;
      if (h.instance) depth.at(x, y) = h.depth;
    }
  EntityMask labels(K.width, K.height, kUnlabeled);
  ConfidenceMask confidence(K.width, K.height, 0.0);
  for (std::size_t k = 0; k < inst.size(); ++k) {
    if (!inst[k]) continue;
    labels[k] = label_of.at(inst[k]);
    confidence[k] = conf[inst[k]];
  }
  const double slack = 3.0 * spec_.noise.point_sigma + 0.02;
  for (const auto& p : points_) {
    const auto proj = project(p.position, f.pose, K);
    if (!proj) continue;
    const int x = proj->px(), y = proj->py();
    if (inst.at(x, y) != p.instance) continue;
    if (std::abs(proj->depth - depth.at(x, y)) > slack + 0.02 * proj->depth) continue;
    f.points.push_back({p.id, p.position});
  }
  if (spec_.images) {
    RgbImage img(K.width, K.height);
    for (std::size_t k = 0; k < inst.size(); ++k)
      if (inst[k]) img[k] = class_colour(spec_.primitives[inst[k] - 1].class_id);
    f.image = std::move(img);
  }
  f.labels = std::move(labels);
  f.confidence = std::move(confidence);
  return f;
}

std::vector<Triplet> support_relations(const std::vector<Primitive>& prims) {
  std::vector<Triplet> out;
  for (std::size_t s = 0; s < prims.size(); ++s) {
    if (prims[s].kind != PrimitiveKind::Box) continue;
    for (std::size_t o = 0; o < prims.size(); ++o) {
      if (o == s) continue;
      const bool stands = std::abs(bottom_of(prims[s]) - top_of(prims[o])) < kContactTolerance &&
                          footprints_overlap(prims[s], prims[o], 0.0);
      if (stands) out.push_back({static_cast<InstanceId>(s + 1), 1, static_cast<InstanceId>(o + 1)});
    }
  }
  for (std::size_t a = 0; a < prims.size(); ++a) {
    for (std::size_t b = a + 1; b < prims.size(); ++b) {
      const auto& pa = prims[a];
      const auto& pb = prims[b];
      if (pa.kind != PrimitiveKind::Box || pb.kind != PrimitiveKind::Box) continue;
      const double overlap_z = std::min(top_of(pa), top_of(pb)) - std::max(bottom_of(pa), bottom_of(pb));
      if (overlap_z <= kContactTolerance) continue;  // stacked, not side by side
      if (!footprints_overlap(pa, pb, kContactTolerance / 2)) continue;
      const bool a_smaller = volume_of(pa) <= volume_of(pb);
      const std::size_t s = a_smaller ? a : b, o = a_smaller ? b : a;
      out.push_back({static_cast<InstanceId>(s + 1), 2, static_cast<InstanceId>(o + 1)});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

io::GtGraph Scene::gt_graph() const {
  io::GtGraph g;
  g.node_classes = spec_.node_classes;
  g.edge_classes = spec_.edge_classes;
  for (std::size_t i = 0; i < spec_.primitives.size(); ++i)
    g.instance_class[static_cast<InstanceId>(i + 1)] = spec_.primitives[i].class_id;
  g.triplets = support_relations(spec_.primitives);
  return g;
}

GroundTruth Scene::ground_truth() const {
  const auto g = gt_graph();
  GroundTruth gt;
  gt.instance_class = g.instance_class;
  gt.triplets = g.triplets;
  gt.node_classes = g.node_classes;
  gt.edge_classes = g.edge_classes;
  for (const auto& p : points_) gt.points.push_back({p.position, p.instance});
  return gt;
}

void generate(const SceneSpec& spec, const fs::path& out_dir) {
  const Scene scene(spec);
  fs::create_directories(out_dir / "frames");
  io::write_intrinsics(out_dir / "intrinsics.txt", spec.intrinsics);
  nlohmann::ordered_json frame_labels = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < scene.frame_count(); ++i) {
    write_frame(out_dir, scene.frame(i));
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& [label, inst] : scene.frame_labels(i)) m[std::to_string(label)] = inst;
    frame_labels[io::frame_stem(i)] = std::move(m);
  }
  io::write_text(out_dir / "gt_frame_labels.json", frame_labels.dump(2) + "\n");
  io::write_text(out_dir / "gt_graph.json", io::gt_graph_json(scene.gt_graph()));
  io::write_gt_ply(out_dir / "gt_points.ply", scene.points());
  io::write_text(out_dir / "scene_spec.json", spec_json(spec));
}

SceneSpec stress_scene_nonuniform() {
  SceneSpec s;
  s.seed = 7;
  s.intrinsics = {500.0, 500.0, 320.0, 240.0, 640, 480};
  s.node_classes = {"floor", "table"};
  s.primitives.push_back({PrimitiveKind::Plane, 0, Vec3(0.5, 0, 0), Vec3(4.0, 4.0, 0.0), 0.0, 2000.0});
  s.primitives.push_back({PrimitiveKind::Box, 1, Vec3(0, 0, 0.375), Vec3(1.0, 0.6, 0.75), 0.0, 50.0});
  s.camera.poses = {{Vec3(-2.6, 0.3, 1.6), Vec3(0.0, 0.0, 0.3)},
                    {Vec3(2.4, -0.3, 1.8), Vec3(0.8, 0.0, 0.0)},
                    {Vec3(-1.5, 0.2, 0.9), Vec3(0.3, 0.0, 0.35)}};
  s.images = false;
  return s;
}

SceneSpec desk_scene() {
  SceneSpec s;
  s.seed = 11;
  s.node_classes = {"floor", "table", "chair", "box", "cabinet"};
  s.primitives.push_back({PrimitiveKind::Plane, 0, Vec3(0, 0, 0), Vec3(3.5, 3.5, 0.0), 0.0, 250.0});
  s.primitives.push_back({PrimitiveKind::Box, 1, Vec3(0, 0, 0.375), Vec3(1.2, 0.8, 0.75), 0.0, 250.0});
  s.primitives.push_back({PrimitiveKind::Box, 2, Vec3(-0.95, 0.25, 0.225), Vec3(0.45, 0.45, 0.45), 0.3, 400.0});
  s.primitives.push_back({PrimitiveKind::Box, 3, Vec3(0.2, -0.1, 0.85), Vec3(0.3, 0.2, 0.2), 0.0, 800.0});
  s.primitives.push_back({PrimitiveKind::Box, 4, Vec3(0.0, 0.605, 0.4), Vec3(0.6, 0.4, 0.8), 0.0, 300.0});
  return s;
}

}  // namespace isg::synth
