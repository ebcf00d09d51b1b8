#include <doctest.h>

#include <filesystem>
#include <functional>

#include "isg/io.hpp"
#include "isg/rng.hpp"
#include "isg/sequence.hpp"

using namespace isg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("isg_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& f) const { return path / f; }
};

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const IoError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("format_double round trips") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(200)) - 100);
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(1.0 / 3) == "0.3333333333333333");
}

TEST_CASE("text formats round trip") {
  TempDir d("text");
  const CameraIntrinsics K{525.5, 524.25, 319.5, 239.5, 640, 480};
  io::write_intrinsics(d / "k.txt", K);
  const auto k2 = io::read_intrinsics(d / "k.txt");
  CHECK(k2.fx == K.fx);
  CHECK(k2.height == K.height);

  RigidPose p;
  p.rotation = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  p.translation = Vec3(0.1, -2.0, 1e-3);
  io::write_pose(d / "p.pose", p);
  const auto p2 = io::read_pose(d / "p.pose");
  CHECK(p2.rotation == p.rotation);
  CHECK(p2.translation == p.translation);

  const std::vector<io::ObservedPoint> pts{{3, Vec3(1, 2, 3)}, {0, Vec3(-0.25, 0, 1e-9)}};
  io::write_points(d / "a.points", pts);
  const auto pts2 = io::read_points(d / "a.points");
  REQUIRE(pts2.size() == 2);
  CHECK(pts2[0].id == 3);
  CHECK(pts2[1].position == pts[1].position);

  std::map<EntityLabel, FeatureVec> f{{2, Eigen::Vector3d(0.5, -1, 2)}, {9, Eigen::Vector3d(0, 0, 1)}};
  io::write_features(d / "f.feat", f);
  CHECK(io::read_features(d / "f.feat") == f);
}

TEST_CASE("images round trip, confidence quantised") {
  TempDir d("img");
  EntityMask m(7, 3, 0);
  m.at(1, 2) = 65535;
  m.at(6, 0) = 300;
  io::write_label_mask(d / "m.pgm", m);
  CHECK(io::read_label_mask(d / "m.pgm").data() == m.data());

  ConfidenceMask c(4, 2, 0.0);
  c.at(0, 0) = 1.0;
  c.at(3, 1) = 0.123456789;
  io::write_confidence_mask(d / "c.pgm", c);
  const auto c2 = io::read_confidence_mask(d / "c.pgm");
  CHECK(c2.at(0, 0) == 1.0);
  CHECK(c2.at(3, 1) == io::quantize_confidence(0.123456789));
  CHECK(std::abs(c2.at(3, 1) - 0.123456789) <= 0.5 / 65535);
  CHECK(io::quantize_confidence(io::quantize_confidence(0.3)) == io::quantize_confidence(0.3));

  RgbImage img(3, 2, Rgb{1, 2, 3});
  img.at(2, 1) = Rgb{255, 0, 128};
  io::write_ppm(d / "i.ppm", img);
  CHECK(io::read_ppm(d / "i.ppm").data() == img.data());
}

TEST_CASE("plys round trip") {
  TempDir d("ply");
  PointMap m;
  m.set({4, Vec3(1, 2, 3), 2, 0.75});
  m.upsert(9, Vec3(-1, 0, 0.5));
  io::write_map_ply(d / "m.ply", m);
  const auto m2 = io::read_map_ply(d / "m.ply");
  CHECK(m2.size() == 2);
  CHECK(m2.find(4)->weight == 0.75);
  CHECK(m2.find(9)->label == kUnlabeled);
  CHECK(m2.find(9)->position == Vec3(-1, 0, 0.5));

  const std::vector<io::GtCloudPoint> g{{0, Vec3(1, 1, 1), 3, 2}, {1, Vec3(0, 0, 0), 1, 0}};
  io::write_gt_ply(d / "g.ply", g);
  const auto g2 = io::read_gt_ply(d / "g.ply");
  REQUIRE(g2.size() == 2);
  CHECK(g2[0].instance == 3);
  CHECK(g2[0].class_id == 2);
}

TEST_CASE("graph documents round trip") {
  io::GtGraph g;
  g.node_classes = {"floor", "table"};
  g.edge_classes = {"none", "standing on", "attached to"};
  g.instance_class = {{1, 0}, {2, 1}};
  g.triplets = {{2, 1, 1}};
  const auto g2 = io::parse_gt_graph(io::gt_graph_json(g));
  CHECK(g2.instance_class == g.instance_class);
  CHECK(g2.triplets == g.triplets);
  CHECK(io::gt_graph_json(g2) == io::gt_graph_json(g));

  GlobalSceneGraph sg;
  Prediction p;
  p.node_probs = {Eigen::Vector2d(0.25, 0.75), Eigen::Vector2d(0.9, 0.1)};
  p.edge_probs = {Eigen::Vector3d(0.2, 0.3, 0.5)};
  EntityNode a, b;
  a.label = 4;
  a.obb.center = Vec3(1, 2, 3);
  a.obb.yaw = 0.3;
  b.label = 6;
  sg.integrate(p, {a, b}, {{4, 6}});
  const auto ex = io::ExportedGraph::from(sg, PredicateMode::Single);
  REQUIRE(ex.nodes.size() == 2);
  CHECK(ex.nodes[0].class_id == 1);
  const auto text = io::scene_graph_json(ex);
  const auto back = io::parse_scene_graph(text);
  CHECK(io::scene_graph_json(back) == text);
  CHECK(back.nodes[0].obb.yaw == 0.3);
  CHECK(back.predicted().edge_probs.at({4, 6}) == Eigen::Vector3d(0.2, 0.3, 0.5));
  CHECK(io::scene_graph_dot(ex, {"floor", "table"}).find("table") != std::string::npos);
}

TEST_CASE("errors name the file and line") {
  TempDir d("err");
  io::write_text(d / "bad.points", "1 0 0 0\n2 0 zero 0\n");
  const auto msg = message_of([&] { io::read_points(d / "bad.points"); });
  CHECK(msg.find("bad.points:2") != std::string::npos);
  io::write_text(d / "bad.pose", "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 1 1\n");
  CHECK(message_of([&] { io::read_pose(d / "bad.pose"); }).find("bad.pose:4") != std::string::npos);
  io::write_text(d / "dup.feat", "3 1 2\n3 1 2\n");
  CHECK(message_of([&] { io::read_features(d / "dup.feat"); }).find("dup.feat:2") != std::string::npos);
  io::write_text(d / "x.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(io::read_pgm(d / "x.pgm"), IoError);
  CHECK_THROWS_AS(io::read_text(d / "missing.txt"), IoError);
  CHECK_THROWS_AS(io::parse_metrics("[1, 2]"), IoError);
}

TEST_CASE("timing summary uses nearest rank") {
  std::vector<double> s;
  for (int i = 10; i >= 1; --i) s.push_back(i);
  const auto st = io::summarize(s);
  CHECK(st.count == 10);
  CHECK(st.mean_ms == 5.5);
  CHECK(st.p50_ms == 5.0);
  CHECK(st.p90_ms == 9.0);
  CHECK(st.p99_ms == 10.0);
  CHECK(io::frame_stem(7) == "000007");
  const auto j = io::timings_json({{"label_fusion", st}});
  CHECK(j.find("label_fusion") != std::string::npos);
}

TEST_CASE("sequence reader lists frames in order") {
  TempDir d("seq");
  io::write_intrinsics(d / "intrinsics.txt", CameraIntrinsics{10, 10, 2, 2, 4, 4});
  for (std::size_t i : {2u, 0u, 1u}) {
    Frame f;
    f.index = i;
    f.pose.translation = Vec3(static_cast<double>(i), 0, 0);
    f.points = {{static_cast<PointId>(i), Vec3(0, 0, 1)}};
    f.labels = EntityMask(4, 4, static_cast<EntityLabel>(i + 1));
    f.confidence = ConfidenceMask(4, 4, 0.5);
    write_frame(d.path, f);
  }
  const SequenceReader r(d.path);
  REQUIRE(r.frame_count() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto f = r.frame(i);
    CHECK(f.pose.translation.x() == static_cast<double>(i));
    CHECK(f.labels->at(0, 0) == i + 1);
    CHECK(f.confidence->at(3, 3) == io::quantize_confidence(0.5));
    CHECK_FALSE(f.features.has_value());
    CHECK_FALSE(f.image.has_value());
  }
  // a label mask without its confidence mask is rejected
  fs::remove(d.path / "frames" / "000001.conf.pgm");
  CHECK_THROWS_AS(r.frame(1), IoError);
  CHECK_THROWS_AS(SequenceReader(d / "nope"), IoError);
}
