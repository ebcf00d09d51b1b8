#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "isg/io.hpp"
#include "isg/pipeline.hpp"
#include "isg/synth.hpp"

using namespace isg;
namespace fs = std::filesystem;

namespace {

synth::Primitive box(int cls, Vec3 c, Vec3 d, double density = 400) {
  synth::Primitive p;
  p.class_id = cls;
  p.center = c;
  p.dims = d;
  p.density = density;
  return p;
}

synth::SceneSpec one_box() {
  synth::SceneSpec s;
  s.node_classes = {"crate"};
  s.primitives = {box(0, Vec3(0, 0, 0.4), Vec3(0.8, 0.8, 0.8))};
  s.camera.frames = 30;
  s.camera.step_deg = 12;
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isg_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

}  // namespace

TEST_CASE("spec: json round trip and validation") {
  const auto desk = synth::desk_scene();
  const auto back = synth::parse_spec(synth::spec_json(desk));
  CHECK(synth::spec_json(back) == synth::spec_json(desk));

  auto bad = one_box();
  bad.primitives[0].density = 0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = one_box();
  bad.primitives[0].class_id = 3;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = one_box();
  bad.primitives.clear();
  CHECK_THROWS_AS(bad.validate(), SpecError);
  CHECK_THROWS_AS(synth::parse_spec("{\"node_classes\": [\"a\"]}"), SpecError);
}

TEST_CASE("support relations") {
  synth::Primitive floor;
  floor.kind = synth::PrimitiveKind::Plane;
  floor.dims = Vec3(4, 4, 0);
  const auto table = box(1, Vec3(0, 0, 0.35), Vec3(1, 0.6, 0.7));
  const auto cup = box(2, Vec3(0.2, 0, 0.75), Vec3(0.1, 0.1, 0.1));
  const auto shelf = box(3, Vec3(0.55, 0, 0.35), Vec3(0.1, 0.3, 0.3));
  const auto far = box(2, Vec3(3, 3, 2), Vec3(0.1, 0.1, 0.1));
  const auto t = synth::support_relations({floor, table, cup, shelf, far});
  const std::vector<Triplet> expect{{2, 1, 1}, {3, 1, 2}, {4, 2, 2}};
  CHECK(t == expect);
}

TEST_CASE("look_at: z toward the target, y down") {
  const auto p = synth::look_at(Vec3(0, -2, 1), Vec3(0, 0, 1));
  CHECK((p.rotation.col(2) - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(p.rotation.col(1).z() < 0);
  CHECK(std::abs(p.rotation.determinant() - 1) < 1e-12);
}

TEST_CASE("frames: pure and consistent with their points") {
  const synth::Scene scene(synth::desk_scene());
  for (std::size_t i : {0u, 57u, 199u}) {
    const auto a = scene.frame(i);
    const auto b = scene.frame(i);
    CHECK(a.pose.translation == b.pose.translation);
    CHECK(a.labels->data() == b.labels->data());
    CHECK(a.points.size() == b.points.size());
    const auto labels = scene.frame_labels(i);
    REQUIRE(!a.points.empty());
    for (const auto& p : a.points) {
      const auto proj = project(p.position, a.pose, scene.intrinsics());
      REQUIRE(proj);
      const EntityLabel l = a.labels->at(proj->px(), proj->py());
      REQUIRE(l != kUnlabeled);
      CHECK(labels.at(l) == scene.instance_of(p.id));
    }
    for (std::size_t k = 0; k < a.labels->size(); ++k)
      if ((*a.labels)[k] == kUnlabeled) CHECK((*a.confidence)[k] == 0.0);
  }
}

TEST_CASE("generate: same seed same bytes, other seed differs") {
  auto spec = one_box();
  spec.camera.frames = 4;
  const auto a = scratch("gen_a"), b = scratch("gen_b"), c = scratch("gen_c");
  synth::generate(spec, a);
  synth::generate(spec, b);
  const auto sa = snapshot(a);
  CHECK(sa.size() > 4);
  CHECK(sa == snapshot(b));
  CHECK(sa.contains("gt_graph.json"));
  CHECK(sa.contains("gt_points.ply"));
  spec.seed = 2;
  synth::generate(spec, c);
  CHECK(sa != snapshot(c));
  // the written sequence reads back frame by frame
  const SequenceReader reader(a);
  spec.seed = 1;
  const synth::Scene scene(spec);
  REQUIRE(reader.frame_count() == scene.frame_count());
  for (std::size_t i = 0; i < scene.frame_count(); ++i) {
    const auto r = reader.frame(i), s2 = scene.frame(i);
    CHECK(r.labels->data() == s2.labels->data());
    CHECK(r.confidence->data() == s2.confidence->data());
    REQUIRE(r.points.size() == s2.points.size());
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      CHECK(r.points[k].id == s2.points[k].id);
      CHECK(r.points[k].position == s2.points[k].position);
    }
    CHECK((r.pose.rotation - s2.pose.rotation).cwiseAbs().maxCoeff() == 0.0);
  }
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("one box gives one node and no edges") {
  const synth::Scene scene(one_box());
  PipelineConfig cfg;
  cfg.keyframe.min_box_px = 20;
  cfg.network.node_classes = 1;
  cfg.network.edge_classes = 3;
  cfg.async = false;
  const auto r = run_pipeline(scene, NetworkWeights::random(cfg.network, 0), cfg);
  CHECK(r.keyframes > 0);
  CHECK(r.exported.nodes.size() == 1);
  CHECK(r.exported.edges.empty());
  CHECK(aos(estimated_points(r.map), scene.ground_truth().points) == 1.0);
}

TEST_CASE("stress scene: three frames, dense floor, sparse table") {
  const synth::Scene s(synth::stress_scene_nonuniform());
  CHECK(s.frame_count() == 3);
  std::map<InstanceId, std::size_t> per;
  for (const auto& p : s.points()) ++per[p.instance];
  REQUIRE(per.size() == 2);
  CHECK(per.at(1) > 4 * per.at(2));
}
