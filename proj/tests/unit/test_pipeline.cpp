#include <doctest.h>

#include "isg/pipeline.hpp"
#include "isg/synth.hpp"

using namespace isg;

namespace {

synth::SceneSpec short_desk(int frames = 40) {
  auto s = synth::desk_scene();
  s.camera.frames = frames;
  return s;
}

PipelineConfig desk_cfg(bool async) {
  auto cfg = parse_config("{\"keyframe\": {\"min_box_px\": 20}}");
  cfg.network.node_classes = 5;
  cfg.network.edge_classes = 3;
  cfg.async = async;
  return cfg;
}

}  // namespace

TEST_CASE("config: defaults, round trip, rejection") {
  const auto d = parse_config("{}");
  CHECK(d.association.theta == doctest::Approx(0.2));
  CHECK(d.rho == 0.5);
  CHECK(d.omega_max == 100.0);
  const auto c = parse_config("{\"theta\": 0.35, \"strategy\": \"iou\", \"layers\": 1, \"mode\": \"multi\"}");
  CHECK(c.association.strategy == AssociationStrategy::IoU);
  CHECK(c.network.layers == 1);
  CHECK(c.network.mode == PredicateMode::Multi);
  CHECK(config_json(parse_config(config_json(c))) == config_json(c));
  CHECK_THROWS_AS(parse_config("{\"thetta\": 0.3}"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("{\"theta\": 1.5}"), IoError);
  CHECK_THROWS_AS(parse_config("{\"theta\": "), IoError);
}

TEST_CASE("pipeline: replays are identical, async equals sync") {
  const synth::Scene scene(short_desk());
  const auto w = NetworkWeights::random(desk_cfg(true).network, 3);
  const auto a = run_pipeline(scene, w, desk_cfg(true));
  const auto b = run_pipeline(scene, w, desk_cfg(true));
  const auto s = run_pipeline(scene, w, desk_cfg(false));
  const auto ja = io::scene_graph_json(a.exported);
  CHECK(a.keyframes > 1);
  CHECK(a.ticks == a.keyframes);
  CHECK(!a.exported.nodes.empty());
  CHECK(ja == io::scene_graph_json(b.exported));
  CHECK(ja == io::scene_graph_json(s.exported));
  REQUIRE(a.frames.size() == s.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].mapping == s.frames[i].mapping);
}

TEST_CASE("pipeline: label fusion only, tick spacing and timings") {
  const synth::Scene scene(short_desk(30));
  auto cfg = desk_cfg(false);
  const auto w = NetworkWeights::random(cfg.network, 1);
  cfg.predict_graph = false;
  const auto lf = run_pipeline(scene, w, cfg);
  CHECK(lf.ticks == 0);
  CHECK(lf.exported.nodes.empty());
  CHECK(lf.label_fusion_ms.size() == lf.keyframes);

  cfg.predict_graph = true;
  cfg.tick_every = 3;
  const auto r = run_pipeline(scene, w, cfg);
  CHECK(r.ticks == (r.keyframes + 2) / 3);
  const auto t = r.timings();
  CHECK(t.contains("label_fusion"));
  CHECK(t.contains("graph_estimation"));
  CHECK(t.at("graph_estimation").count == r.ticks);
  // label fusion alone gives the same map
  CHECK(io::scene_graph_json(io::ExportedGraph{}) == io::scene_graph_json(lf.exported));
  std::size_t same = 0;
  for (const auto& [id, p] : r.map.points()) same += lf.map.find(id) && lf.map.find(id)->label == p.label;
  CHECK(same == r.map.size());
}

TEST_CASE("pipeline: evaluation against the scene ground truth") {
  const synth::Scene scene(short_desk());
  const auto cfg = desk_cfg(false);
  const auto r = run_pipeline(scene, NetworkWeights::random(cfg.network, 2), cfg);
  const auto m = evaluate(r.map, r.exported.predicted(), scene.ground_truth());
  for (const char* k : {"aos", "obj_recall", "pred_recall", "rel_recall", "obj_mrecall", "pred_mrecall"}) {
    REQUIRE(m.contains(k));
    CHECK(m.at(k) >= 0.0);
    CHECK(m.at(k) <= 1.0);
  }
  CHECK(m.at("aos") > 0.9);
  const auto est = estimated_points(r.map);
  CHECK(est.size() == r.map.size());
}

TEST_CASE("pipeline: wrong weights are rejected up front") {
  const synth::Scene scene(short_desk(3));
  const auto cfg = desk_cfg(false);
  auto other = cfg.network;
  other.node_dim = other.geo_dim = 8;
  CHECK_THROWS_AS(run_pipeline(scene, NetworkWeights::random(other, 1), cfg), ShapeError);
}
