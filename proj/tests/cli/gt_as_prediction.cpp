// Writes map.ply and scene_graph.json that reproduce a GT directory exactly:
// one segment per instance and one-hot beliefs. Used to check that eval
// scores a perfect prediction as 1.

#include <cstdio>
#include <filesystem>

#include "isg/io.hpp"

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: gt_as_prediction GT_DIR OUT_DIR\n");
    return 2;
  }
  const std::filesystem::path out(argv[2]);
  std::filesystem::create_directories(out);
  const auto gt = isg::io::read_ground_truth(argv[1]);
  const auto cloud = isg::io::read_gt_ply(std::filesystem::path(argv[1]) / "gt_points.ply");
  isg::PointMap map;
  for (const auto& p : cloud) map.set({p.id, p.position, static_cast<isg::EntityLabel>(p.instance), 1.0});
  isg::io::write_map_ply(out / "map.ply", map);

  isg::io::ExportedGraph g;
  const auto nc = static_cast<Eigen::Index>(gt.node_classes.size());
  const auto ec = static_cast<Eigen::Index>(gt.edge_classes.size());
  for (const auto& [inst, cls] : gt.instance_class) {
    isg::io::ExportedNode n;
    n.label = static_cast<isg::EntityLabel>(inst);
    n.class_id = cls;
    n.class_probs = Eigen::VectorXd::Unit(nc, cls);
    n.obb.dims = isg::Vec3::Ones();
    n.weight = 1.0;
    g.nodes.push_back(n);
  }
  for (const auto& t : gt.triplets) {
    isg::io::ExportedEdge e;
    e.from = static_cast<isg::EntityLabel>(t.subject);
    e.to = static_cast<isg::EntityLabel>(t.object);
    e.pred_probs = Eigen::VectorXd::Unit(ec, t.predicate);
    e.weight = 1.0;
    g.edges.push_back(e);
  }
  isg::io::write_text(out / "scene_graph.json", isg::io::scene_graph_json(g));
  return 0;
}
