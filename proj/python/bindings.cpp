#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "isg/pipeline.hpp"
#include "isg/synth.hpp"
#include "isg/trainer.hpp"

namespace py = pybind11;

namespace {

using RowPoints = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<isg::Vec3> to_points(const RowPoints& m) {
  std::vector<isg::Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m.row(i).transpose();
  return out;
}

isg::EntityMask to_mask(const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw isg::ShapeError("mask must be a 2-D array");
  isg::EntityMask m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::dict obb_dict(const isg::Obb& b) {
  py::dict d;
  d["center"] = b.center;
  d["dims"] = b.dims;
  d["yaw"] = b.yaw;
  return d;
}

isg::Obb obb_from(const py::dict& d) {
  isg::Obb b;
  b.center = d["center"].cast<isg::Vec3>();
  b.dims = d["dims"].cast<isg::Vec3>();
  b.yaw = d["yaw"].cast<double>();
  return b;
}

}  // namespace

PYBIND11_MODULE(_isg, m) {
  m.doc() = "Incremental 3D semantic scene graph estimation";

  py::register_exception<isg::Error>(m, "Error");

  m.def(
      "fit_obb",
      [](const RowPoints& pts) { return obb_dict(isg::fit_obb(to_points(pts))); }, py::arg("points"),
      "Gravity-aligned minimum-area box of an (N, 3) array.");
  m.def(
      "obb_collide",
      [](const py::dict& a, const py::dict& b, double margin) { return isg::obb_collide(obb_from(a), obb_from(b), margin); },
      py::arg("a"), py::arg("b"), py::arg("margin") = 0.0);
  m.def(
      "rel_pose_descriptor",
      [](const py::dict& a, const py::dict& b, const RowPoints& pa, const RowPoints& pb) {
        const auto ra = to_points(pa), rb = to_points(pb);
        return Eigen::VectorXd(isg::rel_pose_descriptor(obb_from(a), obb_from(b), ra, rb));
      },
      py::arg("obb_i"), py::arg("obb_j"), py::arg("points_i"), py::arg("points_j"));

  m.def(
      "association_candidates",
      [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& img,
         const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& ref_labels,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& ref_weights, double theta,
         const std::string& strategy) {
        const auto mask = to_mask(img);
        isg::ReferenceRender r{to_mask(ref_labels),
                               isg::Raster<double>(mask.width(), mask.height(), 0.0),
                               isg::Raster<isg::PointId>(mask.width(), mask.height(), isg::kNoPoint),
                               isg::Raster<double>(mask.width(), mask.height(), 0.0),
                               isg::Raster<std::uint8_t>(mask.width(), mask.height(), 0),
                               isg::Raster<isg::PointId>(mask.width(), mask.height(), isg::kNoPoint)};
        if (!r.labels.same_shape(mask) || ref_weights.size() != static_cast<py::ssize_t>(mask.size()))
          throw isg::ShapeError("masks must share one shape");
        std::copy(ref_weights.data(), ref_weights.data() + ref_weights.size(), r.weights.data().begin());
        isg::AssociationConfig cfg{theta, isg::parse_strategy(strategy)};
        std::map<isg::EntityLabel, std::vector<std::pair<isg::EntityLabel, double>>> out;
        for (const auto& [label, cands] : isg::association_candidates(isg::overlap_stats(mask, r), cfg)) {
          auto& v = out[label];
          for (const auto& c : cands) v.emplace_back(c.ref_label, c.score);
        }
        return out;
      },
      py::arg("image_mask"), py::arg("reference_labels"), py::arg("reference_weights"), py::arg("theta") = 0.2,
      py::arg("strategy") = "mean_confidence",
      "Accepted (reference label, score) candidates per input label, best first.");

  m.def(
      "fuse_belief",
      [](const Eigen::VectorXd& probs, double weight, const Eigen::VectorXd& incoming, double incoming_weight,
         double max_weight) {
        const auto b = isg::fuse_belief({probs, weight}, incoming, incoming_weight, max_weight);
        return py::make_tuple(b.probs, b.weight);
      },
      py::arg("probs"), py::arg("weight"), py::arg("incoming"), py::arg("incoming_weight") = 1.0,
      py::arg("max_weight") = isg::kDefaultMaxWeight);

  m.def(
      "aos",
      [](const RowPoints& est, const std::vector<isg::EntityLabel>& labels, const RowPoints& gt,
         const std::vector<isg::InstanceId>& instances) {
        if (static_cast<std::size_t>(est.rows()) != labels.size() ||
            static_cast<std::size_t>(gt.rows()) != instances.size())
          throw isg::ShapeError("points and labels differ in length");
        std::vector<isg::EstPoint> e;
        std::vector<isg::GtPoint> g;
        for (Eigen::Index i = 0; i < est.rows(); ++i) e.push_back({est.row(i).transpose(), labels[static_cast<std::size_t>(i)]});
        for (Eigen::Index i = 0; i < gt.rows(); ++i) g.push_back({gt.row(i).transpose(), instances[static_cast<std::size_t>(i)]});
        return isg::aos(e, g);
      },
      py::arg("est_points"), py::arg("est_labels"), py::arg("gt_points"), py::arg("gt_instances"));

  m.def(
      "synth",
      [](const std::string& preset_or_spec, const std::filesystem::path& out) {
        isg::synth::SceneSpec spec;
        if (preset_or_spec == "stress")
          spec = isg::synth::stress_scene_nonuniform();
        else if (preset_or_spec == "desk")
          spec = isg::synth::desk_scene();
        else
          spec = isg::synth::parse_spec(preset_or_spec);
        isg::synth::generate(spec, out);
      },
      py::arg("spec"), py::arg("out"), "Generate a sequence from 'stress', 'desk' or a JSON scene spec.");

  m.def(
      "init_weights",
      [](const std::string& config_json, std::uint64_t seed) {
        const auto cfg = config_json.empty() ? isg::PipelineConfig{} : isg::parse_config(config_json);
        return isg::NetworkWeights::random(cfg.network, seed).to_json();
      },
      py::arg("config") = "", py::arg("seed") = 0, "Random weights for a pipeline config, as JSON text.");

  m.def(
      "run",
      [](const std::filesystem::path& sequence, const std::string& weights_json, const std::string& config_json,
         std::uint64_t seed) {
        const auto cfg = config_json.empty() ? isg::PipelineConfig{} : isg::parse_config(config_json);
        const auto w = weights_json.empty() ? isg::NetworkWeights::random(cfg.network, seed)
                                            : isg::NetworkWeights::from_json(weights_json, cfg.network);
        isg::RunResult r;
        {
          py::gil_scoped_release release;
          r = isg::run_pipeline(isg::SequenceReader(sequence), w, cfg);
        }
        py::dict out;
        out["scene_graph"] = isg::io::scene_graph_json(r.exported);
        out["keyframes"] = r.keyframes;
        out["labels"] = r.map.labels().size();
        return out;
      },
      py::arg("sequence"), py::arg("weights") = "", py::arg("config") = "", py::arg("seed") = 0,
      "Replay a sequence directory; returns the scene graph JSON and counts.");

  m.def(
      "toy_train",
      [](int steps, double lr, std::uint64_t seed) {
        isg::NetworkConfig cfg;
        cfg.node_dim = cfg.edge_dim = cfg.geo_dim = cfg.hidden_dim = 8;
        cfg.node_classes = 3;
        cfg.edge_classes = 3;
        const auto sample = isg::separable_toy_graph(cfg, seed);
        isg::TrainConfig t;
        t.steps = steps;
        t.lr = lr;
        const auto r = isg::toy_train({sample}, isg::NetworkWeights::random(cfg, seed), cfg, t);
        std::vector<std::pair<int, double>> trace;
        for (const auto& p : r.trace) trace.emplace_back(p.step, p.loss);
        return trace;
      },
      py::arg("steps") = 200, py::arg("lr") = 0.1, py::arg("seed") = 0,
      "Gradient descent on the built-in separable toy graph; returns (step, loss) pairs.");
}
