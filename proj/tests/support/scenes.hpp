#pragma once

// Small input builders shared by the tests.

#include <utility>
#include <vector>

#include "isg/entity_map.hpp"
#include "isg/eval.hpp"
#include "isg/rng.hpp"

namespace test {

using isg::EntityLabel;

/// Reference render from explicit per-pixel labels and weights; each labelled
/// pixel is its own point (id = pixel index) drawn at its own centre.
inline isg::ReferenceRender flat_render(int w, int h, const std::vector<EntityLabel>& labels,
                                        const std::vector<double>& weights) {
  isg::ReferenceRender r{isg::EntityMask(w, h, 0),         isg::Raster<double>(w, h, 0.0),
                         isg::Raster<isg::PointId>(w, h, isg::kNoPoint), isg::Raster<double>(w, h, 1.0),
                         isg::Raster<std::uint8_t>(w, h, 0), isg::Raster<isg::PointId>(w, h, isg::kNoPoint)};
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    r.labels[i] = labels[i];
    if (labels[i] != 0) {
      r.weights[i] = weights[i];
      r.provenance[i] = static_cast<isg::PointId>(i);
      r.center[i] = 1;
    }
  }
  return r;
}

/// Random blocky masks: a few rectangles per side painted over background,
/// reference weights drawn from a coarse grid so score ties occur.
inline std::pair<isg::EntityMask, isg::ReferenceRender> random_mask_pair(isg::Rng& rng, int w, int h, int n_in,
                                                                         int n_ref) {
  auto paint = [&](int labels) {
    std::vector<EntityLabel> m(static_cast<std::size_t>(w * h), 0);
    const int rects = 2 + static_cast<int>(rng.below(4));
    for (int k = 0; k < rects; ++k) {
      const EntityLabel l = 1 + static_cast<EntityLabel>(rng.below(static_cast<std::uint64_t>(labels)));
      const int x0 = static_cast<int>(rng.below(w)), y0 = static_cast<int>(rng.below(h));
      const int x1 = std::min(w - 1, x0 + static_cast<int>(rng.below(w))), y1 = std::min(h - 1, y0 + static_cast<int>(rng.below(h)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m[static_cast<std::size_t>(y * w + x)] = l;
    }
    return m;
  };
  const auto in = paint(n_in);
  const auto ref = paint(n_ref);
  std::vector<double> weights(ref.size());
  for (auto& v : weights) v = 0.125 * static_cast<double>(1 + rng.below(8));
  isg::EntityMask img(w, h, 0);
  for (std::size_t i = 0; i < in.size(); ++i) img[i] = in[i];
  return {img, flat_render(w, h, ref, weights)};
}

struct EvalScene {
  isg::GroundTruth gt;
  std::vector<isg::EstPoint> est;
  isg::PredictedGraph pred;
};

/// A few GT instances as point clusters with random support triplets, and an
/// estimate that relabels, splits and drops some of them. With `exact` the
/// estimate is the GT itself: one segment per instance, one-hot beliefs and
/// an edge for every GT triplet.
inline EvalScene random_eval_scene(isg::Rng& rng, bool exact = false, int node_classes = 4, int edge_classes = 3) {
  EvalScene s;
  const int n = 2 + static_cast<int>(rng.below(4));
  for (int c = 0; c < node_classes; ++c) s.gt.node_classes.push_back("c" + std::to_string(c));
  for (int c = 0; c < edge_classes; ++c) s.gt.edge_classes.push_back("e" + std::to_string(c));
  for (int i = 1; i <= n; ++i) {
    const auto inst = static_cast<isg::InstanceId>(10 * i);
    s.gt.instance_class[inst] = static_cast<int>(rng.below(static_cast<std::uint64_t>(node_classes)));
    const isg::Vec3 c(4.0 * i, rng.uniform(-1, 1), 0);
    const int pts = 5 + static_cast<int>(rng.below(10));
    for (int k = 0; k < pts; ++k)
      s.gt.points.push_back({c + isg::Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0, 1)), inst});
  }
  for (const auto& [a, ca] : s.gt.instance_class)
    for (const auto& [b, cb] : s.gt.instance_class)
      if (a != b && rng.below(3) == 0)
        s.gt.triplets.push_back({a, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(edge_classes - 1))), b});

  auto one_hot = [](int size, int k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
    v(k) = 1.0;
    return v;
  };
  if (exact) {
    for (const auto& p : s.gt.points) s.est.push_back({p.position, static_cast<EntityLabel>(p.instance)});
    for (const auto& [i, c] : s.gt.instance_class) s.pred.node_probs[static_cast<EntityLabel>(i)] = one_hot(node_classes, c);
    for (const auto& t : s.gt.triplets)
      s.pred.edge_probs[{static_cast<EntityLabel>(t.subject), static_cast<EntityLabel>(t.object)}] =
          one_hot(edge_classes, t.predicate);
    return s;
  }
  // estimate: jittered GT points; each point keeps a per-instance label, a
  // random other label, or none
  std::map<isg::InstanceId, EntityLabel> base;
  EntityLabel next = 1;
  for (const auto& [i, c] : s.gt.instance_class) base[i] = next++;
  const EntityLabel extra = next++;
  for (const auto& p : s.gt.points) {
    const auto r = rng.below(10);
    EntityLabel l = base[p.instance];
    if (r == 0) l = 0;
    else if (r == 1) l = extra;
    else if (r == 2) l = 1 + static_cast<EntityLabel>(rng.below(static_cast<std::uint64_t>(extra)));
    s.est.push_back({p.position + isg::Vec3(rng.uniform(-0.01, 0.01), 0, 0), l});
  }
  auto dist = [&](int size) {
    Eigen::VectorXd v(size);
    for (int k = 0; k < size; ++k) v(k) = rng.uniform(0, 1);
    return Eigen::VectorXd(v / v.sum());
  };
  for (EntityLabel l = 1; l <= extra; ++l)
    if (rng.below(5) != 0) s.pred.node_probs[l] = dist(node_classes);
  for (EntityLabel a = 1; a <= extra; ++a)
    for (EntityLabel b = 1; b <= extra; ++b)
      if (a != b && rng.below(2) == 0) s.pred.edge_probs[{a, b}] = dist(edge_classes);
  return s;
}

}  // namespace test
