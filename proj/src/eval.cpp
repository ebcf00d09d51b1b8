#include "isg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "isg/kdtree.hpp"

namespace isg {

void GroundTruth::validate() const {
  for (const auto& p : points)
    if (!instance_class.contains(p.instance))
      throw InvalidArgument("GT point refers to unknown instance " + std::to_string(p.instance));
  for (const auto& t : triplets) {
    if (!instance_class.contains(t.subject) || !instance_class.contains(t.object))
      throw InvalidArgument("GT triplet endpoint is not a GT instance");
    if (t.predicate < 0) throw InvalidArgument("GT triplet predicate must be >= 0");
  }
}

std::vector<InstanceId> nearest_instances(std::span<const EstPoint> est, std::span<const GtPoint> gt) {
  if (est.empty() || gt.empty()) throw EmptyInput("evaluation needs non-empty estimated and GT clouds");
  std::vector<Vec3> pos;
  pos.reserve(gt.size());
  for (const auto& p : gt) pos.push_back(p.position);
  const KdTree3 tree(pos);
  std::vector<InstanceId> out;
  out.reserve(est.size());
  for (const auto& p : est) out.push_back(gt[tree.nearest(p.position).index].instance);
  return out;
}

namespace {

// counts[instance][label] over labelled estimated points
std::map<InstanceId, std::map<EntityLabel, std::size_t>> overlap_counts(std::span<const EstPoint> est,
                                                                        std::span<const GtPoint> gt) {
  const auto inst = nearest_instances(est, gt);
  std::map<InstanceId, std::map<EntityLabel, std::size_t>> counts;
  for (std::size_t k = 0; k < est.size(); ++k)
    if (est[k].label != kUnlabeled) ++counts[inst[k]][est[k].label];
  return counts;
}

}  // namespace

double aos(std::span<const EstPoint> est, std::span<const GtPoint> gt) {
  std::size_t dominant = 0, total = 0;
  for (const auto& [instance, labels] : overlap_counts(est, gt)) {
    std::size_t best = 0;
    for (const auto& [label, n] : labels) {
      best = std::max(best, n);
      total += n;
    }
    dominant += best;
  }
  return total == 0 ? 0.0 : static_cast<double>(dominant) / static_cast<double>(total);
}

double aos_sum_of_ratios(std::span<const EstPoint> est, std::span<const GtPoint> gt) {
  double sum = 0.0;
  for (const auto& [instance, labels] : overlap_counts(est, gt)) {
    std::size_t best = 0, total = 0;
    for (const auto& [label, n] : labels) {
      best = std::max(best, n);
      total += n;
    }
    sum += static_cast<double>(best) / static_cast<double>(total);
  }
  return sum;
}

SegmentMapping map_segments(std::span<const EstPoint> est, std::span<const GtPoint> gt) {
  const auto inst = nearest_instances(est, gt);
  std::map<EntityLabel, std::map<InstanceId, std::size_t>> votes;
  for (std::size_t k = 0; k < est.size(); ++k)
    if (est[k].label != kUnlabeled) ++votes[est[k].label][inst[k]];
  SegmentMapping m;
  for (const auto& [label, by_instance] : votes) {
    InstanceId best = 0;
    std::size_t best_n = 0, total = 0;
    for (const auto& [instance, n] : by_instance) {  // ascending id: strict > keeps the lower id on ties
      if (n > best_n) {
        best = instance;
        best_n = n;
      }
      total += n;
    }
    m.instance[label] = best;
    m.point_count[label] = total;
  }
  return m;
}

PredictedGraph PredictedGraph::from(const GlobalSceneGraph& graph, PredicateMode mode) {
  PredictedGraph p;
  p.mode = mode;
  for (const auto& [label, node] : graph.nodes()) p.node_probs[label] = node.belief.probs;
  for (const auto& [key, belief] : graph.edges()) p.edge_probs[key] = belief.probs;
  return p;
}

namespace {

struct RatioCounter {
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // class -> (hits, samples)

  void add(int cls, bool hit) {
    auto& c = per_class[cls];
    c.first += hit ? 1 : 0;
    ++c.second;
  }
  double recall() const {
    std::size_t hits = 0, n = 0;
    for (const auto& [cls, c] : per_class) {
      hits += c.first;
      n += c.second;
    }
    return n == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
  double mean_recall() const {
    if (per_class.empty()) return 1.0;
    double sum = 0.0;
    for (const auto& [cls, c] : per_class) sum += static_cast<double>(c.first) / static_cast<double>(c.second);
    return sum / static_cast<double>(per_class.size());
  }
};

}  // namespace

RecallSuite recall_suite(const PredictedGraph& pred, const SegmentMapping& mapping, const GroundTruth& gt,
                         const RecallOptions& options) {
  gt.validate();
  // Representative segment per GT instance: most points, then lower label.
  std::map<InstanceId, EntityLabel> rep;
  std::map<InstanceId, std::size_t> rep_points;
  for (const auto& [label, instance] : mapping.instance) {
    auto cit = mapping.point_count.find(label);
    const std::size_t n = cit == mapping.point_count.end() ? 0 : cit->second;
    auto it = rep.find(instance);
    if (it == rep.end() || n > rep_points[instance]) {
      rep[instance] = label;
      rep_points[instance] = n;
    }
  }
  auto rep_of = [&](InstanceId i) -> std::optional<EntityLabel> {
    auto it = rep.find(i);
    if (it == rep.end()) return std::nullopt;
    return it->second;
  };

  std::map<InstanceId, bool> node_ok;
  RatioCounter obj;
  for (const auto& [instance, cls] : gt.instance_class) {
    bool ok = false;
    if (auto r = rep_of(instance)) {
      auto it = pred.node_probs.find(*r);
      ok = it != pred.node_probs.end() && argmax_class(it->second) == cls;
    }
    node_ok[instance] = ok;
    obj.add(cls, ok);
  }

  RatioCounter predc, rel;
  auto edge_probs = [&](InstanceId s, InstanceId o) -> const Eigen::VectorXd* {
    auto rs = rep_of(s), ro = rep_of(o);
    if (!rs || !ro) return nullptr;
    auto it = pred.edge_probs.find({*rs, *ro});
    return it == pred.edge_probs.end() ? nullptr : &it->second;
  };
  auto score = [&](InstanceId s, int predicate, InstanceId o) {
    const Eigen::VectorXd* probs = edge_probs(s, o);
    bool hit;
    if (pred.mode == PredicateMode::Single) {
      const int predicted = probs ? argmax_class(*probs) : 0;
      hit = predicted == predicate;
    } else {
      hit = probs && predicate < probs->size() && (*probs)(predicate) > 0.5;
    }
    predc.add(predicate, hit);
    rel.add(predicate, hit && node_ok[s] && node_ok[o]);
  };

  std::set<std::pair<InstanceId, InstanceId>> related;
  for (const auto& t : gt.triplets) {
    score(t.subject, t.predicate, t.object);
    related.insert({t.subject, t.object});
  }
  if (pred.mode == PredicateMode::Single && options.include_none) {
    std::map<EntityLabel, InstanceId> represented;
    for (const auto& [instance, label] : rep) represented[label] = instance;
    for (const auto& [key, probs] : pred.edge_probs) {
      auto a = represented.find(key.first), b = represented.find(key.second);
      if (a == represented.end() || b == represented.end()) continue;
      if (related.contains({a->second, b->second})) continue;
      score(a->second, 0, b->second);
    }
  }

  RecallSuite r;
  r.obj_recall = obj.recall();
  r.obj_mrecall = obj.mean_recall();
  r.pred_recall = predc.recall();
  r.pred_mrecall = predc.mean_recall();
  r.rel_recall = rel.recall();
  return r;
}

std::map<std::string, double> metrics_map(double aos_value, double aos_ratio_sum, const RecallSuite& r) {
  return {{"aos", aos_value},
          {"aos_sum_of_ratios", aos_ratio_sum},
          {"obj_mrecall", r.obj_mrecall},
          {"obj_recall", r.obj_recall},
          {"pred_mrecall", r.pred_mrecall},
          {"pred_recall", r.pred_recall},
          {"rel_recall", r.rel_recall}};
}

std::string metrics_json(const std::map<std::string, double>& metrics) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) doc[k] = v;
  return doc.dump(2) + "\n";
}

}  // namespace isg
