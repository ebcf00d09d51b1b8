#include "isg/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace isg {

using nlohmann::json;

void PipelineConfig::validate() const {
  association.validate();
  if (render.splat_radius < 0) throw InvalidArgument("splat_radius must be >= 0");
  if (!(keyframe.rot_thresh_deg >= 0) || !(keyframe.trans_thresh_m >= 0) || keyframe.min_box_px < 0)
    throw InvalidArgument("keyframe thresholds must be >= 0");
  if (extract.min_points < 1) throw InvalidArgument("min_points must be >= 1");
  if (extract.outliers.mean_k < 1 || !(extract.outliers.std_ratio >= 0))
    throw InvalidArgument("outlier parameters out of range");
  extract.gravity.validate();
  network.validate();
  if (!(rho >= 0)) throw InvalidArgument("rho must be >= 0");
  if (!(omega_max > 0)) throw InvalidArgument("omega_max must be positive");
  if (tick_every < 1) throw InvalidArgument("tick_every must be >= 1");
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw InvalidArgument(where + ": unknown key '" + k + "'");
  }
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw IoError(origin, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw IoError(origin, 0, "config must be a JSON object");
  PipelineConfig c;
  try {
    reject_unknown(doc,
                   {"theta", "strategy", "splat_radius", "keyframe", "min_points", "outlier", "gravity_up", "rho",
                    "omega_max", "layers", "dims", "classes", "mode", "max_points", "tick_every", "async"},
                   origin);
    c.association.theta = doc.value("theta", c.association.theta);
    if (doc.contains("strategy")) c.association.strategy = parse_strategy(doc["strategy"].get<std::string>());
    c.render.splat_radius = doc.value("splat_radius", c.render.splat_radius);
    if (doc.contains("keyframe")) {
      const auto& k = doc["keyframe"];
      reject_unknown(k, {"rot_deg", "trans_m", "min_box_px", "require_both"}, origin + ": keyframe");
      c.keyframe.rot_thresh_deg = k.value("rot_deg", c.keyframe.rot_thresh_deg);
      c.keyframe.trans_thresh_m = k.value("trans_m", c.keyframe.trans_thresh_m);
      c.keyframe.min_box_px = k.value("min_box_px", c.keyframe.min_box_px);
      c.keyframe.require_both = k.value("require_both", c.keyframe.require_both);
    }
    c.extract.min_points = doc.value("min_points", c.extract.min_points);
    if (doc.contains("outlier")) {
      const auto& o = doc["outlier"];
      reject_unknown(o, {"mean_k", "std_ratio"}, origin + ": outlier");
      c.extract.outliers.mean_k = o.value("mean_k", c.extract.outliers.mean_k);
      c.extract.outliers.std_ratio = o.value("std_ratio", c.extract.outliers.std_ratio);
    }
    if (doc.contains("gravity_up")) {
      const auto& g = doc["gravity_up"];
      if (!g.is_array() || g.size() != 3) throw InvalidArgument(origin + ": gravity_up must have three entries");
      c.extract.gravity.up = Vec3(g[0].get<double>(), g[1].get<double>(), g[2].get<double>());
    }
    c.rho = doc.value("rho", c.rho);
    c.omega_max = doc.value("omega_max", c.omega_max);
    c.network.layers = doc.value("layers", c.network.layers);
    if (doc.contains("dims")) {
      const auto& d = doc["dims"];
      reject_unknown(d, {"node", "edge", "hidden"}, origin + ": dims");
      c.network.node_dim = d.value("node", c.network.node_dim);
      c.network.edge_dim = d.value("edge", c.network.edge_dim);
      c.network.hidden_dim = d.value("hidden", c.network.hidden_dim);
      c.network.geo_dim = c.network.node_dim;
    }
    if (doc.contains("classes")) {
      const auto& k = doc["classes"];
      reject_unknown(k, {"node", "edge"}, origin + ": classes");
      c.network.node_classes = k.value("node", c.network.node_classes);
      c.network.edge_classes = k.value("edge", c.network.edge_classes);
    }
    if (doc.contains("mode")) {
      const auto m = doc["mode"].get<std::string>();
      if (m == "single")
        c.network.mode = PredicateMode::Single;
      else if (m == "multi")
        c.network.mode = PredicateMode::Multi;
      else
        throw InvalidArgument(origin + ": mode must be 'single' or 'multi'");
    }
    c.network.max_points = doc.value("max_points", c.network.max_points);
    c.tick_every = doc.value("tick_every", c.tick_every);
    c.async = doc.value("async", c.async);
  } catch (const json::exception& e) {
    throw IoError(origin, 0, std::string("malformed config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(origin, 0, e.what());
  }
  return c;
}

std::string config_json(const PipelineConfig& c) {
  nlohmann::ordered_json doc;
  doc["theta"] = c.association.theta;
  doc["strategy"] = std::string(to_string(c.association.strategy));
  doc["splat_radius"] = c.render.splat_radius;
  doc["keyframe"] = {{"rot_deg", c.keyframe.rot_thresh_deg},
                     {"trans_m", c.keyframe.trans_thresh_m},
                     {"min_box_px", c.keyframe.min_box_px},
                     {"require_both", c.keyframe.require_both}};
  doc["min_points"] = c.extract.min_points;
  doc["outlier"] = {{"mean_k", c.extract.outliers.mean_k}, {"std_ratio", c.extract.outliers.std_ratio}};
  const Vec3& up = c.extract.gravity.up;
  doc["gravity_up"] = {up.x(), up.y(), up.z()};
  doc["rho"] = c.rho;
  doc["omega_max"] = c.omega_max;
  doc["layers"] = c.network.layers;
  doc["dims"] = {{"node", c.network.node_dim}, {"edge", c.network.edge_dim}, {"hidden", c.network.hidden_dim}};
  doc["classes"] = {{"node", c.network.node_classes}, {"edge", c.network.edge_classes}};
  doc["mode"] = c.network.mode == PredicateMode::Single ? "single" : "multi";
  doc["max_points"] = c.network.max_points;
  doc["tick_every"] = c.tick_every;
  doc["async"] = c.async;
  return doc.dump(2) + "\n";
}

std::map<std::string, io::StageStats> RunResult::timings() const {
  return {{"label_fusion", io::summarize(label_fusion_ms)}, {"graph_estimation", io::summarize(graph_estimation_ms)}};
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

using ViewKey = std::pair<EntityLabel, KeyframeId>;

/// What the frame loop hands over at a tick: a copy of the map plus what was
/// added since the previous tick.
struct Snapshot {
  PointMap map;
  std::vector<Keyframe> new_keyframes;
  std::vector<std::pair<ViewKey, FeatureVec>> new_views;
  std::map<EntityLabel, FeatureVec> running_mean;
};

class GraphBackend {
 public:
  GraphBackend(const NetworkWeights& weights, const PipelineConfig& cfg)
      : weights_(weights), cfg_(cfg), graph_(cfg.omega_max) {}

  void process(const Snapshot& s) {
    const auto t0 = Clock::now();
    for (const auto& kf : s.new_keyframes) keyframes_.push_back(kf);
    for (const auto& [key, v] : s.new_views) views_[key] = v;

    std::map<EntityLabel, std::vector<LabeledPoint>> groups;
    for (const auto& [id, p] : s.map.points())
      if (p.label != kUnlabeled) groups[p.label].push_back(p);
    std::vector<EntityNode> nodes;
    std::map<EntityLabel, CacheEntry> next_cache;
    for (auto& [label, pts] : groups) {
      auto it = cache_.find(label);
      CacheEntry entry;
      if (it != cache_.end() && same_geometry(it->second.points, pts)) {
        entry = std::move(it->second);
      } else {
        entry.node = extract_entity(label, pts, cfg_.extract);
        entry.points = std::move(pts);
      }
      if (entry.node) nodes.push_back(*entry.node);
      next_cache.emplace(label, std::move(entry));
    }
    cache_ = std::move(next_cache);

    const auto visibility = build_visibility(nodes, s.map, keyframes_);
    const auto neighbours = build_neighbour(nodes, cfg_.rho, cfg_.extract.gravity);

    GraphInputs in;
    std::map<EntityLabel, std::size_t> index;
    std::vector<std::vector<Vec3>> positions(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      index[n.label] = i;
      for (PointId id : n.points) positions[i].push_back(s.map.find(id)->position);
      in.node_features.push_back(node_feature(n.label, visibility, s.running_mean));
      in.node_points.push_back(normalize_points(positions[i], n.obb, cfg_.network.max_points));
    }
    std::vector<EdgeKey> keys;
    for (const auto& [a, b] : neighbours.edges) {
      for (const auto& [from, to] : {EdgeKey{a, b}, EdgeKey{b, a}}) {
        const std::size_t i = index.at(from), j = index.at(to);
        const auto r = rel_pose_descriptor(nodes[i].obb, nodes[j].obb, positions[i], positions[j], cfg_.extract.gravity);
        in.edges.emplace_back(i, j);
        in.edge_inputs.push_back(edge_input(nodes[i].obb, nodes[j].obb, r));
        keys.push_back({from, to});
      }
    }
    const Prediction pred = forward(in, weights_, cfg_.network);
    for (const auto& p : pred.node_probs)
      if (!p.allFinite()) throw DivergenceError("network produced non-finite node probabilities");
    for (const auto& p : pred.edge_probs)
      if (!p.allFinite()) throw DivergenceError("network produced non-finite edge probabilities");
    graph_.integrate(pred, nodes, keys);
    graph_.retain(s.map.labels());
    ++ticks_;
    ms_.push_back(elapsed_ms(t0));
  }

  const GlobalSceneGraph& graph() const { return graph_; }
  const std::vector<double>& ms() const { return ms_; }
  std::size_t ticks() const { return ticks_; }

 private:
  struct CacheEntry {
    std::vector<LabeledPoint> points;
    std::optional<EntityNode> node;
  };

  static bool same_geometry(const std::vector<LabeledPoint>& a, const std::vector<LabeledPoint>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k].id != b[k].id || a[k].position != b[k].position) return false;
    return true;
  }

  FeatureVec node_feature(EntityLabel label, const VisibilityGraph& visibility,
                          const std::map<EntityLabel, FeatureVec>& running_mean) const {
    try {
      return multiview_feature(label, visibility, views_);
    } catch (const NoObservations&) {
      auto it = running_mean.find(label);
      if (it != running_mean.end()) return it->second;
      return FeatureVec::Zero(cfg_.network.node_dim);
    }
  }

  const NetworkWeights& weights_;
  const PipelineConfig& cfg_;
  GlobalSceneGraph graph_;
  std::vector<Keyframe> keyframes_;
  std::map<ViewKey, FeatureVec> views_;
  std::map<EntityLabel, CacheEntry> cache_;
  std::vector<double> ms_;
  std::size_t ticks_ = 0;
};

/// Runs the back end on its own thread; snapshots are processed in order.
class AsyncBackend {
 public:
  explicit AsyncBackend(GraphBackend& backend) : backend_(backend), worker_([this] { loop(); }) {}
  ~AsyncBackend() {
    finish_nothrow();
  }

  void submit(std::unique_ptr<const Snapshot> s) {
    {
      std::lock_guard lock(mu_);
      if (error_) std::rethrow_exception(error_);
      queue_.push_back(std::move(s));
    }
    cv_.notify_one();
  }

  /// Waits for the queue to drain and rethrows a back-end failure.
  void finish() {
    finish_nothrow();
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void finish_nothrow() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_one();
    if (worker_.joinable()) worker_.join();
  }

  void loop() {
    for (;;) {
      std::unique_ptr<const Snapshot> s;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
        if (queue_.empty()) return;
        s = std::move(queue_.front());
        queue_.pop_front();
        if (error_) continue;
      }
      try {
        backend_.process(*s);
      } catch (...) {
        std::lock_guard lock(mu_);
        error_ = std::current_exception();
      }
    }
  }

  GraphBackend& backend_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<const Snapshot>> queue_;
  bool closed_ = false;
  std::exception_ptr error_;
  std::thread worker_;
};

}  // namespace

RunResult run_pipeline(const FrameSource& source, const NetworkWeights& weights, const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.predict_graph) weights.validate(cfg.network);
  const CameraIntrinsics K = source.intrinsics();
  K.validate();

  RunResult r;
  GraphBackend backend(weights, cfg);
  std::unique_ptr<AsyncBackend> async;
  if (cfg.predict_graph && cfg.async) async = std::make_unique<AsyncBackend>(backend);

  std::vector<RigidPose> kf_poses;
  std::map<EntityLabel, MultiviewAccumulator> running;
  Snapshot pending;
  const Eigen::MatrixXd* projection = cfg.predict_graph ? &weights.at("image_proj.0.weight") : nullptr;
  std::size_t since_tick = 0;

  auto tick = [&] {
    pending.map = r.map;
    pending.running_mean.clear();
    for (const auto& [label, acc] : running)
      if (acc.count() > 0) pending.running_mean[label] = acc.mean();
    auto snap = std::make_unique<const Snapshot>(std::move(pending));
    pending = Snapshot{};
    since_tick = 0;
    if (async)
      async->submit(std::move(snap));
    else
      backend.process(*snap);
  };

  for (std::size_t fi = 0; fi < source.frame_count(); ++fi) {
    const Frame f = source.frame(fi);
    const auto t0 = Clock::now();
    for (const auto& p : f.points) r.map.upsert(p.id, p.position);
    FrameLog log;
    log.frame = fi;
    if (f.labels && f.confidence) {
      const auto boxes = label_boxes(*f.labels);
      std::vector<PixelBox> box_list;
      for (const auto& [label, box] : boxes) box_list.push_back(box);
      if (select_keyframe(f.pose, kf_poses, box_list, cfg.keyframe)) {
        log.keyframe = true;
        const auto render = render_reference(r.map, f.pose, K, cfg.render);
        auto assoc = associate(*f.labels, render, cfg.association, r.map);
        fuse(r.map, assoc.consistent, *f.confidence, render);
        const KeyframeId kf = static_cast<KeyframeId>(fi);
        kf_poses.push_back(f.pose);
        pending.new_keyframes.push_back({kf, f.pose, K});
        if (cfg.predict_graph) {
          for (const auto& [input, box] : boxes) {
            const EntityLabel label = assoc.mapping.at(input);
            FeatureVec v;
            if (f.features && f.features->contains(input)) {
              v = f.features->at(input);
              if (v.size() != cfg.network.node_dim)
                throw ShapeError("frame " + std::to_string(fi) + ": precomputed feature has length " +
                                 std::to_string(v.size()) + ", expected " + std::to_string(cfg.network.node_dim));
            } else if (f.image) {
              v = PatchFeatureProvider(*projection, *f.image).feature(label, box);
            } else {
              const RgbImage img = mask_image(assoc.consistent, label);
              v = PatchFeatureProvider(*projection, img).feature(label, box);
            }
            running[label].add(v);
            pending.new_views.push_back({{label, kf}, std::move(v)});
          }
        }
        log.mapping = std::move(assoc.mapping);
        log.new_labels = std::move(assoc.new_labels);
        ++r.keyframes;
        ++since_tick;
        r.label_fusion_ms.push_back(elapsed_ms(t0));
        if (cfg.predict_graph && since_tick >= static_cast<std::size_t>(cfg.tick_every)) tick();
      }
    }
    r.frames.push_back(std::move(log));
  }
  if (cfg.predict_graph && since_tick > 0) tick();
  if (async) async->finish();

  r.graph = backend.graph();
  r.ticks = backend.ticks();
  r.graph.retain(r.map.labels());
  r.exported = io::ExportedGraph::from(r.graph, cfg.network.mode);
  r.graph_estimation_ms = backend.ms();
  return r;
}

std::vector<EstPoint> estimated_points(const PointMap& map) {
  std::vector<EstPoint> out;
  out.reserve(map.size());
  for (const auto& [id, p] : map.points()) out.push_back({p.position, p.label});
  return out;
}

std::map<std::string, double> evaluate(const PointMap& map, const PredictedGraph& pred, const GroundTruth& gt,
                                       const RecallOptions& options) {
  const auto est = estimated_points(map);
  const auto mapping = map_segments(est, gt.points);
  const auto recall = recall_suite(pred, mapping, gt, options);
  return metrics_map(aos(est, gt.points), aos_sum_of_ratios(est, gt.points), recall);
}

void write_outputs(const std::filesystem::path& out, const RunResult& r, const GroundTruth* gt,
                   const std::vector<std::string>& node_classes, const std::vector<std::string>& edge_classes) {
  std::filesystem::create_directories(out);
  io::write_map_ply(out / "map.ply", r.map);
  io::write_text(out / "scene_graph.json", io::scene_graph_json(r.exported));
  io::write_text(out / "graph.dot", io::scene_graph_dot(r.exported, node_classes, edge_classes));
  io::write_text(out / "timings.json", io::timings_json(r.timings()));
  if (gt) io::write_text(out / "metrics.json", metrics_json(evaluate(r.map, r.exported.predicted(), *gt)));
}

}  // namespace isg
