#include "isg/trainer.hpp"

#include <cmath>

#include "isg/rng.hpp"
#include "isg/types.hpp"

namespace isg {

double batch_loss(const std::vector<TrainSample>& batch, const NetworkWeights& w, const NetworkConfig& cfg) {
  if (batch.empty()) throw EmptyInput("training batch is empty");
  double total = 0.0;
  for (const auto& s : batch) total += loss(forward(s.inputs, w, cfg), s.targets);
  return total / static_cast<double>(batch.size());
}

TrainResult toy_train(const std::vector<TrainSample>& batch, const NetworkWeights& init, const NetworkConfig& cfg,
                      const TrainConfig& train) {
  if (batch.empty()) throw EmptyInput("training batch is empty");
  if (train.steps < 0) throw InvalidArgument("step count must be >= 0");
  if (!(train.lr >= 0.0) || !std::isfinite(train.lr)) throw InvalidArgument("learning rate must be finite and >= 0");
  init.validate(cfg);
  TrainResult r;
  r.weights = init;
  const int every = std::max(1, train.trace_every);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (int step = 0;; ++step) {
    double total = 0.0;
    std::map<std::string, Eigen::MatrixXd> grads;
    for (const auto& s : batch) {
      auto lg = loss_and_grad(s.inputs, s.targets, r.weights, cfg);
      total += lg.loss;
      for (auto& [name, g] : lg.grads) {
        auto it = grads.find(name);
        if (it == grads.end())
          grads.emplace(name, std::move(g));
        else
          it->second += g;
      }
    }
    const double l = total * scale;
    if (!std::isfinite(l)) throw DivergenceError("loss became non-finite at step " + std::to_string(step));
    r.final_loss = l;
    r.steps_run = step;
    const bool done = step == train.steps || (train.stop_below > 0.0 && l <= train.stop_below);
    if (step % every == 0 || done) r.trace.push_back({step, l});
    if (done) break;
    if (train.lr == 0.0) continue;
    for (auto& [name, g] : grads)
      if (is_trainable(name)) r.weights.at(name) -= train.lr * scale * g;
  }
  return r;
}

TrainSample separable_toy_graph(const NetworkConfig& cfg, std::uint64_t seed) {
  if (cfg.node_classes < 3) throw InvalidArgument("the toy graph needs at least three node classes");
  const int needed = cfg.mode == PredicateMode::Single ? 3 : 2;
  if (cfg.edge_classes < needed) throw InvalidArgument("the toy graph needs more predicate classes");
  Rng rng(seed);
  TrainSample s;
  for (int i = 0; i < 3; ++i) {
    FeatureVec f = FeatureVec::Zero(cfg.node_dim);
    f(i % cfg.node_dim) = 1.0;
    s.inputs.node_features.push_back(f);
    Eigen::Matrix3Xd pts(3, 8);
    for (Eigen::Index c = 0; c < pts.cols(); ++c)
      for (int k = 0; k < 3; ++k) pts(k, c) = rng.uniform(-0.5, 0.5);
    s.inputs.node_points.push_back(pts);
    s.targets.node_classes.push_back(i);
  }
  s.inputs.edges = {{0, 1}, {1, 2}};
  for (int k = 0; k < 2; ++k) {
    FeatureVec x(kEdgeInputLength);
    for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = rng.uniform(-1.0, 1.0);
    x(0) = k == 0 ? 1.0 : -1.0;
    s.inputs.edge_inputs.push_back(x);
    if (cfg.mode == PredicateMode::Single) {
      s.targets.edge_classes.push_back(k + 1);
    } else {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(cfg.edge_classes);
      y(k) = 1.0;
      s.targets.edge_multi.push_back(y);
    }
  }
  return s;
}

}  // namespace isg
