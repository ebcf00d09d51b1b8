#pragma once

#include <cstdint>
#include <vector>

#include "isg/network.hpp"

namespace isg {

struct TrainSample {
  GraphInputs inputs;
  GraphTargets targets;
};

struct TrainConfig {
  int steps = 2000;
  double lr = 0.05;
  /// Record the loss every `trace_every` steps (and always at the last step).
  int trace_every = 10;
  /// Stop once the batch loss is at or below this value (0 disables).
  double stop_below = 0.0;
};

struct TracePoint {
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  NetworkWeights weights;
  /// Sampled at increasing step numbers; step 0 is the initial loss.
  std::vector<TracePoint> trace;
  double final_loss = 0.0;
  int steps_run = 0;
};

/// Mean loss over the batch.
double batch_loss(const std::vector<TrainSample>& batch, const NetworkWeights& w, const NetworkConfig& cfg);

/// Plain gradient descent on the mean batch loss. The frozen image projection
/// is left untouched. Throws DivergenceError on a non-finite loss.
TrainResult toy_train(const std::vector<TrainSample>& batch, const NetworkWeights& init, const NetworkConfig& cfg,
                      const TrainConfig& train);

/// Three nodes in a chain (0 -> 1, 1 -> 2) whose initial features encode
/// their class, with points and edge inputs drawn from `seed`. Edge 0 carries
/// predicate 1 and edge 1 predicate 2 (Single mode) or the matching one-hot
/// vectors (Multi mode).
TrainSample separable_toy_graph(const NetworkConfig& cfg, std::uint64_t seed);

}  // namespace isg
