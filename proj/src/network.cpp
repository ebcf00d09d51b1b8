#include "isg/network.hpp"

#include <string>

#include "isg/types.hpp"

namespace isg {

namespace {

using ad::Tape;
using ad::Var;

std::string lin(const std::string& block, int index, const char* param) {
  return block + "." + std::to_string(index) + "." + param;
}

std::string layer_block(int layer, const char* name) { return "mp" + std::to_string(layer) + "_" + name; }

/// Weights placed on a tape on first use.
class Model {
 public:
  Model(Tape& tape, const NetworkWeights& w, bool trainable) : tape_(tape), w_(w), trainable_(trainable) {}

  Var p(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    const auto& m = w_.at(name);
    Var v = trainable_ ? tape_.parameter(m) : tape_.constant(m);
    vars_.emplace(name, v);
    return v;
  }

  Var input(const Eigen::MatrixXd& m) { return tape_.constant(m); }

  Var linear(const std::string& block, int index, const Var& x) {
    return ad::affine(p(lin(block, index, "weight")), x, p(lin(block, index, "bias")));
  }
  Var mlp2(const std::string& block, const Var& x) { return linear(block, 1, ad::relu(linear(block, 0, x))); }

  Var point_encoder(const Var& points) { return ad::row_max(mlp2("point_enc", points)); }
  Var edge_feature(const Var& input) { return mlp2("edge_mlp", input); }

  Var gated_fuse(const Var& v, const Var& g, const Var& gate) {
    if (v.rows() != g.rows()) throw ShapeError("gated_fuse: node and geometric features differ in length");
    const Var joint = ad::vcat(std::initializer_list<Var>{v, g});
    if (gate.rows() != 1 || gate.cols() != joint.rows()) throw ShapeError("gated_fuse: gate length mismatch");
    const Var s = ad::sigmoid(ad::matmul(gate, joint));
    return v + ad::scale(ad::sigmoid(g), s);
  }

  std::pair<Var, Var> fan(const Var& query, const Var& key, const Var& value, int layer) {
    const Var att = ad::softmax(mlp2(layer_block(layer, "fan_att"), ad::vcat(std::initializer_list<Var>{query, key})));
    const Var val = ad::matmul(p(lin(layer_block(layer, "fan_value"), 0, "weight")), value);
    return {att, ad::hadamard(att, val)};
  }

  struct LayerOut {
    std::vector<Var> node_msg, edge_msg;
    std::vector<Var> attention;
  };

  LayerOut message_layer(const std::vector<std::pair<std::size_t, std::size_t>>& edges, const std::vector<Var>& fused,
                         const std::vector<Var>& edge_feat, int layer) {
    LayerOut out;
    std::vector<std::vector<Var>> incoming(fused.size());
    out.attention.reserve(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [i, j] = edges[k];
      auto [att, msg] = fan(fused[i], edge_feat[k], fused[j], layer);
      out.attention.push_back(att);
      incoming[i].push_back(msg);
    }
    const std::string gv = layer_block(layer, "node_mlp"), gp = layer_block(layer, "edge_mlp");
    for (std::size_t i = 0; i < fused.size(); ++i) {
      const Var context = incoming[i].empty() ? input(Eigen::MatrixXd::Zero(fused[i].rows(), 1))
                                              : ad::row_max(ad::hcat(incoming[i]));
      out.node_msg.push_back(mlp2(gv, ad::vcat(std::initializer_list<Var>{fused[i], context})));
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [i, j] = edges[k];
      out.edge_msg.push_back(mlp2(gp, ad::vcat(std::initializer_list<Var>{fused[i], edge_feat[k], fused[j]})));
    }
    return out;
  }

  Var gru(const Var& h, const Var& x, const std::string& block) {
    if (h.rows() != x.rows()) throw ShapeError("gru_update: state and input differ in length");
    auto gate = [&](const char* g) {
      const std::string b = block + ".0.";
      return ad::matmul(p(b + "w_" + g), x) + ad::matmul(p(b + "u_" + g), h) + p(b + "b_" + g);
    };
    const Var r = ad::sigmoid(gate("r"));
    const Var z = ad::sigmoid(gate("z"));
    const std::string b = block + ".0.";
    const Var n =
        ad::tanh(ad::matmul(p(b + "w_n"), x) + ad::hadamard(r, ad::matmul(p(b + "u_n"), h)) + p(b + "b_n"));
    return ad::hadamard(ad::one_minus(z), n) + ad::hadamard(z, h);
  }

  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  Tape& tape_;
  const NetworkWeights& w_;
  bool trainable_;
  std::map<std::string, Var> vars_;
};

struct Graph {
  std::vector<Var> node_logits, edge_logits;
};

Graph run(Model& m, const GraphInputs& in, const NetworkConfig& cfg, std::vector<LayerTrace>* trace) {
  in.validate(cfg);
  const std::size_t n = in.node_count();
  std::vector<Var> v, g, e;
  v.reserve(n);
  g.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(m.input(in.node_features[i]));
    g.push_back(m.point_encoder(m.input(in.node_points[i])));
  }
  for (const auto& x : in.edge_inputs) e.push_back(m.edge_feature(m.input(x)));

  for (int l = 0; l < cfg.layers; ++l) {
    const Var gate = m.p(lin(layer_block(l, "gate"), 0, "weight"));
    std::vector<Var> fused;
    fused.reserve(n);
    for (std::size_t i = 0; i < n; ++i) fused.push_back(m.gated_fuse(v[i], g[i], gate));
    auto msgs = m.message_layer(in.edges, fused, e, l);
    if (trace) {
      LayerTrace t;
      for (const auto& x : fused) t.fused.push_back(x.value().col(0));
      for (const auto& x : msgs.attention) t.attention.push_back(x.value().col(0));
      for (const auto& x : msgs.node_msg) t.node_messages.push_back(x.value().col(0));
      for (const auto& x : msgs.edge_msg) t.edge_messages.push_back(x.value().col(0));
      trace->push_back(std::move(t));
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = m.gru(v[i], msgs.node_msg[i], "node_gru");
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = m.gru(e[k], msgs.edge_msg[k], "edge_gru");
  }

  Graph out;
  for (const auto& x : v) out.node_logits.push_back(m.linear("node_head", 0, x));
  for (const auto& x : e) out.edge_logits.push_back(m.linear("edge_head", 0, x));
  return out;
}

Var loss_on_tape(Tape& tape, const std::vector<Var>& node_logits, const std::vector<Var>& edge_logits,
                 PredicateMode mode, const GraphTargets& gt) {
  if (gt.node_classes.size() != node_logits.size()) throw InvalidLabel("node targets do not cover every node");
  std::vector<Var> terms;
  for (std::size_t i = 0; i < node_logits.size(); ++i)
    terms.push_back(ad::cross_entropy_logits(node_logits[i], gt.node_classes[i]));
  Var total = terms.empty() ? tape.constant(Eigen::MatrixXd::Zero(1, 1)) : ad::mean(terms);
  if (edge_logits.empty()) return total;
  std::vector<Var> edge_terms;
  if (mode == PredicateMode::Single) {
    if (gt.edge_classes.size() != edge_logits.size()) throw InvalidLabel("edge targets do not cover every edge");
    for (std::size_t k = 0; k < edge_logits.size(); ++k)
      edge_terms.push_back(ad::cross_entropy_logits(edge_logits[k], gt.edge_classes[k]));
    return total + ad::mean(edge_terms);
  }
  if (gt.edge_multi.size() != edge_logits.size()) throw InvalidLabel("edge targets do not cover every edge");
  for (std::size_t k = 0; k < edge_logits.size(); ++k) {
    const auto& y = gt.edge_multi[k];
    if (y.size() != edge_logits[k].rows()) throw InvalidLabel("multi-label target has the wrong length");
    for (Eigen::Index c = 0; c < y.size(); ++c)
      if (y(c) != 0.0 && y(c) != 1.0) throw InvalidLabel("multi-label targets must be 0 or 1");
    edge_terms.push_back(ad::bce_logits(edge_logits[k], y));
  }
  const double count = static_cast<double>(edge_logits.size()) * static_cast<double>(edge_logits[0].rows());
  return total + ad::scale(ad::sum(ad::vcat(edge_terms)), 1.0 / count);
}

Eigen::VectorXd softmax_value(const Eigen::VectorXd& z) {
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

Eigen::VectorXd sigmoid_value(const Eigen::VectorXd& z) {
  Eigen::VectorXd s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    s(i) = z(i) >= 0 ? 1.0 / (1.0 + std::exp(-z(i))) : std::exp(z(i)) / (1.0 + std::exp(z(i)));
  return s;
}

}  // namespace

void GraphInputs::validate(const NetworkConfig& cfg) const {
  const std::size_t n = node_features.size();
  if (node_points.size() != n) throw ShapeError("node_points must have one entry per node");
  if (edge_inputs.size() != edges.size()) throw ShapeError("edge_inputs must have one entry per edge");
  for (std::size_t i = 0; i < n; ++i) {
    if (node_features[i].size() != cfg.node_dim)
      throw ShapeError("node feature " + std::to_string(i) + " has length " + std::to_string(node_features[i].size()) +
                       ", expected " + std::to_string(cfg.node_dim));
    if (node_points[i].cols() == 0) throw EmptyPointSet("node " + std::to_string(i) + " has no points");
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edges[k].first >= n || edges[k].second >= n) throw ShapeError("edge refers to a missing node");
    if (edge_inputs[k].size() != kEdgeInputLength) throw ShapeError("edge input must have 12 entries");
  }
}

FeatureVec point_encoder(const Eigen::Matrix3Xd& points, const NetworkWeights& w) {
  if (points.cols() == 0) throw EmptyPointSet("point encoder input is empty");
  Tape t;
  Model m(t, w, false);
  return m.point_encoder(m.input(points)).value().col(0);
}

FeatureVec edge_feature(const FeatureVec& edge_input, const NetworkWeights& w) {
  if (edge_input.size() != kEdgeInputLength) throw ShapeError("edge input must have 12 entries");
  Tape t;
  Model m(t, w, false);
  return m.edge_feature(m.input(edge_input)).value().col(0);
}

FeatureVec gated_fuse(const FeatureVec& v, const FeatureVec& g, const Eigen::MatrixXd& gate) {
  Tape t;
  NetworkWeights none;
  Model m(t, none, false);
  return m.gated_fuse(m.input(v), m.input(g), m.input(gate)).value().col(0);
}

FanResult fan(const FeatureVec& query, const FeatureVec& key, const FeatureVec& value, const NetworkWeights& w,
              int layer) {
  Tape t;
  Model m(t, w, false);
  auto [att, out] = m.fan(m.input(query), m.input(key), m.input(value), layer);
  return {att.value().col(0), out.value().col(0)};
}

Messages message_layer(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       const std::vector<FeatureVec>& fused_nodes, const std::vector<FeatureVec>& edge_features,
                       const NetworkWeights& w, int layer) {
  if (edge_features.size() != edges.size()) throw ShapeError("edge features must have one entry per edge");
  for (const auto& [i, j] : edges)
    if (i >= fused_nodes.size() || j >= fused_nodes.size()) throw ShapeError("edge refers to a missing node");
  Tape t;
  Model m(t, w, false);
  std::vector<Var> nodes, edge_vars;
  for (const auto& x : fused_nodes) nodes.push_back(m.input(x));
  for (const auto& x : edge_features) edge_vars.push_back(m.input(x));
  auto out = m.message_layer(edges, nodes, edge_vars, layer);
  Messages msgs;
  for (const auto& x : out.node_msg) msgs.node.push_back(x.value().col(0));
  for (const auto& x : out.edge_msg) msgs.edge.push_back(x.value().col(0));
  return msgs;
}

FeatureVec gru_update(const FeatureVec& h, const FeatureVec& x, const NetworkWeights& w, const std::string& block) {
  Tape t;
  Model m(t, w, false);
  return m.gru(m.input(h), m.input(x), block).value().col(0);
}

Prediction forward(const GraphInputs& inputs, const NetworkWeights& w, const NetworkConfig& cfg,
                   std::vector<LayerTrace>* trace) {
  Tape t;
  Model m(t, w, false);
  const Graph g = run(m, inputs, cfg, trace);
  Prediction p;
  p.mode = cfg.mode;
  for (const auto& x : g.node_logits) {
    p.node_logits.push_back(x.value().col(0));
    p.node_probs.push_back(softmax_value(p.node_logits.back()));
  }
  for (const auto& x : g.edge_logits) {
    p.edge_logits.push_back(x.value().col(0));
    p.edge_probs.push_back(cfg.mode == PredicateMode::Single ? softmax_value(p.edge_logits.back())
                                                             : sigmoid_value(p.edge_logits.back()));
  }
  return p;
}

double loss(const Prediction& pred, const GraphTargets& gt) {
  Tape t;
  std::vector<Var> nodes, edges;
  for (const auto& z : pred.node_logits) nodes.push_back(t.constant(z));
  for (const auto& z : pred.edge_logits) edges.push_back(t.constant(z));
  return loss_on_tape(t, nodes, edges, pred.mode, gt).scalar();
}

LossAndGrad loss_and_grad(const GraphInputs& inputs, const GraphTargets& gt, const NetworkWeights& w,
                          const NetworkConfig& cfg) {
  Tape t;
  Model m(t, w, true);
  const Graph g = run(m, inputs, cfg, nullptr);
  const Var l = loss_on_tape(t, g.node_logits, g.edge_logits, cfg.mode, gt);
  t.backward(l);
  LossAndGrad out;
  out.loss = l.scalar();
  for (const auto& [name, value] : w.tensors()) {
    auto it = m.vars().find(name);
    out.grads[name] = it == m.vars().end() ? Eigen::MatrixXd::Zero(value.rows(), value.cols()) : it->second.grad();
  }
  return out;
}

}  // namespace isg
