// Command line driver: run, eval, synth, assoc-bench, init-weights.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "isg/pipeline.hpp"
#include "isg/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitNumeric = 3;

isg::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return isg::parse_config(isg::io::read_text(path), path);
}

isg::NetworkWeights load_weights(const std::string& path, const isg::NetworkConfig& cfg, std::uint64_t seed) {
  if (!path.empty()) return isg::NetworkWeights::load(path, cfg);
  std::cerr << "isg: no --weights given, using random weights (seed " << seed << ")\n";
  return isg::NetworkWeights::random(cfg, seed);
}

bool has_ground_truth(const fs::path& dir) {
  return fs::exists(dir / "gt_graph.json") && fs::exists(dir / "gt_points.ply");
}

int cmd_run(const std::string& sequence, const std::string& weights_path, const std::string& config_path,
            const std::string& out, std::string gt_dir, std::uint64_t seed) {
  const auto cfg = load_config(config_path);
  const auto weights = load_weights(weights_path, cfg.network, seed);
  const isg::SequenceReader reader(sequence);
  if (gt_dir.empty() && has_ground_truth(sequence)) gt_dir = sequence;
  std::optional<isg::GroundTruth> gt;
  std::vector<std::string> node_names, edge_names;
  if (!gt_dir.empty()) {
    gt = isg::io::read_ground_truth(gt_dir);
    node_names = gt->node_classes;
    edge_names = gt->edge_classes;
  }
  const auto result = isg::run_pipeline(reader, weights, cfg);
  isg::write_outputs(out, result, gt ? &*gt : nullptr, node_names, edge_names);
  std::cerr << "isg: " << reader.frame_count() << " frames, " << result.keyframes << " keyframes, "
            << result.exported.nodes.size() << " nodes, " << result.exported.edges.size() << " edges\n";
  return 0;
}

int cmd_eval(const std::string& pred, const std::string& gt_dir, bool exclude_none, const std::string& out) {
  const auto gt = isg::io::read_ground_truth(gt_dir);
  const auto map = isg::io::read_map_ply(fs::path(pred) / "map.ply");
  const auto graph_path = fs::path(pred) / "scene_graph.json";
  const auto graph = isg::io::parse_scene_graph(isg::io::read_text(graph_path), graph_path.string());
  isg::RecallOptions opt;
  opt.include_none = !exclude_none;
  const auto text = isg::metrics_json(isg::evaluate(map, graph.predicted(), gt, opt));
  if (!out.empty()) isg::io::write_text(out, text);
  std::cout << text;
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& preset, const std::string& out) {
  isg::synth::SceneSpec spec;
  if (!spec_path.empty())
    spec = isg::synth::parse_spec(isg::io::read_text(spec_path), spec_path);
  else if (preset == "stress")
    spec = isg::synth::stress_scene_nonuniform();
  else if (preset == "desk")
    spec = isg::synth::desk_scene();
  else
    throw isg::SpecError("give --spec FILE or --preset stress|desk");
  isg::synth::generate(spec, out);
  return 0;
}

int cmd_assoc_bench(const std::string& sequence, const std::string& strategies, const std::string& config_path,
                    std::string gt_dir, const std::string& out) {
  auto cfg = load_config(config_path);
  cfg.predict_graph = false;
  if (gt_dir.empty()) gt_dir = sequence;
  const auto gt = isg::io::read_ground_truth(gt_dir);
  const isg::SequenceReader reader(sequence);
  std::ostringstream csv;
  csv << "strategy,aos,aos_sum_of_ratios,labels\n";
  std::stringstream list(strategies);
  for (std::string name; std::getline(list, name, ',');) {
    if (name.empty()) continue;
    cfg.association.strategy = isg::parse_strategy(name);
    const auto r = isg::run_pipeline(reader, isg::NetworkWeights{}, cfg);
    const auto est = isg::estimated_points(r.map);
    csv << name << "," << isg::io::format_double(isg::aos(est, gt.points)) << ","
        << isg::io::format_double(isg::aos_sum_of_ratios(est, gt.points)) << "," << r.map.labels().size() << "\n";
  }
  if (!out.empty()) isg::io::write_text(out, csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_init_weights(const std::string& config_path, std::uint64_t seed, bool zeros, const std::string& out) {
  const auto cfg = load_config(config_path);
  const auto w = zeros ? isg::NetworkWeights::zeros(cfg.network) : isg::NetworkWeights::random(cfg.network, seed);
  w.save(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental 3D semantic scene graph estimation"};
  app.require_subcommand(1);

  std::string sequence, weights, config, out, gt, pred, spec, preset, strategies = "mean_confidence,max_overlap,iou";
  std::uint64_t seed = 0;
  bool exclude_none = false, zeros = false;

  auto* run = app.add_subcommand("run", "replay a sequence and export the scene graph");
  run->add_option("--sequence", sequence, "sequence directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--weights", weights, "network weight file (JSON)");
  run->add_option("--config", config, "pipeline config (JSON)");
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--gt", gt, "ground truth directory (default: the sequence, when it has GT)");
  run->add_option("--seed", seed, "seed for random weights when --weights is absent");

  auto* eval = app.add_subcommand("eval", "score an output directory against ground truth");
  eval->add_option("--pred", pred, "directory with map.ply and scene_graph.json")->required();
  eval->add_option("--gt", gt, "directory with gt_graph.json and gt_points.ply")->required();
  eval->add_flag("--exclude-none", exclude_none, "do not score pairs without a GT relationship");
  eval->add_option("--out", out, "also write the metrics here");

  auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
  synth->add_option("--spec", spec, "scene spec (JSON)");
  synth->add_option("--preset", preset, "built-in scene: stress or desk");
  synth->add_option("--out", out, "output directory")->required();

  auto* bench = app.add_subcommand("assoc-bench", "AOS of each association strategy as CSV");
  bench->add_option("--sequence", sequence, "sequence directory")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--strategies", strategies, "comma-separated: mean_confidence,max_overlap,iou");
  bench->add_option("--config", config, "pipeline config (JSON)");
  bench->add_option("--gt", gt, "ground truth directory (default: the sequence)");
  bench->add_option("--out", out, "also write the CSV here");

  auto* init = app.add_subcommand("init-weights", "write a weight file for a config");
  init->add_option("--config", config, "pipeline config (JSON)");
  init->add_option("--seed", seed, "random seed");
  init->add_flag("--zeros", zeros, "all-zero weights");
  init->add_option("--out", out, "weight file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadInput;
  }

  try {
    if (*run) return cmd_run(sequence, weights, config, out, gt, seed);
    if (*eval) return cmd_eval(pred, gt, exclude_none, out);
    if (*synth) return cmd_synth(spec, preset, out);
    if (*bench) return cmd_assoc_bench(sequence, strategies, config, gt, out);
    if (*init) return cmd_init_weights(config, seed, zeros, out);
  } catch (const isg::DivergenceError& e) {
    std::cerr << "isg: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const isg::Error& e) {
    std::cerr << "isg: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "isg: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitBadInput;
}
