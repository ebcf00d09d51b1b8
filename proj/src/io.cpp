#include "isg/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace isg::io {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  if (!std::isfinite(v)) throw InvalidArgument("cannot serialize a non-finite value");
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw InvalidArgument("number formatting failed");
  return std::string(buf.data(), end);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), 0, "cannot open for writing");
  out << content;
  out.close();
  if (!out) throw IoError(path.string(), 0, "write failed");
}

namespace {

/// Whitespace-separated tokens with the line they came from.
struct Token {
  std::string text;
  long line;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  long line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      out.push_back({text.substr(start, i - start), line});
    }
  }
  return out;
}

double parse_double(const Token& t, const fs::path& path) {
  double v = 0.0;
  const char* end = t.text.data() + t.text.size();
  auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw IoError(path.string(), t.line, "expected a finite number, got '" + t.text + "'");
  return v;
}

template <typename Int>
Int parse_int(const Token& t, const fs::path& path) {
  Int v{};
  const char* end = t.text.data() + t.text.size();
  auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw IoError(path.string(), t.line, "expected an integer, got '" + t.text + "'");
  return v;
}

/// Lines split into tokens, skipping blank and comment lines.
std::vector<std::pair<long, std::vector<std::string>>> split_lines(const std::string& text) {
  std::vector<std::pair<long, std::vector<std::string>>> out;
  std::istringstream in(text);
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (!toks.empty()) out.emplace_back(n, std::move(toks));
  }
  return out;
}

}  // namespace

CameraIntrinsics read_intrinsics(const fs::path& path) {
  const auto toks = tokenize(read_text(path));
  if (toks.size() != 6) throw IoError(path.string(), toks.empty() ? 0 : toks.back().line, "expected fx fy cx cy width height");
  CameraIntrinsics K;
  K.fx = parse_double(toks[0], path);
  K.fy = parse_double(toks[1], path);
  K.cx = parse_double(toks[2], path);
  K.cy = parse_double(toks[3], path);
  K.width = parse_int<int>(toks[4], path);
  K.height = parse_int<int>(toks[5], path);
  try {
    K.validate();
  } catch (const Error& e) {
    throw IoError(path.string(), toks[0].line, e.what());
  }
  return K;
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& K) {
  write_text(path, format_double(K.fx) + " " + format_double(K.fy) + " " + format_double(K.cx) + " " +
                       format_double(K.cy) + " " + std::to_string(K.width) + " " + std::to_string(K.height) + "\n");
}

RigidPose read_pose(const fs::path& path) {
  const auto toks = tokenize(read_text(path));
  if (toks.size() != 16) throw IoError(path.string(), toks.empty() ? 0 : toks.back().line, "expected 16 numbers (4x4 matrix)");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = parse_double(toks[static_cast<std::size_t>(4 * r + c)], path);
  if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
    throw IoError(path.string(), toks[12].line, "last row must be 0 0 0 1");
  RigidPose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  try {
    p.validate();
  } catch (const Error& e) {
    throw IoError(path.string(), toks[0].line, e.what());
  }
  return p;
}

void write_pose(const fs::path& path, const RigidPose& pose) {
  std::string s;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double v = r < 3 ? (c < 3 ? pose.rotation(r, c) : pose.translation(r)) : (c == 3 ? 1.0 : 0.0);
      s += format_double(v);
      s += c == 3 ? '\n' : ' ';
    }
  }
  write_text(path, s);
}

std::vector<ObservedPoint> read_points(const fs::path& path) {
  std::vector<ObservedPoint> out;
  for (const auto& [line, toks] : split_lines(read_text(path))) {
    if (toks.size() != 4) throw IoError(path.string(), line, "expected 'point_id x y z'");
    ObservedPoint p;
    p.id = parse_int<PointId>({toks[0], line}, path);
    if (p.id < 0) throw IoError(path.string(), line, "point ids must be non-negative");
    for (int k = 0; k < 3; ++k) p.position(k) = parse_double({toks[static_cast<std::size_t>(k + 1)], line}, path);
    out.push_back(p);
  }
  return out;
}

void write_points(const fs::path& path, const std::vector<ObservedPoint>& points) {
  std::string s;
  for (const auto& p : points)
    s += std::to_string(p.id) + " " + format_double(p.position.x()) + " " + format_double(p.position.y()) + " " +
         format_double(p.position.z()) + "\n";
  write_text(path, s);
}

namespace {

struct NetpbmHeader {
  int width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm(const std::string& bytes, const char* magic, const fs::path& path) {
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0)
    throw IoError(path.string(), 1, std::string("not a binary ") + (magic[1] == '5' ? "PGM" : "PPM") + " file");
  std::size_t i = 2;
  long line = 1;
  std::array<long, 3> values{};
  for (int k = 0; k < 3; ++k) {
    while (i < bytes.size() && (std::isspace(static_cast<unsigned char>(bytes[i])) || bytes[i] == '#')) {
      if (bytes[i] == '#')
        while (i < bytes.size() && bytes[i] != '\n') ++i;
      if (i < bytes.size() && bytes[i] == '\n') ++line;
      ++i;
    }
    const std::size_t start = i;
    while (i < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[i]))) ++i;
    if (start == i) throw IoError(path.string(), line, "malformed header");
    values[static_cast<std::size_t>(k)] = std::stol(bytes.substr(start, i - start));
  }
  if (i >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[i])))
    throw IoError(path.string(), line, "malformed header");
  NetpbmHeader h;
  h.width = static_cast<int>(values[0]);
  h.height = static_cast<int>(values[1]);
  h.maxval = static_cast<int>(values[2]);
  h.data_offset = i + 1;
  if (h.width <= 0 || h.height <= 0) throw IoError(path.string(), line, "image size must be positive");
  if (h.maxval <= 0 || h.maxval > 65535) throw IoError(path.string(), line, "maxval must be in 1..65535");
  return h;
}

}  // namespace

Raster<std::uint16_t> read_pgm(const fs::path& path) {
  const std::string bytes = read_text(path);
  const auto h = parse_netpbm(bytes, "P5", path);
  const std::size_t bps = h.maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  if (bytes.size() - h.data_offset < n * bps) throw IoError(path.string(), 0, "pixel data is truncated");
  Raster<std::uint16_t> img(h.width, h.height);
  const auto* d = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
  for (std::size_t k = 0; k < n; ++k)
    img[k] = bps == 1 ? d[k] : static_cast<std::uint16_t>((d[2 * k] << 8) | d[2 * k + 1]);
  return img;
}

void write_pgm16(const fs::path& path, const Raster<std::uint16_t>& image) {
  std::string s = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n65535\n";
  s.reserve(s.size() + 2 * image.size());
  for (std::size_t k = 0; k < image.size(); ++k) {
    s.push_back(static_cast<char>(image[k] >> 8));
    s.push_back(static_cast<char>(image[k] & 0xff));
  }
  write_text(path, s);
}

EntityMask read_label_mask(const fs::path& path) {
  const auto raw = read_pgm(path);
  EntityMask m(raw.width(), raw.height());
  for (std::size_t k = 0; k < raw.size(); ++k) m[k] = raw[k];
  return m;
}

void write_label_mask(const fs::path& path, const EntityMask& mask) {
  Raster<std::uint16_t> raw(mask.width(), mask.height());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k] > 65535) throw InvalidLabel("mask label " + std::to_string(mask[k]) + " does not fit 16 bits");
    raw[k] = static_cast<std::uint16_t>(mask[k]);
  }
  write_pgm16(path, raw);
}

double quantize_confidence(double c) {
  const double clamped = std::clamp(c, 0.0, 1.0);
  return std::round(clamped * 65535.0) / 65535.0;
}

ConfidenceMask read_confidence_mask(const fs::path& path) {
  const auto raw = read_pgm(path);
  ConfidenceMask m(raw.width(), raw.height());
  for (std::size_t k = 0; k < raw.size(); ++k) m[k] = raw[k] / 65535.0;
  return m;
}

void write_confidence_mask(const fs::path& path, const ConfidenceMask& mask) {
  Raster<std::uint16_t> raw(mask.width(), mask.height());
  for (std::size_t k = 0; k < mask.size(); ++k)
    raw[k] = static_cast<std::uint16_t>(std::lround(std::clamp(mask[k], 0.0, 1.0) * 65535.0));
  write_pgm16(path, raw);
}

RgbImage read_ppm(const fs::path& path) {
  const std::string bytes = read_text(path);
  const auto h = parse_netpbm(bytes, "P6", path);
  if (h.maxval != 255) throw IoError(path.string(), 1, "only maxval 255 PPM images are supported");
  const std::size_t n = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
  if (bytes.size() - h.data_offset < 3 * n) throw IoError(path.string(), 0, "pixel data is truncated");
  RgbImage img(h.width, h.height);
  const auto* d = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
  for (std::size_t k = 0; k < n; ++k) img[k] = Rgb{d[3 * k], d[3 * k + 1], d[3 * k + 2]};
  return img;
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  std::string s = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  for (std::size_t k = 0; k < image.size(); ++k) {
    s.push_back(static_cast<char>(image[k].r));
    s.push_back(static_cast<char>(image[k].g));
    s.push_back(static_cast<char>(image[k].b));
  }
  write_text(path, s);
}

std::map<EntityLabel, FeatureVec> read_features(const fs::path& path) {
  std::map<EntityLabel, FeatureVec> out;
  Eigen::Index dim = -1;
  for (const auto& [line, toks] : split_lines(read_text(path))) {
    if (toks.size() < 2) throw IoError(path.string(), line, "expected 'label v_1 ... v_D'");
    const auto label = parse_int<EntityLabel>({toks[0], line}, path);
    if (label == kUnlabeled) throw IoError(path.string(), line, "label 0 is reserved for background");
    FeatureVec v(static_cast<Eigen::Index>(toks.size() - 1));
    for (std::size_t k = 1; k < toks.size(); ++k) v(static_cast<Eigen::Index>(k - 1)) = parse_double({toks[k], line}, path);
    if (dim >= 0 && v.size() != dim) throw IoError(path.string(), line, "feature length differs from previous lines");
    dim = v.size();
    if (!out.emplace(label, std::move(v)).second) throw IoError(path.string(), line, "duplicate label");
  }
  return out;
}

void write_features(const fs::path& path, const std::map<EntityLabel, FeatureVec>& features) {
  std::string s;
  for (const auto& [label, v] : features) {
    s += std::to_string(label);
    for (Eigen::Index k = 0; k < v.size(); ++k) s += " " + format_double(v(k));
    s += "\n";
  }
  write_text(path, s);
}

namespace {

std::string ply_header(std::size_t n, const std::vector<std::pair<std::string, std::string>>& props) {
  std::string s = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(n) + "\n";
  for (const auto& [type, name] : props) s += "property " + type + " " + name + "\n";
  return s + "end_header\n";
}

/// Rows of an ASCII PLY whose vertex properties match `names` exactly.
std::vector<std::pair<long, std::vector<std::string>>> ply_rows(const fs::path& path,
                                                                const std::vector<std::string>& names) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  long n = 0;
  std::size_t count = 0;
  bool have_count = false, ascii = false;
  std::vector<std::string> props;
  if (!std::getline(in, line) || line != "ply") throw IoError(path.string(), 1, "not a PLY file");
  ++n;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream ls(line);
    std::string a, b, c;
    ls >> a;
    if (a == "end_header") break;
    if (a == "format") {
      ls >> b;
      ascii = b == "ascii";
    } else if (a == "element") {
      ls >> b >> c;
      if (b != "vertex") throw IoError(path.string(), n, "only a vertex element is supported");
      count = static_cast<std::size_t>(std::stoull(c));
      have_count = true;
    } else if (a == "property") {
      ls >> b >> c;
      props.push_back(c);
    } else if (a != "comment") {
      throw IoError(path.string(), n, "unexpected header line '" + line + "'");
    }
  }
  if (!ascii) throw IoError(path.string(), n, "only ASCII PLY is supported");
  if (!have_count) throw IoError(path.string(), n, "missing vertex element");
  if (props != names) throw IoError(path.string(), n, "unexpected vertex properties");
  std::vector<std::pair<long, std::vector<std::string>>> rows;
  while (rows.size() < count && std::getline(in, line)) {
    ++n;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    if (toks.size() != names.size()) throw IoError(path.string(), n, "wrong number of vertex values");
    rows.emplace_back(n, std::move(toks));
  }
  if (rows.size() != count) throw IoError(path.string(), n, "file ends before all vertices were read");
  return rows;
}

}  // namespace

void write_map_ply(const fs::path& path, const PointMap& map) {
  std::string s = ply_header(map.size(), {{"double", "x"}, {"double", "y"}, {"double", "z"}, {"int", "id"},
                                          {"uint", "label"}, {"double", "weight"}});
  for (const auto& [id, p] : map.points()) {
    if (id > std::numeric_limits<std::int32_t>::max()) throw InvalidArgument("point id does not fit a PLY int");
    s += format_double(p.position.x()) + " " + format_double(p.position.y()) + " " + format_double(p.position.z()) +
         " " + std::to_string(id) + " " + std::to_string(p.label) + " " + format_double(p.weight) + "\n";
  }
  write_text(path, s);
}

PointMap read_map_ply(const fs::path& path) {
  PointMap map;
  for (const auto& [line, t] : ply_rows(path, {"x", "y", "z", "id", "label", "weight"})) {
    LabeledPoint p;
    for (int k = 0; k < 3; ++k) p.position(k) = parse_double({t[static_cast<std::size_t>(k)], line}, path);
    p.id = parse_int<PointId>({t[3], line}, path);
    p.label = parse_int<EntityLabel>({t[4], line}, path);
    p.weight = parse_double({t[5], line}, path);
    try {
      map.set(p);
    } catch (const Error& e) {
      throw IoError(path.string(), line, e.what());
    }
  }
  return map;
}

void write_gt_ply(const fs::path& path, const std::vector<GtCloudPoint>& points) {
  std::string s = ply_header(points.size(), {{"double", "x"}, {"double", "y"}, {"double", "z"}, {"int", "id"},
                                             {"uint", "instance"}, {"int", "class"}});
  for (const auto& p : points)
    s += format_double(p.position.x()) + " " + format_double(p.position.y()) + " " + format_double(p.position.z()) +
         " " + std::to_string(p.id) + " " + std::to_string(p.instance) + " " + std::to_string(p.class_id) + "\n";
  write_text(path, s);
}

std::vector<GtCloudPoint> read_gt_ply(const fs::path& path) {
  std::vector<GtCloudPoint> out;
  for (const auto& [line, t] : ply_rows(path, {"x", "y", "z", "id", "instance", "class"})) {
    GtCloudPoint p;
    for (int k = 0; k < 3; ++k) p.position(k) = parse_double({t[static_cast<std::size_t>(k)], line}, path);
    p.id = parse_int<PointId>({t[3], line}, path);
    p.instance = parse_int<InstanceId>({t[4], line}, path);
    p.class_id = parse_int<int>({t[5], line}, path);
    out.push_back(p);
  }
  return out;
}

namespace {

const char* mode_name(PredicateMode m) { return m == PredicateMode::Single ? "single" : "multi"; }

PredicateMode parse_mode(const std::string& s, const std::string& origin) {
  if (s == "single") return PredicateMode::Single;
  if (s == "multi") return PredicateMode::Multi;
  throw IoError(origin, 0, "mode must be 'single' or 'multi', got '" + s + "'");
}

ojson vec_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

Eigen::VectorXd json_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) v(static_cast<Eigen::Index>(k)) = a[k].get<double>();
  return v;
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(origin, 0, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

std::string gt_graph_json(const GtGraph& g) {
  ojson doc;
  doc["mode"] = mode_name(g.mode);
  doc["node_classes"] = g.node_classes;
  doc["edge_classes"] = g.edge_classes;
  ojson inst = ojson::array();
  for (const auto& [id, cls] : g.instance_class) inst.push_back({{"id", id}, {"class", cls}});
  doc["instances"] = std::move(inst);
  ojson trip = ojson::array();
  for (const auto& t : g.triplets) trip.push_back({{"subject", t.subject}, {"predicate", t.predicate}, {"object", t.object}});
  doc["triplets"] = std::move(trip);
  return doc.dump(2) + "\n";
}

GtGraph parse_gt_graph(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  GtGraph g;
  try {
    g.mode = parse_mode(doc.value("mode", std::string("single")), origin);
    g.node_classes = doc.at("node_classes").get<std::vector<std::string>>();
    g.edge_classes = doc.at("edge_classes").get<std::vector<std::string>>();
    for (const auto& i : doc.at("instances")) g.instance_class[i.at("id").get<InstanceId>()] = i.at("class").get<int>();
    for (const auto& t : doc.at("triplets"))
      g.triplets.push_back({t.at("subject").get<InstanceId>(), t.at("predicate").get<int>(), t.at("object").get<InstanceId>()});
  } catch (const json::exception& e) {
    throw IoError(origin, 0, std::string("malformed GT graph: ") + e.what());
  }
  return g;
}

GroundTruth read_ground_truth(const fs::path& dir) {
  const auto graph_path = dir / "gt_graph.json";
  const GtGraph g = parse_gt_graph(read_text(graph_path), graph_path.string());
  GroundTruth gt;
  gt.instance_class = g.instance_class;
  gt.triplets = g.triplets;
  gt.node_classes = g.node_classes;
  gt.edge_classes = g.edge_classes;
  for (const auto& p : read_gt_ply(dir / "gt_points.ply")) gt.points.push_back({p.position, p.instance});
  try {
    gt.validate();
  } catch (const Error& e) {
    throw IoError(dir.string(), 0, e.what());
  }
  return gt;
}

ExportedGraph ExportedGraph::from(const GlobalSceneGraph& graph, PredicateMode mode) {
  ExportedGraph g;
  g.mode = mode;
  for (const auto& [label, node] : graph.nodes())
    g.nodes.push_back({label, argmax_class(node.belief.probs), node.belief.probs, node.entity.obb, node.belief.weight});
  for (const auto& [key, belief] : graph.edges()) g.edges.push_back({key.first, key.second, belief.probs, belief.weight});
  return g;
}

PredictedGraph ExportedGraph::predicted() const {
  PredictedGraph p;
  p.mode = mode;
  for (const auto& n : nodes) p.node_probs[n.label] = n.class_probs;
  for (const auto& e : edges) p.edge_probs[{e.from, e.to}] = e.pred_probs;
  return p;
}

std::string scene_graph_json(const ExportedGraph& g) {
  ojson doc;
  doc["mode"] = mode_name(g.mode);
  ojson nodes = ojson::array();
  for (const auto& n : g.nodes) {
    ojson obb;
    obb["center"] = {n.obb.center.x(), n.obb.center.y(), n.obb.center.z()};
    obb["dims"] = {n.obb.dims.x(), n.obb.dims.y(), n.obb.dims.z()};
    obb["yaw"] = n.obb.yaw;
    ojson node;
    node["label"] = n.label;
    node["class_id"] = n.class_id;
    node["class_probs"] = vec_json(n.class_probs);
    node["obb"] = std::move(obb);
    node["weight"] = n.weight;
    nodes.push_back(std::move(node));
  }
  ojson edges = ojson::array();
  for (const auto& e : g.edges) {
    ojson edge;
    edge["from"] = e.from;
    edge["to"] = e.to;
    edge["pred_probs"] = vec_json(e.pred_probs);
    edge["weight"] = e.weight;
    edges.push_back(std::move(edge));
  }
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

ExportedGraph parse_scene_graph(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  ExportedGraph g;
  try {
    g.mode = parse_mode(doc.value("mode", std::string("single")), origin);
    for (const auto& n : doc.at("nodes")) {
      ExportedNode node;
      node.label = n.at("label").get<EntityLabel>();
      node.class_id = n.at("class_id").get<int>();
      node.class_probs = json_vec(n.at("class_probs"));
      const auto& obb = n.at("obb");
      for (int k = 0; k < 3; ++k) {
        node.obb.center(k) = obb.at("center").at(static_cast<std::size_t>(k)).get<double>();
        node.obb.dims(k) = obb.at("dims").at(static_cast<std::size_t>(k)).get<double>();
      }
      node.obb.yaw = obb.at("yaw").get<double>();
      node.weight = n.at("weight").get<double>();
      g.nodes.push_back(std::move(node));
    }
    for (const auto& e : doc.at("edges")) {
      ExportedEdge edge;
      edge.from = e.at("from").get<EntityLabel>();
      edge.to = e.at("to").get<EntityLabel>();
      edge.pred_probs = json_vec(e.at("pred_probs"));
      edge.weight = e.at("weight").get<double>();
      g.edges.push_back(std::move(edge));
    }
  } catch (const json::exception& e) {
    throw IoError(origin, 0, std::string("malformed scene graph: ") + e.what());
  }
  return g;
}

std::string scene_graph_dot(const ExportedGraph& g, const std::vector<std::string>& node_classes,
                            const std::vector<std::string>& edge_classes) {
  auto name = [](const std::vector<std::string>& names, int id) {
    return id >= 0 && static_cast<std::size_t>(id) < names.size() ? names[static_cast<std::size_t>(id)]
                                                                   : std::to_string(id);
  };
  std::string s = "digraph scene_graph {\n  node [shape=box];\n";
  for (const auto& n : g.nodes)
    s += "  n" + std::to_string(n.label) + " [label=\"" + std::to_string(n.label) + ": " + name(node_classes, n.class_id) +
         "\"];\n";
  for (const auto& e : g.edges) {
    const int cls = argmax_class(e.pred_probs);
    if (g.mode == PredicateMode::Single && cls == 0) continue;  // "none"
    s += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" + name(edge_classes, cls) +
         "\"];\n";
  }
  return s + "}\n";
}

std::map<std::string, double> parse_metrics(const std::string& text, const std::string& origin) {
  const json doc = parse_json(text, origin);
  if (!doc.is_object()) throw IoError(origin, 0, "metrics must be a JSON object");
  std::map<std::string, double> out;
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_number()) throw IoError(origin, 0, "metric '" + k + "' is not a number");
    out[k] = v.get<double>();
  }
  return out;
}

StageStats summarize(std::vector<double> samples_ms) {
  StageStats s;
  s.count = samples_ms.size();
  if (samples_ms.empty()) return s;
  std::sort(samples_ms.begin(), samples_ms.end());
  double total = 0.0;
  for (double v : samples_ms) total += v;
  s.mean_ms = total / static_cast<double>(samples_ms.size());
  auto rank = [&](double q) {
    const auto n = samples_ms.size();
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    idx = std::clamp<std::size_t>(idx, 1, n);
    return samples_ms[idx - 1];
  };
  s.p50_ms = rank(0.50);
  s.p90_ms = rank(0.90);
  s.p99_ms = rank(0.99);
  return s;
}

std::string timings_json(const std::map<std::string, StageStats>& stages) {
  ojson doc = ojson::object();
  for (const auto& [name, s] : stages)
    doc[name] = {{"count", s.count}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p90_ms", s.p90_ms}, {"p99_ms", s.p99_ms}};
  return doc.dump(2) + "\n";
}

std::string frame_stem(std::size_t index) {
  std::ostringstream ss;
  ss << std::setw(6) << std::setfill('0') << index;
  return ss.str();
}

}  // namespace isg::io
