#include "isg/sequence.hpp"

#include <algorithm>

namespace isg {

namespace fs = std::filesystem;

SequenceReader::SequenceReader(const fs::path& dir) : dir_(dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string(), 0, "sequence directory does not exist");
  intrinsics_ = io::read_intrinsics(dir / "intrinsics.txt");
  const fs::path frames = dir / "frames";
  if (!fs::is_directory(frames)) throw IoError(frames.string(), 0, "missing frames directory");
  for (const auto& entry : fs::directory_iterator(frames)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 5 && name.ends_with(".pose")) stems_.push_back(name.substr(0, name.size() - 5));
  }
  std::sort(stems_.begin(), stems_.end());
  if (stems_.empty()) throw IoError(frames.string(), 0, "no .pose files found");
}

Frame SequenceReader::frame(std::size_t i) const {
  if (i >= stems_.size()) throw InvalidArgument("frame index out of range");
  const fs::path base = dir_ / "frames" / stems_[i];
  auto with = [&](const char* ext) { return fs::path(base.string() + ext); };
  Frame f;
  f.index = i;
  f.pose = io::read_pose(with(".pose"));
  if (fs::exists(with(".points"))) f.points = io::read_points(with(".points"));
  const bool has_labels = fs::exists(with(".labels.pgm")), has_conf = fs::exists(with(".conf.pgm"));
  if (has_labels != has_conf)
    throw IoError(base.string(), 0, "labels.pgm and conf.pgm must be present together");
  if (has_labels) {
    f.labels = io::read_label_mask(with(".labels.pgm"));
    f.confidence = io::read_confidence_mask(with(".conf.pgm"));
    if (!f.labels->same_shape(*f.confidence))
      throw IoError(with(".conf.pgm").string(), 0, "confidence mask size differs from the label mask");
    if (f.labels->width() != intrinsics_.width || f.labels->height() != intrinsics_.height)
      throw IoError(with(".labels.pgm").string(), 0, "mask size differs from the intrinsics");
  }
  if (fs::exists(with(".feat"))) f.features = io::read_features(with(".feat"));
  if (fs::exists(with(".ppm"))) {
    f.image = io::read_ppm(with(".ppm"));
    if (f.image->width() != intrinsics_.width || f.image->height() != intrinsics_.height)
      throw IoError(with(".ppm").string(), 0, "image size differs from the intrinsics");
  }
  return f;
}

void write_frame(const fs::path& dir, const Frame& frame) {
  const fs::path frames = dir / "frames";
  fs::create_directories(frames);
  const std::string base = (frames / io::frame_stem(frame.index)).string();
  io::write_pose(base + ".pose", frame.pose);
  io::write_points(base + ".points", frame.points);
  if (frame.labels) io::write_label_mask(base + ".labels.pgm", *frame.labels);
  if (frame.confidence) io::write_confidence_mask(base + ".conf.pgm", *frame.confidence);
  if (frame.features) io::write_features(base + ".feat", *frame.features);
  if (frame.image) io::write_ppm(base + ".ppm", *frame.image);
}

}  // namespace isg
