#include "siamtrack/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "siamtrack/errors.hpp"

namespace siamtrack::data {

namespace fs = std::filesystem;

Image Sequence::frame(std::size_t i) const {
  if (!images.empty()) return images.at(i);
  if (i >= frame_paths.size()) {
    throw IoError("sequence " + name + ": frame " + std::to_string(i + 1) + " out of range");
  }
  try {
    return load_image(frame_paths[i]);
  } catch (const IoError& e) {
    throw IoError("sequence " + name + ": frame " + std::to_string(i + 1) + ": " + e.what());
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<Box> read_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Box> boxes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == '\t'; }, ' ');
    std::istringstream ss(line);
    Box b;
    if (!(ss >> b.x >> b.y >> b.w >> b.h)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected x,y,w,h");
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::string format_box(const Box& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f", b.x, b.y, b.w, b.h);
  return buf;
}

void write_boxes(const fs::path& path, const std::vector<Box>& boxes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Box& b : boxes) out << format_box(b) << '\n';
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  static const char* const kExt[] = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".pgm"};
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(std::begin(kExt), std::end(kExt), ext) != std::end(kExt)) frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());
  return frames;
}

Sequence load_sequence(const fs::path& dir) {
  Sequence seq;
  seq.name = dir.filename().string();
  const fs::path gt = dir / "groundtruth.txt";
  if (!fs::exists(gt)) throw IoError("sequence " + seq.name + ": missing groundtruth.txt");
  seq.boxes = read_boxes(gt);
  seq.frame_paths = list_frames(dir);
  if (seq.frame_paths.size() != seq.boxes.size()) {
    throw IoError("sequence " + seq.name + ": " + std::to_string(seq.frame_paths.size()) +
                  " frames but " + std::to_string(seq.boxes.size()) + " groundtruth boxes");
  }
  const fs::path attr = dir / "attributes.txt";
  if (fs::exists(attr)) {
    std::ifstream in(attr);
    std::vector<std::vector<std::string>> lines;
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> tags;
      std::istringstream ss(line);
      std::string tag;
      while (std::getline(ss, tag, ',')) {
        tag = trim(tag);
        if (!tag.empty()) tags.push_back(tag);
      }
      lines.push_back(std::move(tags));
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() == 1) {
      seq.tags.assign(seq.boxes.size(), lines.front());
    } else if (lines.size() == seq.boxes.size()) {
      seq.tags = std::move(lines);
    } else if (!lines.empty()) {
      throw IoError("sequence " + seq.name + ": attributes.txt has " + std::to_string(lines.size()) +
                    " lines for " + std::to_string(seq.boxes.size()) + " frames");
    }
  }
  return seq;
}

SequenceDataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset path " + root.string() + " is not a directory");
  SequenceDataset ds;
  ds.source = Source::kDisk;
  if (fs::exists(root / "groundtruth.txt")) {
    ds.sequences.push_back(load_sequence(root));
    return ds;
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.txt")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) ds.sequences.push_back(load_sequence(d));
  if (ds.sequences.empty()) throw IoError("dataset " + root.string() + " contains no sequences");
  return ds;
}

void save_dataset(const SequenceDataset& ds, const fs::path& root) {
  fs::create_directories(root);
  for (const Sequence& seq : ds.sequences) {
    const fs::path dir = root / seq.name;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%08zu.png", i + 1);
      save_png(seq.frame(i), dir / name);
    }
    write_boxes(dir / "groundtruth.txt", seq.boxes);
  }
}

}  // namespace siamtrack::data
