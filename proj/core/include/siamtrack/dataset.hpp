#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "siamtrack/image.hpp"

namespace siamtrack::data {

/// One annotated sequence. Frames live either on disk (`frame_paths`) or in
/// memory (`images`); exactly one of the two is populated.
struct Sequence {
  std::string name;
  std::vector<std::filesystem::path> frame_paths;
  std::vector<Image> images;
  std::vector<Box> boxes;
  /// Per-frame attribute tags (may be empty).
  std::vector<std::vector<std::string>> tags;

  std::size_t size() const { return boxes.size(); }
  Image frame(std::size_t i) const;
};

enum class Source { kDisk, kSynthetic };

struct SequenceDataset {
  std::vector<Sequence> sequences;
  Source source = Source::kDisk;

  bool empty() const { return sequences.empty(); }
};

/// Boxes as `x,y,w,h` per line; commas, tabs or spaces separate fields.
std::vector<Box> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path, const std::vector<Box>& boxes);
std::string format_box(const Box& b);

/// Frame image files of a sequence directory, sorted by file name.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// A single sequence directory: frames plus groundtruth.txt, optional
/// attributes.txt (one comma-separated tag list per frame, or a single line
/// applying to every frame). Throws IoError naming the sequence on a
/// frame / box count mismatch.
Sequence load_sequence(const std::filesystem::path& dir);

/// A dataset root holding one directory per sequence, or a single sequence
/// directory.
SequenceDataset load_dataset(const std::filesystem::path& root);

/// Writes frames as 00000001.png ... and groundtruth.txt under root/<name>.
void save_dataset(const SequenceDataset& ds, const std::filesystem::path& root);

}  // namespace siamtrack::data
