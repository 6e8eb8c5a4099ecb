#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <queue>
#include <random>

#include "siamtrack/dataset.hpp"
#include "siamtrack/errors.hpp"
#include "siamtrack/image.hpp"
#include "siamtrack/synthetic.hpp"
#include "temp_dir.hpp"

namespace siamtrack::data {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

// --- boxes and images ----------------------------------------------------

TEST(Iou, KnownValuesAndBounds) {
  const Box a{0, 0, 2, 2}, b{1, 1, 2, 2};
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, {5, 5, 1, 1}), 0.0);
  EXPECT_EQ(iou(a, {2, 0, 2, 2}), 0.0);  // touching edges
  EXPECT_EQ(iou(a, {0, 0, 0, 0}), 0.0);
  const Box odd{0.1, 0.7, 0.3, 1e-3};
  EXPECT_EQ(iou(odd, odd), 1.0);
  // x + w - x rounds below w for these.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int i = 0; i < 1000; ++i) {
    const Box r{u(rng), u(rng), 1.0 + u(rng) / 7.0, 1.0 + u(rng) / 3.0};
    ASSERT_EQ(iou(r, r), 1.0);
  }
}

TEST(Image, CropResampleIdentityAndFill) {
  Image im(8, 6);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 8; ++x) im.at(x, y) = static_cast<double>(10 * y + x);
  // A crop covering pixels 2..5 in both axes at unit scale reproduces them.
  const Image c = crop_resample(im, 4.0, 4.0, 4.0, 4, -1.0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) EXPECT_DOUBLE_EQ(c.at(x, y), im.at(x + 2, y + 2));
  const Image far = crop_resample(im, 100.0, 100.0, 4.0, 3, -1.0);
  for (const double v : far.pixels()) EXPECT_EQ(v, -1.0);
}

void write_ppm(const fs::path& p, const char* magic, int w, int h, int maxval, const std::vector<int>& samples) {
  std::ofstream out(p, std::ios::binary);
  out << magic << "\n" << w << " " << h << "\n" << maxval << "\n";
  for (const int s : samples) {
    if (maxval > 255) out.put(static_cast<char>(s >> 8));
    out.put(static_cast<char>(s & 0xff));
  }
}

TEST(Image, LoadsColourAsChannelMeanAndSixteenBit) {
  TempDir dir("img");
  write_ppm(dir / "c.ppm", "P6", 2, 1, 255, {255, 0, 0, 30, 60, 90});
  const Image c = load_image(dir / "c.ppm");
  ASSERT_EQ(c.width(), 2u);
  EXPECT_NEAR(c.at(0, 0), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.at(1, 0), 60.0 / 255.0, 1e-12);

  write_ppm(dir / "d.pgm", "P5", 2, 1, 65535, {65535, 1000});
  const Image d = load_image(dir / "d.pgm");
  EXPECT_NEAR(d.at(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(d.at(1, 0), 1000.0 / 65535.0, 1e-12);

  EXPECT_THROW(load_image(dir / "missing.png"), IoError);
}

// --- box files and sequences ---------------------------------------------

TEST(Boxes, ParseSeparators) {
  TempDir dir("boxes");
  std::ofstream(dir / "g.txt") << "1,2,3,4\n5\t6\t7\t8\n9 10 11 12\n\n";
  const auto boxes = read_boxes(dir / "g.txt");
  ASSERT_EQ(boxes.size(), 3u);
  EXPECT_EQ(boxes[1], (Box{5, 6, 7, 8}));
  EXPECT_EQ(boxes[2], (Box{9, 10, 11, 12}));
  std::ofstream(dir / "bad.txt") << "1,2,3\n";
  EXPECT_THROW(read_boxes(dir / "bad.txt"), IoError);
}

TEST(Dataset, RoundTripAndAttributes) {
  SyntheticConfig sc;
  sc.sequences = 2;
  sc.frames = 4;
  sc.width = 64;
  sc.height = 48;
  sc.sigma_min = 2;
  sc.sigma_max = 4;
  const auto ds = gen_synthetic(sc);
  TempDir dir("ds");
  save_dataset(ds, dir.path());
  std::ofstream(dir / "synth002" / "attributes.txt") << "occlusion, camera_motion\n";

  const auto back = load_dataset(dir.path());
  ASSERT_EQ(back.sequences.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& a = ds.sequences[s];
    const auto& b = back.sequences[s];
    EXPECT_EQ(a.name, b.name);
    ASSERT_EQ(b.size(), 4u);
    for (std::size_t f = 0; f < 4; ++f) {
      EXPECT_NEAR(a.boxes[f].x, b.boxes[f].x, 5e-5);
      EXPECT_NEAR(a.boxes[f].h, b.boxes[f].h, 5e-5);
      const Image ia = a.frame(f), ib = b.frame(f);
      for (std::size_t i = 0; i < ia.pixels().size(); ++i) ASSERT_EQ(ia.pixels()[i], ib.pixels()[i]);
    }
  }
  EXPECT_TRUE(back.sequences[0].tags.empty());
  ASSERT_EQ(back.sequences[1].tags.size(), 4u);
  EXPECT_EQ(back.sequences[1].tags[3], (std::vector<std::string>{"occlusion", "camera_motion"}));

  // A single sequence directory loads on its own.
  EXPECT_EQ(load_dataset(dir / "synth001").sequences.size(), 1u);

  // Count mismatch names the sequence.
  auto boxes = read_boxes(dir / "synth001" / "groundtruth.txt");
  boxes.pop_back();
  write_boxes(dir / "synth001" / "groundtruth.txt", boxes);
  try {
    load_dataset(dir.path());
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("synth001"), std::string::npos);
  }
}

// --- synthetic generator -------------------------------------------------

TEST(Synthetic, SeededDeterminism) {
  SyntheticConfig sc;
  sc.sequences = 2;
  sc.frames = 5;
  const auto a = gen_synthetic(sc), b = gen_synthetic(sc);
  sc.seed = 8;
  const auto c = gen_synthetic(sc);
  bool differs = false;
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t f = 0; f < 5; ++f) {
      EXPECT_EQ(a.sequences[s].boxes[f], b.sequences[s].boxes[f]);
      const auto pa = a.sequences[s].images[f].pixels(), pb = b.sequences[s].images[f].pixels();
      EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
      differs = differs || !(a.sequences[s].boxes[f] == c.sequences[s].boxes[f]);
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Synthetic, FramesAreEightBitAndBoxesInside) {
  SyntheticConfig sc;
  sc.sequences = 3;
  sc.frames = 50;
  const auto ds = gen_synthetic(sc);
  EXPECT_EQ(ds.source, Source::kSynthetic);
  for (const auto& seq : ds.sequences) {
    ASSERT_EQ(seq.size(), 50u);
    for (std::size_t f = 0; f < seq.size(); ++f) {
      const Box& b = seq.boxes[f];
      EXPECT_GE(b.x, 0.0);
      EXPECT_GE(b.y, 0.0);
      EXPECT_LE(b.x + b.w, static_cast<double>(sc.width) + 1e-9);
      EXPECT_LE(b.y + b.h, static_cast<double>(sc.height) + 1e-9);
      for (const double v : seq.images[f].pixels()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        ASSERT_EQ(static_cast<double>(std::lround(v * 255.0)) * (1.0 / 255.0), v);
      }
    }
  }
}

std::size_t bright_components(const Image& im, double threshold) {
  const std::size_t w = im.width(), h = im.height();
  std::vector<char> seen(w * h, 0);
  std::size_t count = 0;
  for (std::size_t start = 0; start < w * h; ++start) {
    if (seen[start] || im.pixels()[start] <= threshold) continue;
    ++count;
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop();
      const long x = static_cast<long>(p % w), y = static_cast<long>(p / w);
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          const long nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
          const auto n = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          if (!seen[n] && im.pixels()[n] > threshold) {
            seen[n] = 1;
            q.push(n);
          }
        }
      }
    }
  }
  return count;
}

TEST(Synthetic, SingleBlobWithoutDistractors) {
  SyntheticConfig sc;
  sc.sequences = 5;
  sc.frames = 100;
  sc.distractors = 0;
  const auto ds = gen_synthetic(sc);
  // Halfway between the brightest possible background (level + texture +
  // 5 sigma noise) and the dimmest possible target peak; 8-connected regions.
  const double background_max = sc.background_level + sc.background_amplitude + 5 * sc.noise_sigma;
  const double target_min = sc.background_level + sc.target_amplitude_min;
  ASSERT_LT(background_max, target_min);
  const double threshold = 0.5 * (background_max + target_min);
  for (const auto& seq : ds.sequences) {
    for (std::size_t f = 0; f < seq.size(); ++f) {
      const Image& im = seq.images[f];
      EXPECT_EQ(bright_components(im, threshold), 1u) << seq.name << " frame " << f;
      const auto px = im.pixels();
      const auto peak = static_cast<std::size_t>(std::max_element(px.begin(), px.end()) - px.begin());
      const double x = static_cast<double>(peak % im.width()) + 0.5, y = static_cast<double>(peak / im.width()) + 0.5;
      const Box& b = seq.boxes[f];
      EXPECT_TRUE(x >= b.x && x <= b.x + b.w && y >= b.y && y <= b.y + b.h) << seq.name << " frame " << f;
    }
  }
}

TEST(Synthetic, RejectsFramesTooSmall) {
  SyntheticConfig sc;
  sc.width = 20;
  sc.height = 20;
  EXPECT_THROW(gen_synthetic(sc), ConfigError);
}

}  // namespace
}  // namespace siamtrack::data
