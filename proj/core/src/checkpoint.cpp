#include "siamtrack/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "siamtrack/errors.hpp"

namespace siamtrack::ckpt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_hex(std::span<const unsigned char> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::vector<LayerEntry> layer_table(SiameseModel& model) {
  std::vector<LayerEntry> out;
  for (const auto& e : model.state()) out.push_back({e.name, e.tensor->shape()});
  return out;
}

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p, int bytes = 8) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

constexpr std::size_t kHeader = sizeof kMagic + 4 + 8;

std::vector<unsigned char> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json shape_json(const Shape& s) { return json::array({s.n, s.h, s.w, s.c}); }

}  // namespace

std::vector<unsigned char> encode_blob(SiameseModel& model) {
  const auto state = model.state();
  std::size_t count = 0;
  for (const auto& e : state) count += e.tensor->size();

  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeader + 8 * count);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(kFormatVersion >> (8 * i)));
  put_u64(out, count);
  for (const auto& e : state)
    for (double v : e.tensor->values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Manifest save(SiameseModel& model, Manifest meta, const fs::path& stem) {
  const auto blob = encode_blob(model);
  fs::path blob_path = stem;
  blob_path += ".bin";
  fs::path manifest_path = stem;
  manifest_path += ".json";

  meta.format_version = kFormatVersion;
  meta.preset = model.config().preset;
  meta.layers = layer_table(model);
  meta.blob = blob_path.filename().string();
  meta.blob_sha256 = sha256_hex(blob);
  if (meta.created.empty()) meta.created = utc_now();

  {
    std::ofstream out(blob_path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("cannot write " + blob_path.string());
  }

  json layers = json::array();
  for (const auto& l : meta.layers) layers.push_back({{"name", l.name}, {"shape", shape_json(l.shape)}});
  const json j = {{"format_version", meta.format_version},
                  {"preset", meta.preset},
                  {"epoch", meta.epoch},
                  {"train_loss", meta.train_loss},
                  {"seed", meta.seed},
                  {"created", meta.created},
                  {"blob", meta.blob},
                  {"blob_sha256", meta.blob_sha256},
                  {"layers", layers},
                  {"config", meta.config}};
  std::ofstream out(manifest_path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + manifest_path.string());
  return meta;
}

Manifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  Manifest m;
  try {
    const json j = json::parse(in);
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.preset = j.at("preset").get<std::string>();
    m.epoch = j.at("epoch").get<std::size_t>();
    m.train_loss = j.at("train_loss").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.created = j.at("created").get<std::string>();
    m.blob = j.at("blob").get<std::string>();
    m.blob_sha256 = j.at("blob_sha256").get<std::string>();
    m.config = j.value("config", std::string());
    for (const auto& l : j.at("layers")) {
      const auto s = l.at("shape");
      m.layers.push_back({l.at("name").get<std::string>(),
                          Shape{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                                s.at(2).get<std::size_t>(), s.at(3).get<std::size_t>()}});
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (m.format_version != kFormatVersion) {
    throw IoError("manifest " + manifest_path.string() + ": unsupported format_version " +
                  std::to_string(m.format_version));
  }
  return m;
}

Manifest load(SiameseModel& model, const fs::path& manifest_path) {
  Manifest m = read_manifest(manifest_path);

  if (m.preset != model.config().preset) {
    throw ShapeError("checkpoint preset '" + m.preset + "' does not match model preset '" +
                     model.config().preset + "'");
  }
  const auto expected = layer_table(model);
  if (m.layers.size() != expected.size()) {
    throw ShapeError("checkpoint has " + std::to_string(m.layers.size()) + " layers, model expects " +
                     std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!(m.layers[i] == expected[i])) {
      throw ShapeError("checkpoint layer " + m.layers[i].name + " " + to_string(m.layers[i].shape) +
                       " does not match model layer " + expected[i].name + " " + to_string(expected[i].shape));
    }
  }

  const fs::path blob_path = manifest_path.parent_path() / m.blob;
  const auto blob = read_file(blob_path);
  if (sha256_hex(blob) != m.blob_sha256) throw IoError("checksum mismatch for " + blob_path.string());
  if (blob.size() < kHeader || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError("bad magic in " + blob_path.string());
  }
  if (get_u64(blob.data() + sizeof kMagic, 4) != kFormatVersion) {
    throw IoError("unsupported blob version in " + blob_path.string());
  }
  std::size_t count = 0;
  for (const auto& l : expected) count += l.shape.size();
  if (get_u64(blob.data() + sizeof kMagic + 4) != count || blob.size() != kHeader + 8 * count) {
    throw IoError("blob size does not match layer table in " + blob_path.string());
  }

  const unsigned char* p = blob.data() + kHeader;
  for (const auto& e : model.state()) {
    for (double& v : e.tensor->values()) {
      v = std::bit_cast<double>(get_u64(p));
      p += 8;
    }
  }
  return m;
}

}  // namespace siamtrack::ckpt
