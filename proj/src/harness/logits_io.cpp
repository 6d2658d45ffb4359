#include "msdeaot/harness/logits_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "msdeaot/errors.hpp"

namespace fs = std::filesystem;

namespace msd {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'L', 'G'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("truncated logits file: " + path);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string logits_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "logits_%04d.mslg", t);
  return buf;
}

}  // namespace

void save_logits(const std::string& path, const MaskLogits& logits) {
  if (logits.rank() != 3)
    throw DimensionError("save_logits expects h x w x channels, got " +
                         logits.shape_string());
  for (float v : logits.data())
    if (!std::isfinite(v)) throw ArgumentError("non-finite logits cannot be saved");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(logits.dim(0)));
  write_u32(os, static_cast<std::uint32_t>(logits.dim(1)));
  write_u32(os, static_cast<std::uint32_t>(logits.dim(2)));
  os.write(reinterpret_cast<const char*>(logits.data().data()),
           static_cast<std::streamsize>(logits.size() * sizeof(float)));
  if (!os) throw FormatError("failed writing " + path);
}

MaskLogits load_logits(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in logits file: " + path);
  if (read_u32(is, path) != kVersion)
    throw FormatError("unsupported logits version in " + path);
  const int h = static_cast<int>(read_u32(is, path));
  const int w = static_cast<int>(read_u32(is, path));
  const int c = static_cast<int>(read_u32(is, path));
  if (h < 1 || w < 1 || c < 1) throw FormatError("bad dimensions in " + path);
  std::vector<float> payload(static_cast<std::size_t>(h) * w * c);
  if (!is.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload.size() * sizeof(float))))
    throw FormatError("truncated logits payload in " + path);
  return MaskLogits({h, w, c}, std::move(payload));
}

void save_logits_dir(const std::vector<MaskLogits>& logits, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < logits.size(); ++t)
    save_logits((fs::path(dir) / logits_name(static_cast<int>(t))).string(), logits[t]);
}

std::vector<MaskLogits> load_logits_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a logits directory: " + dir);
  std::vector<MaskLogits> out;
  for (int t = 0;; ++t) {
    const fs::path p = fs::path(dir) / logits_name(t);
    if (!fs::exists(p)) break;
    out.push_back(load_logits(p.string()));
  }
  if (out.empty()) throw FormatError("no logits found in " + dir);
  return out;
}

}  // namespace msd
