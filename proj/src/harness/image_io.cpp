#include "msdeaot/harness/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "msdeaot/errors.hpp"

namespace msd {

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& is, const std::string& path) {
  std::string tok;
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (std::isspace(c)) {
      c = is.get();
    } else {
      break;
    }
  }
  if (c == EOF) throw FormatError("unexpected end of header in " + path);
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = is.get();
  }
  return tok;
}

int parse_dim(const std::string& tok, const std::string& path) {
  try {
    const int v = std::stoi(tok);
    if (v < 1) throw FormatError("non-positive dimension in " + path);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("malformed header token '" + tok + "' in " + path);
  }
}

struct PnmHeader {
  int w = 0, h = 0;
};

PnmHeader read_header(std::istream& is, const std::string& expected_magic,
                      const std::string& path) {
  const std::string magic = next_token(is, path);
  if (magic != expected_magic)
    throw FormatError("expected " + expected_magic + " magic in " + path + ", got '" +
                      magic + "'");
  PnmHeader hdr;
  hdr.w = parse_dim(next_token(is, path), path);
  hdr.h = parse_dim(next_token(is, path), path);
  const int maxval = parse_dim(next_token(is, path), path);
  if (maxval != 255) throw FormatError("only maxval 255 supported, file " + path);
  return hdr;
}

unsigned char quantize(float v) {
  const float clamped = std::min(std::max(v, 0.0f), 1.0f);
  return static_cast<unsigned char>(std::lround(clamped * 255.0f));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw DimensionError("write_ppm expects h x w x 3, got " + image.shape_string());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << "P6\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.dim(1)) * 3);
  for (int y = 0; y < image.dim(0); ++y) {
    for (int x = 0; x < image.dim(1); ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<std::size_t>(x) * 3 + c] = quantize(image.at(y, x, c));
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw FormatError("failed writing " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  const PnmHeader hdr = read_header(is, "P6", path);
  Tensor out({hdr.h, hdr.w, 3});
  std::vector<unsigned char> payload(static_cast<std::size_t>(hdr.h) * hdr.w * 3);
  if (!is.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload.size())))
    throw FormatError("truncated PPM payload in " + path);
  for (std::size_t i = 0; i < payload.size(); ++i)
    out.data()[i] = static_cast<float>(payload[i]) / 255.0f;
  return out;
}

void write_pgm(const std::string& path, const LabelMask& mask) {
  for (int v : mask.labels)
    if (v < 0 || v > 255)
      throw LabelError("label " + std::to_string(v) + " out of PGM range in " + path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os << "P5\n" << mask.w << " " << mask.h << "\n255\n";
  std::vector<unsigned char> payload(mask.labels.size());
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<unsigned char>(mask.labels[i]);
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
  if (!os) throw FormatError("failed writing " + path);
}

LabelMask read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  const PnmHeader hdr = read_header(is, "P5", path);
  LabelMask out(hdr.h, hdr.w);
  std::vector<unsigned char> payload(static_cast<std::size_t>(hdr.h) * hdr.w);
  if (!is.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(payload.size())))
    throw FormatError("truncated PGM payload in " + path);
  for (std::size_t i = 0; i < payload.size(); ++i) out.labels[i] = payload[i];
  return out;
}

}  // namespace msd
