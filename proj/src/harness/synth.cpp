#include "msdeaot/harness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "msdeaot/errors.hpp"
#include "msdeaot/harness/image_io.hpp"
#include "msdeaot/rng.hpp"

namespace fs = std::filesystem;

namespace msd {

namespace {

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", t);
  return buf;
}

std::string mask_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%04d.pgm", t);
  return buf;
}

bool inside_canvas(const ShapeSpec& s, int h, int w) {
  if (s.kind == ShapeSpec::Kind::kRectangle)
    return s.x >= 0 && s.y >= 0 && s.x + s.width <= w && s.y + s.height <= h;
  const double r = s.width / 2.0;
  return s.x - r >= 0 && s.y - r >= 0 && s.x + r <= w && s.y + r <= h;
}

void draw_shape(Tensor& frame, LabelMask& mask, const ShapeSpec& s, int label) {
  const int h = frame.dim(0), w = frame.dim(1);
  auto paint = [&](int y, int x) {
    for (int c = 0; c < 3; ++c)
      frame.at(y, x, c) = static_cast<float>(s.color[static_cast<std::size_t>(c)]) / 255.0f;
    mask.at(y, x) = label;
  };
  if (s.kind == ShapeSpec::Kind::kRectangle) {
    const int x0 = static_cast<int>(std::lround(s.x));
    const int y0 = static_cast<int>(std::lround(s.y));
    for (int y = std::max(0, y0); y < std::min(h, y0 + s.height); ++y)
      for (int x = std::max(0, x0); x < std::min(w, x0 + s.width); ++x) paint(y, x);
  } else {
    const double r = s.width / 2.0;
    const int y0 = std::max(0, static_cast<int>(std::floor(s.y - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(s.y + r)));
    const int x0 = std::max(0, static_cast<int>(std::floor(s.x - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.x + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dy = y + 0.5 - s.y, dx = x + 0.5 - s.x;
        if (dy * dy + dx * dx <= r * r) paint(y, x);
      }
  }
}

// Advance with border reflection: the shape never leaves the canvas.
void step_shape(ShapeSpec& s, int h, int w) {
  double lo_x, hi_x, lo_y, hi_y;
  if (s.kind == ShapeSpec::Kind::kRectangle) {
    lo_x = 0;
    hi_x = w - s.width;
    lo_y = 0;
    hi_y = h - s.height;
  } else {
    const double r = s.width / 2.0;
    lo_x = r;
    hi_x = w - r;
    lo_y = r;
    hi_y = h - r;
  }
  s.x += s.vx;
  s.y += s.vy;
  if (s.x < lo_x) { s.x = lo_x; s.vx = -s.vx; }
  if (s.x > hi_x) { s.x = hi_x; s.vx = -s.vx; }
  if (s.y < lo_y) { s.y = lo_y; s.vy = -s.vy; }
  if (s.y > hi_y) { s.y = hi_y; s.vy = -s.vy; }
}

}  // namespace

void randomize_shapes(SyntheticSceneConfig& cfg, int count) {
  Rng rng(cfg.seed);
  cfg.shapes.clear();
  for (int i = 0; i < count; ++i) {
    ShapeSpec s;
    s.kind = rng.uniform_int(0, 1) == 0 ? ShapeSpec::Kind::kRectangle
                                        : ShapeSpec::Kind::kDisk;
    s.width = rng.uniform_int(12, std::max(13, cfg.w / 3));
    s.height = s.kind == ShapeSpec::Kind::kRectangle
                   ? rng.uniform_int(12, std::max(13, cfg.h / 3))
                   : s.width;
    const int margin_x = s.kind == ShapeSpec::Kind::kRectangle ? s.width : s.width / 2 + 1;
    const int margin_y = s.kind == ShapeSpec::Kind::kRectangle ? s.height : s.width / 2 + 1;
    s.x = rng.uniform_int(s.kind == ShapeSpec::Kind::kDisk ? margin_x : 0,
                          cfg.w - margin_x);
    s.y = rng.uniform_int(s.kind == ShapeSpec::Kind::kDisk ? margin_y : 0,
                          cfg.h - margin_y);
    s.vx = rng.uniform_int(-2, 2);
    s.vy = rng.uniform_int(-2, 2);
    // Bright, mutually distinct colors; background stays dark gray.
    s.color = {static_cast<std::uint8_t>(rng.uniform_int(100, 255)),
               static_cast<std::uint8_t>(rng.uniform_int(100, 255)),
               static_cast<std::uint8_t>(rng.uniform_int(100, 255))};
    cfg.shapes.push_back(s);
  }
}

SequenceFrames render_sequence(const SyntheticSceneConfig& cfg) {
  if (cfg.frames < 1) throw ArgumentError("sequence needs at least one frame");
  if (cfg.shapes.empty()) throw ArgumentError("scene has no shapes");
  if (static_cast<int>(cfg.shapes.size()) > cfg.max_objects)
    throw CapacityError("scene has " + std::to_string(cfg.shapes.size()) +
                        " shapes but only " + std::to_string(cfg.max_objects) +
                        " identity slots");
  for (const auto& s : cfg.shapes)
    if (!inside_canvas(s, cfg.h, cfg.w))
      throw ArgumentError("shape not fully inside canvas at frame 0");

  SequenceFrames out;
  std::vector<ShapeSpec> shapes = cfg.shapes;
  for (int t = 0; t < cfg.frames; ++t) {
    Tensor frame({cfg.h, cfg.w, 3});
    for (int y = 0; y < cfg.h; ++y)
      for (int x = 0; x < cfg.w; ++x)
        for (int c = 0; c < 3; ++c)
          frame.at(y, x, c) =
              static_cast<float>(cfg.background[static_cast<std::size_t>(c)]) / 255.0f;
    LabelMask mask(cfg.h, cfg.w);
    for (std::size_t i = 0; i < shapes.size(); ++i)
      draw_shape(frame, mask, shapes[i], static_cast<int>(i) + 1);
    out.frames.push_back(std::move(frame));
    out.masks.push_back(std::move(mask));
    for (auto& s : shapes) step_shape(s, cfg.h, cfg.w);
  }
  return out;
}

void generate_sequence(const SyntheticSceneConfig& cfg, const std::string& dir) {
  const SequenceFrames seq = render_sequence(cfg);
  fs::create_directories(dir);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    write_ppm((fs::path(dir) / frame_name(static_cast<int>(t))).string(), seq.frames[t]);
    write_pgm((fs::path(dir) / mask_name(static_cast<int>(t))).string(), seq.masks[t]);
  }
}

SequenceFrames load_sequence(const std::string& dir, int max_objects) {
  if (!fs::is_directory(dir)) throw FormatError("not a sequence directory: " + dir);
  SequenceFrames out;
  for (int t = 0;; ++t) {
    const fs::path fp = fs::path(dir) / frame_name(t);
    const fs::path mp = fs::path(dir) / mask_name(t);
    if (!fs::exists(fp)) {
      if (fs::exists(mp)) throw FormatError("mask without frame: " + mp.string());
      break;
    }
    if (!fs::exists(mp)) throw FormatError("frame without mask: " + fp.string());
    out.frames.push_back(read_ppm(fp.string()));
    out.masks.push_back(read_pgm(mp.string()));
  }
  if (out.frames.empty()) throw FormatError("no frames found in " + dir);
  const int h = out.frames[0].dim(0), w = out.frames[0].dim(1);
  for (std::size_t t = 0; t < out.frames.size(); ++t) {
    if (out.frames[t].dim(0) != h || out.frames[t].dim(1) != w ||
        out.masks[t].h != h || out.masks[t].w != w)
      throw FormatError("inconsistent frame/mask dimensions in " + dir + " at index " +
                        std::to_string(t));
    for (int v : out.masks[t].labels)
      if (v > max_objects)
        throw LabelError("mask label " + std::to_string(v) + " exceeds capacity " +
                         std::to_string(max_objects) + " in " + dir);
  }
  return out;
}

void save_masks(const std::vector<LabelMask>& masks, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < masks.size(); ++t)
    write_pgm((fs::path(dir) / mask_name(static_cast<int>(t))).string(), masks[t]);
}

std::vector<LabelMask> load_masks(const std::string& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a mask directory: " + dir);
  std::vector<LabelMask> out;
  for (int t = 0;; ++t) {
    const fs::path mp = fs::path(dir) / mask_name(t);
    if (!fs::exists(mp)) break;
    out.push_back(read_pgm(mp.string()));
  }
  if (out.empty()) throw FormatError("no masks found in " + dir);
  return out;
}

}  // namespace msd
