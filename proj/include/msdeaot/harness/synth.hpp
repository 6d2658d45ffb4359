#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "msdeaot/idmech.hpp"
#include "msdeaot/tensor.hpp"

namespace msd {

struct ShapeSpec {
  enum class Kind { kRectangle, kDisk };
  Kind kind = Kind::kRectangle;
  double x = 0.0, y = 0.0;      // top-left corner (rect) / center (disk)
  int width = 16, height = 16;  // disk uses width as diameter
  double vx = 0.0, vy = 0.0;    // px/frame
  std::array<std::uint8_t, 3> color{255, 255, 255};
};

struct SyntheticSceneConfig {
  int h = 64, w = 64;
  int frames = 10;
  std::array<std::uint8_t, 3> background{51, 51, 51};
  std::vector<ShapeSpec> shapes;  // draw order; later shapes occlude earlier
  std::uint64_t seed = 0;
  int max_objects = 10;
};

// Deterministically fills `count` shapes from cfg.seed (kind, placement,
// velocity, color), all fully inside the canvas at frame 0.
void randomize_shapes(SyntheticSceneConfig& cfg, int count);

struct SequenceFrames {
  std::vector<Tensor> frames;     // h x w x 3 in [0,1]
  std::vector<LabelMask> masks;   // labels: shape index + 1
};

// Renders the scene in memory. Shapes translate by their velocities and
// reflect off the canvas borders.
SequenceFrames render_sequence(const SyntheticSceneConfig& cfg);

// Renders and writes frame_%04d.ppm / mask_%04d.pgm into `dir`.
void generate_sequence(const SyntheticSceneConfig& cfg, const std::string& dir);

// Loads a directory in the layout written by generate_sequence.
SequenceFrames load_sequence(const std::string& dir, int max_objects = 255);

// Writes predicted masks as mask_%04d.pgm into `dir`.
void save_masks(const std::vector<LabelMask>& masks, const std::string& dir);
std::vector<LabelMask> load_masks(const std::string& dir);

}  // namespace msd
