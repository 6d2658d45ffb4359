#pragma once

#include <string>

#include "msdeaot/idmech.hpp"
#include "msdeaot/tensor.hpp"

namespace msd {

// Binary PPM (P6, maxval 255). Frames are h x w x 3 floats in [0,1]; values
// are quantized with round(v * 255) on write.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

// Binary PGM (P5, maxval 255); gray value == object label.
void write_pgm(const std::string& path, const LabelMask& mask);
LabelMask read_pgm(const std::string& path);

}  // namespace msd
