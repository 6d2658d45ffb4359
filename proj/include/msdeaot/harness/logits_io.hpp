#pragma once

#include <string>
#include <vector>

#include "msdeaot/model.hpp"

namespace msd {

// Binary logits file: magic "MSLG", version u32, h u32, w u32, channels u32,
// little-endian, then the f32 payload row-major. Round trips are bit-exact.
void save_logits(const std::string& path, const MaskLogits& logits);
MaskLogits load_logits(const std::string& path);

// Per-frame logits in a directory: logits_%04d.mslg.
void save_logits_dir(const std::vector<MaskLogits>& logits, const std::string& dir);
std::vector<MaskLogits> load_logits_dir(const std::string& dir);

}  // namespace msd
