#pragma once

#include <vector>

#include "msdeaot/idmech.hpp"
#include "msdeaot/tensor.hpp"

namespace oracle {

// Brute-force nearest-neighbor label propagation over a rendered sequence,
// written with plain loops and double arithmetic. Mirrors the template-mode
// semantics: pooled-color cosine matching against long-term (global) and
// short-term (windowed, previous frame) memories at strides 16 and 8, with
// coarse votes bilinearly spread to the fine grid and the fine routes
// weighted 3x. Returns one full-resolution label mask per frame; frame 0 is
// the reference verbatim.
std::vector<msd::LabelMask> propagate(const std::vector<msd::Tensor>& frames,
                                      const msd::LabelMask& reference,
                                      int mem_interval, int max_objects);

}  // namespace oracle
