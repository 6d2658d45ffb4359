#pragma once

#include <string>
#include <vector>

#include "msdeaot/idmech.hpp"
#include "msdeaot/model.hpp"

namespace msd {

struct TtaVariant {
  double scale = 1.0;
  bool flipped = false;
};

struct WeightedLogits {
  MaskLogits logits;
  double weight = 1.0;
  std::string source;
};

struct WeightedMask {
  LabelMask mask;
  double weight = 1.0;
  std::string source;
};

// The canonical 6-variant set: scales {1.2, 1.3, 1.4} x {plain, flipped},
// scale ascending, non-flipped first. include_identity prepends (1.0, false)
// and (1.0, true).
std::vector<TtaVariant> tta_variants(bool include_identity = false);

// Bilinear resize to (round(h*scale), round(w*scale)), then optional flip.
Tensor apply_variant(const Tensor& frame, const TtaVariant& v);

// Same geometry on a label mask (nearest resize).
LabelMask apply_variant_mask(const LabelMask& mask, const TtaVariant& v);

// Inverse transform of logits produced under v: un-flip, then resize back.
MaskLogits align_logits(const MaskLogits& logits, const TtaVariant& v, int orig_h,
                        int orig_w);

// Per-pixel channel softmax, weighted probability mean, argmax (lowest-label
// ties).
LabelMask average_logits(const std::vector<WeightedLogits>& preds);

// Per-pixel weighted label voting, max accumulated weight (lowest-label ties).
LabelMask vote_masks(const std::vector<WeightedMask>& preds);

// Runs propagate_sequence once per variant and fuses the aligned logits per
// frame via average_logits (uniform weights). Frame 0 is the reference mask.
std::vector<LabelMask> tta_segment(const Model& model, const std::vector<Tensor>& frames,
                                   const LabelMask& reference_mask,
                                   const std::vector<TtaVariant>& variants);

}  // namespace msd
