#pragma once

#include <cstdint>
#include <vector>

#include "msdeaot/tensor.hpp"

namespace msd {

// Per-pixel integer object labels, 0 = background.
struct LabelMask {
  int h = 0;
  int w = 0;
  std::vector<int> labels;

  LabelMask() = default;
  LabelMask(int h_, int w_, int fill = 0)
      : h(h_), w(w_), labels(static_cast<std::size_t>(h_) * w_, fill) {}

  int at(int y, int x) const { return labels[static_cast<std::size_t>(y) * w + x]; }
  int& at(int y, int x) { return labels[static_cast<std::size_t>(y) * w + x]; }
  bool operator==(const LabelMask& o) const {
    return h == o.h && w == o.w && labels == o.labels;
  }
};

// M+1 identity vectors; row 0 is background, rows 1..M are object slots.
class IdentityBank {
 public:
  IdentityBank(int capacity, Tensor vectors);

  // Seeded gaussian rows with scale 1/sqrt(width); rows checked distinct.
  static IdentityBank seeded(int capacity, int width, std::uint64_t seed);
  // One-hot rows (width == capacity+1); the template-mode bank.
  static IdentityBank one_hot(int capacity);

  int capacity() const { return capacity_; }  // M
  int width() const { return vectors_.dim(1); }
  const Tensor& vectors() const { return vectors_; }
  Tensor& vectors_mut() { return vectors_; }

 private:
  int capacity_;
  Tensor vectors_;  // (M+1) x C
};

// Injective map from external object ids to bank slots 1..M.
struct SlotAssignment {
  std::vector<std::pair<int, int>> id_to_slot;  // first-appearance order

  int slot_of(int external_id) const;
  int external_of(int slot) const;  // 0 stays 0
  std::size_t size() const { return id_to_slot.size(); }
};

SlotAssignment assign_identities(const std::vector<int>& object_ids, int bank_capacity);

// Slot assignment for the distinct nonzero labels of a reference mask, in
// row-major first-appearance order.
SlotAssignment reference_assignment(const LabelMask& reference, int bank_capacity);

// Nearest-neighbor label downsample, half-pixel-center mapping.
LabelMask downsample_labels_nearest(const LabelMask& mask, int target_h, int target_w);

// One-hot lookup through the bank after nearest label downsample; every output
// pixel equals exactly one bank row. Result is target_h x target_w x C.
Tensor encode_id_embedding(const LabelMask& mask, const IdentityBank& bank,
                           int target_h, int target_w);

// Per-pixel argmax over channels of h x w x (M+1) logits; ties -> lowest index.
LabelMask decode_labels(const Tensor& logits);

}  // namespace msd
