#include "msdeaot/idmech.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msdeaot/errors.hpp"

namespace msd {

IdentityBank::IdentityBank(int capacity, Tensor vectors)
    : capacity_(capacity), vectors_(std::move(vectors)) {
  if (capacity_ < 1) throw ConfigError("identity bank capacity must be >= 1");
  if (vectors_.rank() != 2 || vectors_.dim(0) != capacity_ + 1)
    throw DimensionError("identity bank expects (M+1) x C vectors, got " +
                         vectors_.shape_string());
}

IdentityBank IdentityBank::seeded(int capacity, int width, std::uint64_t seed) {
  Rng rng(seed);
  const float sc = 1.0f / std::sqrt(static_cast<float>(width));
  Tensor vecs = Tensor::gaussian({capacity + 1, width}, rng, sc);
  // Rows must be pairwise distinct for decoding to be well defined.
  for (int i = 0; i <= capacity; ++i) {
    for (int j = i + 1; j <= capacity; ++j) {
      float d2 = 0.0f;
      for (int c = 0; c < width; ++c) {
        const float d = vecs.at(i, c) - vecs.at(j, c);
        d2 += d * d;
      }
      if (std::sqrt(d2) < 1e-6f)
        throw ConfigError("identity bank rows " + std::to_string(i) + " and " +
                          std::to_string(j) + " coincide; pick another seed");
    }
  }
  return IdentityBank(capacity, std::move(vecs));
}

IdentityBank IdentityBank::one_hot(int capacity) {
  return IdentityBank(capacity, Tensor::identity(capacity + 1));
}

int SlotAssignment::slot_of(int external_id) const {
  for (const auto& [id, slot] : id_to_slot)
    if (id == external_id) return slot;
  throw ArgumentError("unknown external object id " + std::to_string(external_id));
}

int SlotAssignment::external_of(int slot) const {
  if (slot == 0) return 0;
  for (const auto& [id, s] : id_to_slot)
    if (s == slot) return id;
  throw ArgumentError("unassigned slot " + std::to_string(slot));
}

SlotAssignment assign_identities(const std::vector<int>& object_ids, int bank_capacity) {
  if (static_cast<int>(object_ids.size()) > bank_capacity)
    throw CapacityError("identity bank overflow: " +
                        std::to_string(object_ids.size() - bank_capacity) +
                        " object(s) beyond capacity " + std::to_string(bank_capacity));
  SlotAssignment out;
  int next = 1;
  for (int id : object_ids) {
    for (const auto& [seen, slot] : out.id_to_slot) {
      (void)slot;
      if (seen == id) throw ArgumentError("duplicate object id " + std::to_string(id));
    }
    out.id_to_slot.emplace_back(id, next++);
  }
  return out;
}

SlotAssignment reference_assignment(const LabelMask& reference, int bank_capacity) {
  std::vector<int> ids;
  for (int v : reference.labels)
    if (v != 0 && std::find(ids.begin(), ids.end(), v) == ids.end()) ids.push_back(v);
  return assign_identities(ids, bank_capacity);
}

LabelMask downsample_labels_nearest(const LabelMask& mask, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1)
    throw DimensionError("label downsample target must be >= 1");
  LabelMask out(target_h, target_w);
  for (int y = 0; y < target_h; ++y) {
    int sy = static_cast<int>((static_cast<double>(y) + 0.5) * mask.h / target_h);
    sy = std::min(std::max(sy, 0), mask.h - 1);
    for (int x = 0; x < target_w; ++x) {
      int sx = static_cast<int>((static_cast<double>(x) + 0.5) * mask.w / target_w);
      sx = std::min(std::max(sx, 0), mask.w - 1);
      out.at(y, x) = mask.at(sy, sx);
    }
  }
  return out;
}

Tensor encode_id_embedding(const LabelMask& mask, const IdentityBank& bank,
                           int target_h, int target_w) {
  const LabelMask small = downsample_labels_nearest(mask, target_h, target_w);
  const int c = bank.width();
  Tensor out({target_h, target_w, c});
  for (int y = 0; y < target_h; ++y) {
    for (int x = 0; x < target_w; ++x) {
      const int label = small.at(y, x);
      if (label < 0 || label > bank.capacity())
        throw LabelError("label " + std::to_string(label) + " exceeds bank capacity " +
                         std::to_string(bank.capacity()));
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = bank.vectors().at(label, ch);
    }
  }
  return out;
}

LabelMask decode_labels(const Tensor& logits) {
  if (logits.rank() != 3)
    throw DimensionError("decode_labels expects h x w x channels, got " +
                         logits.shape_string());
  const int h = logits.dim(0), w = logits.dim(1), c = logits.dim(2);
  LabelMask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      float best_v = logits.at(y, x, 0);
      for (int ch = 1; ch < c; ++ch) {
        const float v = logits.at(y, x, ch);
        if (v > best_v) {  // strict: ties keep the lowest index
          best_v = v;
          best = ch;
        }
      }
      out.at(y, x) = best;
    }
  }
  return out;
}

}  // namespace msd
