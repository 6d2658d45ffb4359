#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msdeaot/gpm.hpp"
#include "msdeaot/idmech.hpp"
#include "msdeaot/tensor.hpp"

namespace msd {

// Raw per-pixel per-slot scores, h x w x (M+1), channel 0 = background.
using MaskLogits = Tensor;

struct FrameFeatures {
  Tensor f4;   // h/4 x w/4 x C4
  Tensor f8;   // h/8 x w/8 x C8
  Tensor f16;  // h/16 x w/16 x C16
  int frame_index = 0;
};

// Four decoder-shortcut levels: [f8, f16, f16 copy, f16 copy], each passed
// through its own projection. The two copies stand in for coarser maps.
struct FeaturePyramid {
  std::array<Tensor, 4> levels;
};

struct StageMemory {
  std::vector<PropagationMemoryEntry> long_term;
  std::optional<PropagationMemoryEntry> short_term;
};

struct MemoryBank {
  StageMemory s16;
  StageMemory s8;
  int update_interval = 5;
};

struct ModelConfig {
  int c16 = 64;
  int c8 = 32;
  int gpm_layers_16 = 2;
  int gpm_layers_8 = 1;
  int max_objects = 10;    // M
  int mem_interval = 5;    // N
  bool template_mode = false;
  bool short_term_16 = true;
  bool short_term_8 = true;
  std::uint64_t seed = 0;
};

// lr_end + (lr0 - lr_end) * (1 - step/total)^power.
double poly_lr(int step, int total_steps, double lr0, double lr_end, double power);

class Model {
 public:
  static Model initialize(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const IdentityBank& bank() const { return bank_; }

  FrameFeatures encode_frame(const Tensor& image) const;
  FeaturePyramid build_feature_pyramid(const FrameFeatures& feats) const;

  MaskLogits segment_frame(const Tensor& frame, const MemoryBank& memory) const;

  // Builds this frame's per-stage entries from the predicted logits;
  // appends to long-term memory every `update_interval` frames.
  void update_memory(MemoryBank& memory, int frame_index, const Tensor& frame,
                     const MaskLogits& logits) const;

  std::vector<std::pair<LabelMask, MaskLogits>> propagate_sequence(
      const std::vector<Tensor>& frames, const LabelMask& reference_mask) const;

  void save_weights(const std::string& path) const;
  static Model load_weights(const std::string& path);

  // Test hooks: named parameter access (used by the weight-file round trip).
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

 private:
  explicit Model(ModelConfig cfg);

  struct StageInputs {
    Tensor x16;  // n16 x C16 tokens, pre-GPM
    Tensor x8;   // n8 x C8 tokens, pre-GPM (decoder applied, no propagation)
    int g16h = 0, g16w = 0, g8h = 0, g8w = 0;
    int padded_h = 0, padded_w = 0;
  };
  StageInputs stage_inputs(const Tensor& frame) const;
  Tensor decode_to_stride8(const Tensor& x16_tokens, int g16h, int g16w,
                           const Tensor& l8_tokens, int g8h, int g8w) const;
  GpmConfig stage_config(bool short_term_enabled) const;
  std::vector<std::pair<std::string, Tensor*>> named_tensors_mut();

  ModelConfig cfg_;
  int bank_width_;

  // Toy encoder: four strided 3x3 convs (widths 16, 32, C8, C16).
  Tensor enc1_, enc2_, enc3_, enc4_;
  // Pyramid level projections.
  Tensor pyr8_;
  std::array<Tensor, 3> pyr16_;
  // GPM stages.
  std::vector<GpmLayerParams> stage16_;
  std::vector<GpmLayerParams> stage8_;
  // Decoder block and head.
  Tensor dec_conv_;       // 3x3 x C16 x C8
  Tensor dec_id_proj_;    // bank_width x C8  (ID branch stage transfer)
  Tensor mem_id_proj8_;   // bank_width x C8  (stage-8 memory ID values)
  Tensor head_vis_;       // C8 x (M+1)
  Tensor head_id_;        // C8 x (M+1)

  IdentityBank bank_;
};

}  // namespace msd
