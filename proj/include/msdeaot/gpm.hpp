#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "msdeaot/tensor.hpp"

namespace msd {

// One GPM layer's parameters. The visual branch owns the attention keys; the
// ID branch always rides the visual attention map and only carries its own
// value/gate/output projections.
struct GpmLayerParams {
  Tensor wq, wk, wv;                    // Cv x Cv visual projections
  Tensor wu;                            // Cid x Cid identity value projection
  Tensor gate_vis, gate_id;             // gate projections, per branch
  Tensor gate_bias_vis, gate_bias_id;   // [Cv], [Cid]
  Tensor out_vis, out_id;               // output projections, per branch
  float eps = 1e-5f;

  static GpmLayerParams seeded(int vis_width, int id_width, Rng& rng);
  // Identity projections, zeroed visual residual, saturated-open gates.
  static GpmLayerParams template_mode(int vis_width, int id_width);
};

struct GpmConfig {
  bool self_propagation = true;
  bool short_term = true;
  bool pre_norm = true;
  // Cosine scoring with a large fixed scale turns attention into an exact
  // nearest-neighbor match (template mode). Scale 0 means 1/sqrt(C).
  bool cosine_scores = false;
  float attn_scale = 0.0f;
  int short_window_radius = 2;
};

struct PropagationMemoryEntry {
  Tensor keys;        // n x Cv
  Tensor values_vis;  // n x Cv
  Tensor values_id;   // n x Cid
  int frame_index = 0;
  int scale_stride = 16;  // 8 or 16
  int grid_h = 0;
  int grid_w = 0;
};

// Instrumentation: attention-map computations and per-stride layer passes.
struct GpmStats {
  long attention_maps = 0;
  long layer_passes_stride16 = 0;
  long layer_passes_stride8 = 0;
};
GpmStats& gpm_stats();
void reset_gpm_stats();

// A = softmax(q k^T * scale) computed once, applied to both value sets.
// scale 0 -> 1/sqrt(C); cosine=true L2-normalizes q/k rows before scoring.
std::pair<Tensor, Tensor> shared_attention(const Tensor& q, const Tensor& k,
                                           const Tensor& v_vis, const Tensor& v_id,
                                           float scale = 0.0f, bool cosine = false);

// out = (attended ⊙ sigmoid(gate_source * gate_proj + gate_bias)) * out_proj.
Tensor gated_propagation(const Tensor& attended, const Tensor& gate_source,
                         const Tensor& gate_proj, const Tensor& gate_bias,
                         const Tensor& out_proj);

PropagationMemoryEntry build_memory_entry(const Tensor& frame_vis,
                                          const Tensor& frame_id,
                                          const GpmLayerParams& params,
                                          int frame_index, int stride,
                                          int grid_h, int grid_w);

// One full GPM layer: self, long-term, then short-term sub-steps, each
// pre-normalized, gated, and added residually to both branches. The current
// tokens are laid out row-major on a grid_h x grid_w grid; short-term
// attention is restricted to a square window around each query cell.
std::pair<Tensor, Tensor> gpm_layer(const Tensor& cur_vis, const Tensor& cur_id,
                                    int grid_h, int grid_w,
                                    const std::vector<PropagationMemoryEntry>& long_mem,
                                    const PropagationMemoryEntry* short_mem,
                                    const GpmLayerParams& params,
                                    const GpmConfig& cfg);

}  // namespace msd
