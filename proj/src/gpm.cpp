#include "msdeaot/gpm.hpp"

#include <algorithm>
#include <cmath>

#include "msdeaot/errors.hpp"

namespace msd {

namespace {

GpmStats g_stats;

// Row-wise L2 normalization; zero rows stay zero.
Tensor normalize_rows(const Tensor& x) {
  Tensor out = x;
  const int n = x.dim(0), c = x.dim(1);
  for (int i = 0; i < n; ++i) {
    float s = 0.0f;
    for (int j = 0; j < c; ++j) s += x.at(i, j) * x.at(i, j);
    if (s > 0.0f) {
      const float inv = 1.0f / std::sqrt(s);
      for (int j = 0; j < c; ++j) out.at(i, j) = x.at(i, j) * inv;
    }
  }
  return out;
}

}  // namespace

GpmStats& gpm_stats() { return g_stats; }
void reset_gpm_stats() { g_stats = GpmStats{}; }

GpmLayerParams GpmLayerParams::seeded(int vis_width, int id_width, Rng& rng) {
  const float sv = 1.0f / std::sqrt(static_cast<float>(vis_width));
  const float si = 1.0f / std::sqrt(static_cast<float>(id_width));
  GpmLayerParams p;
  p.wq = Tensor::gaussian({vis_width, vis_width}, rng, sv);
  p.wk = Tensor::gaussian({vis_width, vis_width}, rng, sv);
  p.wv = Tensor::gaussian({vis_width, vis_width}, rng, sv);
  p.wu = Tensor::gaussian({id_width, id_width}, rng, si);
  p.gate_vis = Tensor::gaussian({vis_width, vis_width}, rng, sv);
  p.gate_id = Tensor::gaussian({id_width, id_width}, rng, si);
  p.gate_bias_vis = Tensor::zeros({vis_width});
  p.gate_bias_id = Tensor::zeros({id_width});
  p.out_vis = Tensor::gaussian({vis_width, vis_width}, rng, sv);
  p.out_id = Tensor::gaussian({id_width, id_width}, rng, si);
  return p;
}

GpmLayerParams GpmLayerParams::template_mode(int vis_width, int id_width) {
  GpmLayerParams p;
  p.wq = Tensor::identity(vis_width);
  p.wk = Tensor::identity(vis_width);
  p.wv = Tensor::identity(vis_width);
  p.wu = Tensor::identity(id_width);
  p.gate_vis = Tensor::zeros({vis_width, vis_width});
  p.gate_id = Tensor::zeros({id_width, id_width});
  // sigmoid(1e4) == 1.0f exactly: the gates are saturated open.
  p.gate_bias_vis = Tensor::full({vis_width}, 1e4f);
  p.gate_bias_id = Tensor::full({id_width}, 1e4f);
  // Visual residual is frozen so matching features stay raw across layers;
  // the ID branch accumulates propagated labels unchanged.
  p.out_vis = Tensor::zeros({vis_width, vis_width});
  p.out_id = Tensor::identity(id_width);
  return p;
}

std::pair<Tensor, Tensor> shared_attention(const Tensor& q, const Tensor& k,
                                           const Tensor& v_vis, const Tensor& v_id,
                                           float scale, bool cosine) {
  if (k.dim(0) == 0) throw EmptyMemoryError("shared_attention called with no keys");
  if (q.dim(1) != k.dim(1))
    throw DimensionError("query/key width mismatch: " + q.shape_string() + " vs " +
                         k.shape_string());
  if (v_vis.dim(0) != k.dim(0) || v_id.dim(0) != k.dim(0))
    throw DimensionError("value row count differs from key row count");
  const float s = scale != 0.0f
                      ? scale
                      : 1.0f / std::sqrt(static_cast<float>(q.dim(1)));
  const Tensor qq = cosine ? normalize_rows(q) : q;
  const Tensor kk = cosine ? normalize_rows(k) : k;
  Tensor scores = matmul(qq, transpose2d(kk));
  for (float& v : scores.data()) v *= s;
  const Tensor attn = softmax(scores, 1);
  ++g_stats.attention_maps;
  return {matmul(attn, v_vis), matmul(attn, v_id)};
}

Tensor gated_propagation(const Tensor& attended, const Tensor& gate_source,
                         const Tensor& gate_proj, const Tensor& gate_bias,
                         const Tensor& out_proj) {
  if (!attended.same_shape(gate_source))
    throw DimensionError("gated_propagation shape mismatch: " +
                         attended.shape_string() + " vs " + gate_source.shape_string());
  Tensor gate = matmul(gate_source, gate_proj);
  const int n = gate.dim(0), c = gate.dim(1);
  Tensor modulated({n, c});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      const float logit = gate.at(i, j) + gate_bias.at(j);
      const float sig = 1.0f / (1.0f + std::exp(-logit));
      modulated.at(i, j) = attended.at(i, j) * sig;
    }
  }
  return matmul(modulated, out_proj);
}

PropagationMemoryEntry build_memory_entry(const Tensor& frame_vis,
                                          const Tensor& frame_id,
                                          const GpmLayerParams& params,
                                          int frame_index, int stride,
                                          int grid_h, int grid_w) {
  if (frame_vis.dim(0) != frame_id.dim(0))
    throw DimensionError("visual/id row count mismatch in memory entry");
  if (frame_vis.dim(0) != grid_h * grid_w)
    throw DimensionError("token count does not match grid in memory entry");
  PropagationMemoryEntry e;
  e.keys = matmul(frame_vis, params.wk);
  e.values_vis = matmul(frame_vis, params.wv);
  e.values_id = matmul(frame_id, params.wu);
  e.frame_index = frame_index;
  e.scale_stride = stride;
  e.grid_h = grid_h;
  e.grid_w = grid_w;
  return e;
}

namespace {

Tensor concat_rows(const std::vector<const Tensor*>& parts) {
  int rows = 0;
  const int c = parts.front()->dim(1);
  for (const Tensor* p : parts) rows += p->dim(0);
  Tensor out({rows, c});
  int r = 0;
  for (const Tensor* p : parts) {
    for (int i = 0; i < p->dim(0); ++i, ++r)
      for (int j = 0; j < c; ++j) out.at(r, j) = p->at(i, j);
  }
  return out;
}

// Attention restricted to a square window around each query's grid cell; the
// map is still shared between the two value sets and counted once.
std::pair<Tensor, Tensor> windowed_attention(const Tensor& q, const Tensor& k,
                                             const Tensor& v_vis, const Tensor& v_id,
                                             int grid_h, int grid_w, int radius,
                                             float scale, bool cosine) {
  const int n = q.dim(0);
  const Tensor qq = cosine ? normalize_rows(q) : q;
  const Tensor kk = cosine ? normalize_rows(k) : k;
  Tensor out_vis({n, v_vis.dim(1)});
  Tensor out_id({n, v_id.dim(1)});
  const int c = qq.dim(1);
  for (int qy = 0; qy < grid_h; ++qy) {
    for (int qx = 0; qx < grid_w; ++qx) {
      const int qi = qy * grid_w + qx;
      std::vector<int> idx;
      std::vector<float> score;
      for (int ky = std::max(0, qy - radius); ky <= std::min(grid_h - 1, qy + radius); ++ky) {
        for (int kx = std::max(0, qx - radius); kx <= std::min(grid_w - 1, qx + radius); ++kx) {
          const int ki = ky * grid_w + kx;
          float dot = 0.0f;
          for (int ch = 0; ch < c; ++ch) dot += qq.at(qi, ch) * kk.at(ki, ch);
          idx.push_back(ki);
          score.push_back(dot * scale);
        }
      }
      float mx = score[0];
      for (float sc : score) mx = std::max(mx, sc);
      float sum = 0.0f;
      for (float& sc : score) {
        sc = std::exp(sc - mx);
        sum += sc;
      }
      for (std::size_t t = 0; t < idx.size(); ++t) {
        const float w = score[t] / sum;
        for (int ch = 0; ch < v_vis.dim(1); ++ch)
          out_vis.at(qi, ch) += w * v_vis.at(idx[t], ch);
        for (int ch = 0; ch < v_id.dim(1); ++ch)
          out_id.at(qi, ch) += w * v_id.at(idx[t], ch);
      }
    }
  }
  ++g_stats.attention_maps;
  return {out_vis, out_id};
}

}  // namespace

std::pair<Tensor, Tensor> gpm_layer(const Tensor& cur_vis, const Tensor& cur_id,
                                    int grid_h, int grid_w,
                                    const std::vector<PropagationMemoryEntry>& long_mem,
                                    const PropagationMemoryEntry* short_mem,
                                    const GpmLayerParams& params,
                                    const GpmConfig& cfg) {
  if (cur_vis.dim(0) != grid_h * grid_w)
    throw DimensionError("token count does not match grid in gpm_layer");
  if (cur_vis.dim(0) != cur_id.dim(0))
    throw DimensionError("visual/id token count mismatch in gpm_layer");
  const bool have_short = short_mem != nullptr && cfg.short_term;
  if (long_mem.empty() && !have_short && !cfg.self_propagation)
    throw EmptyMemoryError("gpm_layer has no memory and self-propagation is off");

  Tensor vis = cur_vis;
  Tensor id = cur_id;
  const float scale = cfg.attn_scale != 0.0f
                          ? cfg.attn_scale
                          : 1.0f / std::sqrt(static_cast<float>(cur_vis.dim(1)));

  auto apply = [&](const Tensor& av, const Tensor& ai, const Tensor& vis_src,
                   const Tensor& id_src) {
    vis = add(vis, gated_propagation(av, vis_src, params.gate_vis,
                                     params.gate_bias_vis, params.out_vis));
    id = add(id, gated_propagation(ai, id_src, params.gate_id,
                                   params.gate_bias_id, params.out_id));
  };

  // (a) self-propagation: current tokens attend over themselves.
  if (cfg.self_propagation) {
    const Tensor vn = cfg.pre_norm ? layer_norm(vis, 1, params.eps) : vis;
    const Tensor in = cfg.pre_norm ? layer_norm(id, 1, params.eps) : id;
    const Tensor q = matmul(vn, params.wq);
    const Tensor k = matmul(vn, params.wk);
    const Tensor vv = matmul(vn, params.wv);
    const Tensor vi = matmul(in, params.wu);
    auto [av, ai] = shared_attention(q, k, vv, vi, scale, cfg.cosine_scores);
    apply(av, ai, vn, in);
  }

  // (b) long-term propagation over all stored entries at once.
  if (!long_mem.empty()) {
    const Tensor vn = cfg.pre_norm ? layer_norm(vis, 1, params.eps) : vis;
    const Tensor in = cfg.pre_norm ? layer_norm(id, 1, params.eps) : id;
    const Tensor q = matmul(vn, params.wq);
    std::vector<const Tensor*> ks, vvs, vids;
    for (const auto& e : long_mem) {
      ks.push_back(&e.keys);
      vvs.push_back(&e.values_vis);
      vids.push_back(&e.values_id);
    }
    auto [av, ai] = shared_attention(q, concat_rows(ks), concat_rows(vvs),
                                     concat_rows(vids), scale, cfg.cosine_scores);
    apply(av, ai, vn, in);
  }

  // (c) short-term propagation over the previous frame, local window only.
  if (have_short) {
    if (short_mem->grid_h != grid_h || short_mem->grid_w != grid_w)
      throw DimensionError("short-term memory grid does not match current frame");
    const Tensor vn = cfg.pre_norm ? layer_norm(vis, 1, params.eps) : vis;
    const Tensor in = cfg.pre_norm ? layer_norm(id, 1, params.eps) : id;
    const Tensor q = matmul(vn, params.wq);
    auto [av, ai] =
        windowed_attention(q, short_mem->keys, short_mem->values_vis,
                           short_mem->values_id, grid_h, grid_w,
                           cfg.short_window_radius, scale, cfg.cosine_scores);
    apply(av, ai, vn, in);
  }

  return {vis, id};
}

}  // namespace msd
