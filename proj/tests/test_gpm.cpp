#include <cmath>
#include <vector>

#include "doctest.h"
#include "msdeaot/errors.hpp"
#include "msdeaot/gpm.hpp"

using namespace msd;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float s = 1.0f) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.gaussian()) * s;
  return t;
}

}  // namespace

TEST_CASE("shared_attention with a single key returns its values") {
  Rng rng(1);
  Tensor q = random_tensor({3, 4}, rng);
  Tensor k = random_tensor({1, 4}, rng);
  Tensor vv = random_tensor({1, 4}, rng);
  Tensor vi = random_tensor({1, 4}, rng);
  auto [ov, oi] = shared_attention(q, k, vv, vi);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 4; ++c) {
      CHECK(ov.at(i, c) == doctest::Approx(vv.at(0, c)));
      CHECK(oi.at(i, c) == doctest::Approx(vi.at(0, c)));
    }
}

TEST_CASE("identical keys give the uniform mean of the values") {
  Rng rng(2);
  Tensor q = random_tensor({2, 3}, rng);
  Tensor k({4, 3});
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) k.at(i, c) = static_cast<float>(c) + 1.0f;
  Tensor vv = random_tensor({4, 3}, rng);
  Tensor vi = random_tensor({4, 3}, rng);
  auto [ov, oi] = shared_attention(q, k, vv, vi);
  for (int i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c) {
      double mv = 0.0, mi = 0.0;
      for (int r = 0; r < 4; ++r) {
        mv += vv.at(r, c);
        mi += vi.at(r, c);
      }
      CHECK(ov.at(i, c) == doctest::Approx(mv / 4.0).epsilon(1e-5));
      CHECK(oi.at(i, c) == doctest::Approx(mi / 4.0).epsilon(1e-5));
    }
}

TEST_CASE("width-1 attention reproduces the softmax weights by hand") {
  Tensor q({1, 1}, {1.0f});
  Tensor k({2, 1}, {0.0f, std::log(4.0f)});
  Tensor vv({2, 1}, {0.0f, 1.0f});
  Tensor vi({2, 1}, {1.0f, 0.0f});
  auto [ov, oi] = shared_attention(q, k, vv, vi);  // scale = 1/sqrt(1) = 1
  CHECK(ov.at(0, 0) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(oi.at(0, 0) == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("zero-size tensors cannot be built, so empty keys are unrepresentable") {
  // The empty-memory contract is enforced at the layer level instead.
  CHECK_THROWS_AS(Tensor::zeros({0, 2}), DimensionError);
}

TEST_CASE("shared_attention is invariant to memory-row permutation") {
  Rng rng(3);
  Tensor q = random_tensor({4, 6}, rng);
  Tensor k = random_tensor({8, 6}, rng);
  Tensor vv = random_tensor({8, 6}, rng);
  Tensor vi = random_tensor({8, 6}, rng);
  Tensor kp = k, vvp = vv, vip = vi;
  // Reverse the rows.
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 6; ++c) {
      kp.at(i, c) = k.at(7 - i, c);
      vvp.at(i, c) = vv.at(7 - i, c);
      vip.at(i, c) = vi.at(7 - i, c);
    }
  auto [a, b] = shared_attention(q, k, vv, vi);
  auto [ap, bp] = shared_attention(q, kp, vvp, vip);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.data()[i] == doctest::Approx(ap.data()[i]).epsilon(1e-6));
    CHECK(b.data()[i] == doctest::Approx(bp.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("gated_propagation with zero gates halves the signal") {
  Rng rng(4);
  Tensor att = random_tensor({3, 3}, rng);
  Tensor gate_src = random_tensor({3, 3}, rng);
  Tensor r = gated_propagation(att, gate_src, Tensor::zeros({3, 3}),
                               Tensor::zeros({3}), Tensor::identity(3));
  for (std::size_t i = 0; i < att.size(); ++i)
    CHECK(r.data()[i] == doctest::Approx(att.data()[i] * 0.5f));
}

TEST_CASE("saturated gates with identity projections pass the signal through") {
  Rng rng(5);
  Tensor att = random_tensor({4, 4}, rng);
  Tensor gate_src = random_tensor({4, 4}, rng);
  Tensor r = gated_propagation(att, gate_src, Tensor::zeros({4, 4}),
                               Tensor::full({4}, 1e4f), Tensor::identity(4));
  for (std::size_t i = 0; i < att.size(); ++i)
    CHECK(std::abs(r.data()[i] - att.data()[i]) < 1e-6f);
}

TEST_CASE("gated_propagation matches a hand-composed 2x2 case") {
  Tensor att({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
  Tensor gate_src({2, 2}, {0.5f, -0.5f, 1.0f, 0.0f});
  Tensor gate_proj = Tensor::identity(2);
  Tensor bias({2}, std::vector<float>{0.1f, -0.2f});
  Tensor out_proj({2, 2}, {1.0f, 1.0f, 0.0f, 1.0f});
  Tensor r = gated_propagation(att, gate_src, gate_proj, bias, out_proj);
  for (int i = 0; i < 2; ++i) {
    const double g0 = 1.0 / (1.0 + std::exp(-(gate_src.at(i, 0) + 0.1)));
    const double g1 = 1.0 / (1.0 + std::exp(-(gate_src.at(i, 1) - 0.2)));
    const double m0 = att.at(i, 0) * g0;
    const double m1 = att.at(i, 1) * g1;
    CHECK(r.at(i, 0) == doctest::Approx(m0).epsilon(1e-5));
    CHECK(r.at(i, 1) == doctest::Approx(m0 + m1).epsilon(1e-5));
  }
}

TEST_CASE("build_memory_entry preserves row counts and applies projections") {
  Rng rng(6);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  Tensor vis = random_tensor({6, 4}, rng);
  Tensor id = random_tensor({6, 4}, rng);
  PropagationMemoryEntry e = build_memory_entry(vis, id, p, 3, 16, 2, 3);
  CHECK(e.keys.dim(0) == 6);
  CHECK(e.values_vis.dim(0) == 6);
  CHECK(e.values_id.dim(0) == 6);
  CHECK(e.frame_index == 3);
  CHECK(e.scale_stride == 16);
  CHECK(e.keys.data() == matmul(vis, p.wk).data());
  CHECK(e.values_id.data() == matmul(id, p.wu).data());
}

TEST_CASE("build_memory_entry with identity projections copies the features") {
  Rng rng(7);
  GpmLayerParams p = GpmLayerParams::template_mode(4, 4);
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = random_tensor({4, 4}, rng);
  PropagationMemoryEntry e = build_memory_entry(vis, id, p, 0, 8, 2, 2);
  CHECK(e.keys.data() == vis.data());
  CHECK(e.values_id.data() == id.data());
}

TEST_CASE("build_memory_entry is deterministic") {
  Rng rng1(8), rng2(8);
  GpmLayerParams p1 = GpmLayerParams::seeded(4, 4, rng1);
  GpmLayerParams p2 = GpmLayerParams::seeded(4, 4, rng2);
  Tensor vis = Tensor::full({4, 4}, 0.3f);
  Tensor id = Tensor::full({4, 4}, -0.1f);
  PropagationMemoryEntry a = build_memory_entry(vis, id, p1, 1, 16, 2, 2);
  PropagationMemoryEntry b = build_memory_entry(vis, id, p2, 1, 16, 2, 2);
  CHECK(a.keys.data() == b.keys.data());
  CHECK(a.values_vis.data() == b.values_vis.data());
  CHECK(a.values_id.data() == b.values_id.data());
}

TEST_CASE("gpm_layer keeps the token shapes") {
  Rng rng(9);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  Tensor vis = random_tensor({6, 4}, rng);
  Tensor id = random_tensor({6, 4}, rng);
  PropagationMemoryEntry mem =
      build_memory_entry(random_tensor({6, 4}, rng), random_tensor({6, 4}, rng), p, 0, 16, 2, 3);
  GpmConfig cfg;
  auto [ov, oi] = gpm_layer(vis, id, 2, 3, {mem}, nullptr, p, cfg);
  CHECK(ov.same_shape(vis));
  CHECK(oi.same_shape(id));
}

TEST_CASE("zeroed output projections make gpm_layer the identity") {
  Rng rng(10);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  p.out_vis = Tensor::zeros({4, 4});
  p.out_id = Tensor::zeros({4, 4});
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = random_tensor({4, 4}, rng);
  PropagationMemoryEntry mem =
      build_memory_entry(random_tensor({4, 4}, rng), random_tensor({4, 4}, rng), p, 0, 16, 2, 2);
  GpmConfig cfg;
  auto [ov, oi] = gpm_layer(vis, id, 2, 2, {mem}, nullptr, p, cfg);
  CHECK(ov.data() == vis.data());
  CHECK(oi.data() == id.data());
}

TEST_CASE("gpm_layer long-term sub-step equals the composed sub-operations") {
  Rng rng(11);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = random_tensor({4, 4}, rng);
  PropagationMemoryEntry mem =
      build_memory_entry(random_tensor({4, 4}, rng), random_tensor({4, 4}, rng), p, 0, 16, 2, 2);
  GpmConfig cfg;
  cfg.self_propagation = false;
  cfg.short_term = false;
  auto [ov, oi] = gpm_layer(vis, id, 2, 2, {mem}, nullptr, p, cfg);

  // Oracle: pre-norm, project, attend, gate, residual, called explicitly.
  Tensor vn = layer_norm(vis, 1, p.eps);
  Tensor in = layer_norm(id, 1, p.eps);
  Tensor q = matmul(vn, p.wq);
  auto [av, ai] = shared_attention(q, mem.keys, mem.values_vis, mem.values_id);
  Tensor ev = add(vis, gated_propagation(av, vn, p.gate_vis, p.gate_bias_vis, p.out_vis));
  Tensor ei = add(id, gated_propagation(ai, in, p.gate_id, p.gate_bias_id, p.out_id));
  for (std::size_t i = 0; i < ev.size(); ++i) {
    CHECK(ov.data()[i] == doctest::Approx(ev.data()[i]).epsilon(1e-6));
    CHECK(oi.data()[i] == doctest::Approx(ei.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("attention maps are computed once per active sub-step") {
  Rng rng(12);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = random_tensor({4, 4}, rng);
  PropagationMemoryEntry mem =
      build_memory_entry(random_tensor({4, 4}, rng), random_tensor({4, 4}, rng), p, 0, 16, 2, 2);

  struct Case {
    bool self, short_term, with_short_mem;
    long expect;
  };
  for (const Case& c : {Case{true, true, true, 3}, Case{true, false, false, 2},
                        Case{false, true, true, 2}, Case{false, false, false, 1},
                        Case{true, true, false, 2}}) {
    GpmConfig cfg;
    cfg.self_propagation = c.self;
    cfg.short_term = c.short_term;
    reset_gpm_stats();
    gpm_layer(vis, id, 2, 2, {mem}, c.with_short_mem ? &mem : nullptr, p, cfg);
    CHECK(gpm_stats().attention_maps == c.expect);
  }
  reset_gpm_stats();
}

TEST_CASE("zeroing the ID values changes only the ID branch") {
  Rng rng(13);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = random_tensor({4, 4}, rng);
  PropagationMemoryEntry mem =
      build_memory_entry(random_tensor({4, 4}, rng), random_tensor({4, 4}, rng), p, 0, 16, 2, 2);
  PropagationMemoryEntry zeroed = mem;
  zeroed.values_id = Tensor::zeros({4, 4});
  GpmConfig cfg;
  cfg.self_propagation = false;
  cfg.short_term = false;
  auto [v1, i1] = gpm_layer(vis, id, 2, 2, {mem}, nullptr, p, cfg);
  auto [v2, i2] = gpm_layer(vis, id, 2, 2, {zeroed}, nullptr, p, cfg);
  CHECK(v1.data() == v2.data());
  CHECK(i1.data() != i2.data());
}

TEST_CASE("template parameters reduce the long-term sub-step to plain attention") {
  Rng rng(14);
  GpmLayerParams p = GpmLayerParams::template_mode(4, 4);
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = Tensor::zeros({4, 4});
  Tensor mem_vis = random_tensor({4, 4}, rng);
  Tensor mem_id = random_tensor({4, 4}, rng);
  PropagationMemoryEntry mem = build_memory_entry(mem_vis, mem_id, p, 0, 16, 2, 2);
  GpmConfig cfg;
  cfg.self_propagation = false;
  cfg.short_term = false;
  cfg.pre_norm = false;
  auto [ov, oi] = gpm_layer(vis, id, 2, 2, {mem}, nullptr, p, cfg);
  auto [av, ai] = shared_attention(vis, mem_vis, mem_vis, mem_id);
  // The visual residual is frozen, the ID branch carries the attention output.
  CHECK(ov.data() == vis.data());
  for (std::size_t i = 0; i < ai.size(); ++i)
    CHECK(std::abs(oi.data()[i] - ai.data()[i]) < 1e-5f);
}

TEST_CASE("gpm_layer without any memory or self-propagation fails") {
  Rng rng(15);
  GpmLayerParams p = GpmLayerParams::seeded(4, 4, rng);
  GpmConfig cfg;
  cfg.self_propagation = false;
  Tensor vis = random_tensor({4, 4}, rng);
  Tensor id = random_tensor({4, 4}, rng);
  CHECK_THROWS_AS(gpm_layer(vis, id, 2, 2, {}, nullptr, p, cfg), EmptyMemoryError);
}

TEST_CASE("short-term attention stays inside the window") {
  // A far-away key with a huge matching score must not leak into the window.
  GpmLayerParams p = GpmLayerParams::template_mode(2, 2);
  const int gh = 6, gw = 6, n = gh * gw;
  Tensor vis = Tensor::zeros({n, 2});
  for (int i = 0; i < n; ++i) vis.at(i, 0) = 1.0f;
  Tensor mem_vis = vis;
  Tensor mem_id = Tensor::zeros({n, 2});
  // Perfect match everywhere, but only the far corner carries channel-1 id.
  mem_id.at(n - 1, 1) = 100.0f;
  for (int i = 0; i < n - 1; ++i) mem_id.at(i, 0) = 1.0f;
  PropagationMemoryEntry mem = build_memory_entry(mem_vis, mem_id, p, 0, 8, gh, gw);
  GpmConfig cfg;
  cfg.self_propagation = false;
  cfg.pre_norm = false;
  cfg.short_window_radius = 2;
  auto [ov, oi] = gpm_layer(vis, Tensor::zeros({n, 2}), gh, gw, {}, &mem, p, cfg);
  // Query (0,0) has window rows/cols 0..2; cell (5,5) is outside it.
  CHECK(oi.at(0, 1) == 0.0f);
  CHECK(oi.at(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  // The far corner query does see its own cell.
  CHECK(oi.at(n - 1, 1) > 0.0f);
}
