#include "msdeaot/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "msdeaot/errors.hpp"

namespace msd {

std::vector<TtaVariant> tta_variants(bool include_identity) {
  std::vector<TtaVariant> out;
  if (include_identity) {
    out.push_back({1.0, false});
    out.push_back({1.0, true});
  }
  for (double s : {1.2, 1.3, 1.4}) {
    out.push_back({s, false});
    out.push_back({s, true});
  }
  return out;
}

namespace {

int scaled(int v, double s) {
  return static_cast<int>(std::lround(static_cast<double>(v) * s));
}

}  // namespace

Tensor apply_variant(const Tensor& frame, const TtaVariant& v) {
  Tensor out = resize_bilinear(frame, scaled(frame.dim(0), v.scale),
                               scaled(frame.dim(1), v.scale));
  if (v.flipped) out = flip_horizontal(out);
  return out;
}

LabelMask apply_variant_mask(const LabelMask& mask, const TtaVariant& v) {
  LabelMask out =
      downsample_labels_nearest(mask, scaled(mask.h, v.scale), scaled(mask.w, v.scale));
  if (v.flipped) {
    LabelMask flipped(out.h, out.w);
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) flipped.at(y, x) = out.at(y, out.w - 1 - x);
    out = flipped;
  }
  return out;
}

MaskLogits align_logits(const MaskLogits& logits, const TtaVariant& v, int orig_h,
                        int orig_w) {
  Tensor out = v.flipped ? flip_horizontal(logits) : logits;
  return resize_bilinear(out, orig_h, orig_w);
}

LabelMask average_logits(const std::vector<WeightedLogits>& preds) {
  if (preds.empty()) throw ArgumentError("average_logits needs at least one prediction");
  const Tensor& first = preds.front().logits;
  const int h = first.dim(0), w = first.dim(1), c = first.dim(2);
  double total_weight = 0.0;
  for (const auto& p : preds) {
    if (!p.logits.same_shape(first))
      throw DimensionError("ensemble logits shape mismatch (" + p.source + ")");
    if (!(p.weight > 0.0)) throw ArgumentError("ensemble weights must be positive");
    total_weight += p.weight;
  }
  LabelMask out(h, w);
  std::vector<double> acc(static_cast<std::size_t>(c));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& p : preds) {
        // Channel softmax: fusion happens in probability space.
        double mx = p.logits.at(y, x, 0);
        for (int ch = 1; ch < c; ++ch)
          mx = std::max(mx, static_cast<double>(p.logits.at(y, x, ch)));
        double sum = 0.0;
        for (int ch = 0; ch < c; ++ch) sum += std::exp(p.logits.at(y, x, ch) - mx);
        for (int ch = 0; ch < c; ++ch)
          acc[static_cast<std::size_t>(ch)] +=
              p.weight * std::exp(p.logits.at(y, x, ch) - mx) / sum;
      }
      int best = 0;
      double best_v = acc[0] / total_weight;
      for (int ch = 1; ch < c; ++ch) {
        const double v = acc[static_cast<std::size_t>(ch)] / total_weight;
        if (v > best_v) {
          best_v = v;
          best = ch;
        }
      }
      out.at(y, x) = best;
    }
  }
  return out;
}

LabelMask vote_masks(const std::vector<WeightedMask>& preds) {
  if (preds.empty()) throw ArgumentError("vote_masks needs at least one mask");
  const LabelMask& first = preds.front().mask;
  int max_label = 0;
  for (const auto& p : preds) {
    if (p.mask.h != first.h || p.mask.w != first.w)
      throw DimensionError("ensemble mask shape mismatch (" + p.source + ")");
    if (!(p.weight > 0.0)) throw ArgumentError("ensemble weights must be positive");
    for (int v : p.mask.labels) max_label = std::max(max_label, v);
  }
  LabelMask out(first.h, first.w);
  std::vector<double> votes(static_cast<std::size_t>(max_label) + 1);
  for (int y = 0; y < first.h; ++y) {
    for (int x = 0; x < first.w; ++x) {
      std::fill(votes.begin(), votes.end(), 0.0);
      for (const auto& p : preds) votes[static_cast<std::size_t>(p.mask.at(y, x))] += p.weight;
      int best = 0;
      double best_v = votes[0];
      for (int l = 1; l <= max_label; ++l) {
        if (votes[static_cast<std::size_t>(l)] > best_v) {
          best_v = votes[static_cast<std::size_t>(l)];
          best = l;
        }
      }
      out.at(y, x) = best;
    }
  }
  return out;
}

std::vector<LabelMask> tta_segment(const Model& model, const std::vector<Tensor>& frames,
                                   const LabelMask& reference_mask,
                                   const std::vector<TtaVariant>& variants) {
  if (variants.empty()) throw ArgumentError("tta_segment needs at least one variant");
  if (frames.empty()) throw ArgumentError("tta_segment needs at least one frame");
  const int h = frames[0].dim(0), w = frames[0].dim(1);
  const SlotAssignment slots =
      reference_assignment(reference_mask, model.config().max_objects);

  // per-frame, per-variant aligned logits
  std::vector<std::vector<WeightedLogits>> fused(frames.size());
  for (const TtaVariant& v : variants) {
    std::vector<Tensor> vframes;
    vframes.reserve(frames.size());
    for (const Tensor& f : frames) vframes.push_back(apply_variant(f, v));
    const LabelMask vref = apply_variant_mask(reference_mask, v);
    auto results = model.propagate_sequence(vframes, vref);
    for (std::size_t t = 0; t < results.size(); ++t)
      fused[t].push_back({align_logits(results[t].second, v, h, w), 1.0, ""});
  }

  std::vector<LabelMask> out;
  out.push_back(reference_mask);
  for (std::size_t t = 1; t < frames.size(); ++t) {
    LabelMask slots_mask = average_logits(fused[t]);
    LabelMask mask(slots_mask.h, slots_mask.w);
    for (std::size_t i = 0; i < mask.labels.size(); ++i)
      mask.labels[i] = slots.external_of(slots_mask.labels[i]);
    out.push_back(std::move(mask));
  }
  return out;
}

}  // namespace msd
