#include "msdeaot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "msdeaot/errors.hpp"

namespace msd {

namespace {

void check_same_shape(const LabelMask& a, const LabelMask& b) {
  if (a.h != b.h || a.w != b.w)
    throw DimensionError("mask shape mismatch: " + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                         std::to_string(b.w));
}

// Inner boundary: object pixel with a non-object 4-neighbor (or on the frame).
std::vector<std::pair<int, int>> inner_boundary(const LabelMask& mask, int object_id) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      if (mask.at(y, x) != object_id) continue;
      const bool edge =
          y == 0 || y == mask.h - 1 || x == 0 || x == mask.w - 1 ||
          mask.at(y - 1, x) != object_id || mask.at(y + 1, x) != object_id ||
          mask.at(y, x - 1) != object_id || mask.at(y, x + 1) != object_id;
      if (edge) out.emplace_back(y, x);
    }
  }
  return out;
}

double matched_fraction(const std::vector<std::pair<int, int>>& from,
                        const std::vector<std::pair<int, int>>& to, double tol) {
  if (from.empty()) return 0.0;
  const double tol2 = tol * tol;
  std::size_t matched = 0;
  for (const auto& [fy, fx] : from) {
    for (const auto& [ty, tx] : to) {
      const double dy = fy - ty, dx = fx - tx;
      if (dy * dy + dx * dx <= tol2) {
        ++matched;
        break;
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(from.size());
}

}  // namespace

double region_similarity(const LabelMask& pred, const LabelMask& gt, int object_id) {
  check_same_shape(pred, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool p = pred.labels[i] == object_id;
    const bool g = gt.labels[i] == object_id;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double boundary_f(const LabelMask& pred, const LabelMask& gt, int object_id,
                  double tolerance_px) {
  check_same_shape(pred, gt);
  const auto pb = inner_boundary(pred, object_id);
  const auto gb = inner_boundary(gt, object_id);
  if (pb.empty() && gb.empty()) return 1.0;
  if (pb.empty() || gb.empty()) return 0.0;
  const double precision = matched_fraction(pb, gb, tolerance_px);
  const double recall = matched_fraction(gb, pb, tolerance_px);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double default_boundary_tolerance(int h, int w) {
  return std::ceil(0.008 * std::sqrt(static_cast<double>(h) * h +
                                     static_cast<double>(w) * w));
}

double jf_mean(double j, double f) {
  if (j < 0.0 || j > 1.0 || f < 0.0 || f > 1.0)
    throw RangeError("jf_mean expects values in [0,1]");
  return (j + f) / 2.0;
}

EvalReport evaluate_sequence(const std::vector<LabelMask>& preds,
                             const std::vector<LabelMask>& gts, double tolerance_px) {
  if (preds.size() != gts.size())
    throw DimensionError("prediction/ground-truth frame count mismatch: " +
                         std::to_string(preds.size()) + " vs " +
                         std::to_string(gts.size()));
  if (gts.empty()) throw DimensionError("cannot evaluate an empty sequence");
  for (std::size_t t = 0; t < gts.size(); ++t) check_same_shape(preds[t], gts[t]);
  if (tolerance_px < 0.0)
    tolerance_px = default_boundary_tolerance(gts[0].h, gts[0].w);

  std::set<int> objects;
  for (const auto& gt : gts)
    for (int v : gt.labels)
      if (v != 0) objects.insert(v);

  EvalReport rep;
  for (int obj : objects) {
    double jsum = 0.0, fsum = 0.0;
    int count = 0;
    for (std::size_t t = 1; t < gts.size(); ++t) {
      const double j = region_similarity(preds[t], gts[t], obj);
      const double f = boundary_f(preds[t], gts[t], obj, tolerance_px);
      rep.per_frame.push_back({obj, static_cast<int>(t), j, f});
      jsum += j;
      fsum += f;
      ++count;
    }
    if (count == 0) continue;  // single-frame sequence: nothing to score
    rep.per_object.emplace_back(obj, std::make_pair(jsum / count, fsum / count));
  }
  if (!rep.per_object.empty()) {
    for (const auto& [obj, jf] : rep.per_object) {
      (void)obj;
      rep.j += jf.first;
      rep.f += jf.second;
    }
    rep.j /= static_cast<double>(rep.per_object.size());
    rep.f /= static_cast<double>(rep.per_object.size());
  }
  rep.jf = (rep.j + rep.f) / 2.0;
  return rep;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v * 100.0);
  return buf;
}

}  // namespace

std::string report_to_csv(const EvalReport& report, const std::string& sequence_name) {
  std::ostringstream os;
  os << "sequence,object,frame,J,F\n";
  for (const auto& s : report.per_frame)
    os << sequence_name << "," << s.object_id << "," << s.frame << "," << pct(s.j)
       << "," << pct(s.f) << "\n";
  os << sequence_name << ",all,summary," << pct(report.j) << "," << pct(report.f)
     << "\n";
  os << sequence_name << ",all,jf," << pct(report.jf) << ",\n";
  return os.str();
}

}  // namespace msd
