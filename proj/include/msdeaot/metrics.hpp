#pragma once

#include <string>
#include <vector>

#include "msdeaot/idmech.hpp"

namespace msd {

struct ObjectFrameScore {
  int object_id = 0;
  int frame = 0;
  double j = 0.0;
  double f = 0.0;
};

struct EvalReport {
  std::vector<ObjectFrameScore> per_frame;
  std::vector<std::pair<int, std::pair<double, double>>> per_object;  // id -> (J, F)
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;  // (j + f) / 2, exact
};

// Region IoU of object k; 1.0 when both masks are empty for k.
double region_similarity(const LabelMask& pred, const LabelMask& gt, int object_id);

// Boundary F-measure: 1-px inner boundaries (4-connectivity), precision/recall
// by all-pairs distance matching within tolerance_px.
double boundary_f(const LabelMask& pred, const LabelMask& gt, int object_id,
                  double tolerance_px);

// Default boundary tolerance: 0.8% of the image diagonal, rounded up.
double default_boundary_tolerance(int h, int w);

double jf_mean(double j, double f);

// Frame 0 (the given reference) is excluded from averaging. Objects are the
// nonzero labels appearing anywhere in the ground-truth masks.
EvalReport evaluate_sequence(const std::vector<LabelMask>& preds,
                             const std::vector<LabelMask>& gts,
                             double tolerance_px = -1.0);

// CSV: "sequence,object,frame,J,F" rows plus a summary row; one decimal,
// values as percentages.
std::string report_to_csv(const EvalReport& report, const std::string& sequence_name);

}  // namespace msd
