// core/include/sasv/metrics.hpp

// Copyright 2026  The sasv-backend Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sasv/types.hpp"

namespace sasv {

/// Error rates of a single-score SASV system at one threshold. A trial is
/// accepted when score >= threshold: a target below it is a miss, a
/// nontarget or spoof at or above it is a false alarm.
struct ErrorRates {
  double p_miss_tar = 0.0;
  double p_fa_non = 0.0;
  double p_fa_spf = 0.0;
  double threshold = 0.0;
};

struct AdcfReport {
  double min_adcf = 0.0;
  double min_threshold = 0.0;
  std::optional<double> act_adcf;
  std::optional<double> act_threshold;
  bool normalized = true;
  ErrorRates rates_at_min;
};

/// Throws kEmptyClass if any of the three classes has no trials.
ErrorRates error_rates(std::span<const LabeledScore> trials, double threshold);

/// Expected detection cost at `threshold`. Classes whose cost weight is zero
/// may be absent. With `normalized`, divided by CostModel::default_cost().
double adcf_at(std::span<const LabeledScore> trials, double threshold,
               const CostModel& cm, bool normalized = true);

/// Minimum over every distinct decision: thresholds at the midpoints between
/// consecutive distinct scores, plus one below and one above all scores.
/// The outer thresholds are reported as finite values just outside the
/// score range.
AdcfReport min_adcf(std::span<const LabeledScore> trials, const CostModel& cm,
                    bool normalized = true);

/// Cost on `eval` at a threshold chosen elsewhere (usually on dev).
double actual_adcf(std::span<const LabeledScore> eval, double dev_threshold,
                   const CostModel& cm, bool normalized = true);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Equal error rate between a positive and a negative score list, linearly
/// interpolated between adjacent ROC vertices.
EerResult eer(std::span<const double> positives,
              std::span<const double> negatives);

struct DetPoint {
  double p_fa = 0.0;
  double p_miss = 0.0;
};

/// ROC staircase vertices ordered by increasing p_fa (p_miss non-increasing),
/// from the reject-all corner (0, 1) to the accept-all corner (1, 0).
std::vector<DetPoint> det_points(std::span<const double> positives,
                                 std::span<const double> negatives);

/// Convenience: split labeled scores by class.
struct ScoresByClass {
  std::vector<double> target;
  std::vector<double> nontarget;
  std::vector<double> spoof;
};
ScoresByClass split_by_class(std::span<const LabeledScore> trials);

/// Target vs bona fide nontarget EER.
EerResult sv_eer(std::span<const LabeledScore> trials);
/// Target vs spoof EER.
EerResult spf_eer(std::span<const LabeledScore> trials);

}  // namespace sasv
