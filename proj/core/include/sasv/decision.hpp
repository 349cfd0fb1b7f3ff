// core/include/sasv/decision.hpp

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

#include <span>

#include "sasv/types.hpp"

namespace sasv {

/// Affine score-to-LLR map, llr = w0 + w1 * score.
struct CalibrationParams {
  double w0 = 0.0;
  double w1 = 1.0;

  bool operator==(const CalibrationParams&) const = default;
};

inline double calibrate(double score, const CalibrationParams& p) {
  return p.w0 + p.w1 * score;
}

struct CalibrationOptions {
  int max_iterations = 200;
  /// Stop when the norm of the (class-averaged) gradient falls below this.
  double gradient_tolerance = 1e-8;
  /// |w1| is not allowed past this; reaching it ends the fit.
  double max_scale = 50.0;
  /// Platt targets (n_pos + 1) / (n_pos + 2) and 1 / (n_neg + 2) instead of
  /// 1 and 0. Keeps the optimum finite when the classes are separable.
  bool smooth_targets = false;
};

struct CalibrationFit {
  CalibrationParams params;
  int iterations = 0;
  /// The two classes do not overlap, so the likelihood has no finite maximum.
  bool separable = false;
  /// The fit stopped at |w1| == max_scale.
  bool scale_capped = false;
};

/// Logistic-regression calibration. Each class contributes with equal total
/// weight (effective prior 0.5), so the result is an LLR map regardless of
/// how many positives and negatives were supplied. Fitted by damped Newton.
///
/// labels[i] is 1 for the positive class and 0 otherwise.
CalibrationFit fit_calibration(std::span<const double> scores,
                               std::span<const int> labels,
                               const CalibrationOptions& options = {});

// ---------------------------------------------------------------------------
// Fusion

enum class FusionMode { kLinear, kNonlinear };

struct FusionConfig {
  FusionMode mode = FusionMode::kNonlinear;
  double rho_tilde = 0.5;  // nonlinear only

  void validate() const;
};

/// Nonlinear fusion with rho_tilde = rho of the cost model.
FusionConfig default_fusion(const CostModel& cm);

/// Averages two LLRs in isometric log-ratio coordinates: (a + c) / sqrt(6).
double fuse_linear(double llr_asv, double llr_cm);

/// -log[(1 - rho) exp(-llr_asv) + rho exp(-llr_cm)], evaluated with a
/// max-shift so it never overflows. rho = 0 and rho = 1 return the ASV and
/// CM input exactly.
double fuse_nonlinear(double llr_asv, double llr_cm, double rho_tilde);

double fuse(const FusionConfig& config, double llr_asv, double llr_cm);

/// Fused value and its partial derivatives.
struct FusionGrad {
  double value = 0.0;
  double d_asv = 0.0;
  double d_cm = 0.0;
  double d_rho = 0.0;  // zero for linear fusion
};

FusionGrad fuse_with_grad(const FusionConfig& config, double llr_asv,
                          double llr_cm);

/// -log(u exp(-a) + v exp(-c)) for non-negative weights u, v. Zero-weight
/// terms are dropped exactly; both zero gives +inf.
double neg_log_mixture(double u, double a, double v, double c);

// ---------------------------------------------------------------------------
// Bayes decisions

/// Left-hand side of the optimal SASV accept rule:
/// -log[(1-rho) (C_fa_non/C_miss) e^{-llr_asv} + rho (C_fa_spf/C_miss) e^{-llr_cm}].
double sasv_decision_score(double llr_asv, double llr_cm, const CostModel& cm);

/// Accept iff sasv_decision_score > -log(beta).
bool bayes_accept(double llr_asv, double llr_cm, const CostModel& cm);

/// Bayes threshold of a plain ASV detector, log(C_fa/C_miss) - logit(pi_tar).
/// A bona fide trial is accepted iff its ASV LLR exceeds it.
double asv_bayes_threshold(const CostModel& cm);

double logit(double p);
double sigmoid(double x);

}  // namespace sasv
