// core/include/sasv/loss.hpp

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
#include <vector>

#include "sasv/types.hpp"

namespace sasv {

enum class BceInput { kProbability, kLogit };

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kBceEpsilon = 1e-7;

struct LossAndGrad {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d input
};

/// Binary cross-entropy of one prediction. For kLogit the fused
/// softplus form is used, so arbitrarily large logits are fine. For
/// kProbability the gradient is that of the clamped function (zero outside
/// the clamp range).
LossAndGrad bce(double input, int y, BceInput kind);

/// Sigmoid relaxation of the a-DCF: each Heaviside step in the error counts
/// becomes sigmoid(alpha * t).
struct SoftAdcfConfig {
  CostModel cost;
  double tau = 0.0;
  double alpha = 1.0;
  bool normalized = true;

  void validate() const;
};

struct SoftAdcfResult {
  double loss = 0.0;
  std::vector<double> d_scores;
  double d_tau = 0.0;
  double p_miss_tar = 0.0;
  double p_fa_non = 0.0;
  double p_fa_spf = 0.0;
};

/// Throws kEmptyClass unless all three classes are present.
SoftAdcfResult soft_adcf(std::span<const double> scores,
                         std::span<const TrialLabel> labels,
                         const SoftAdcfConfig& config);

/// Fixed mixing weights of the two combined objectives. beta* weight the
/// a-DCF + SASV-BCE variant, lambda* the a-DCF + ASV-BCE + CM-BCE variant.
struct LossWeights {
  double beta1 = 1.0;
  double beta2 = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;

  void validate_v1() const;
  void validate_v2() const;
};

struct CombinedLossResult {
  double loss = 0.0;
  std::vector<double> d_sasv;  // per trial
  std::vector<double> d_asv;   // per trial, v2 only (zeros for v1)
  std::vector<double> d_cm;    // per trial, v2 only
  double d_tau = 0.0;
  // Unweighted components, for logging.
  double adcf_term = 0.0;
  double sasv_bce_term = 0.0;
  double asv_bce_term = 0.0;
  double cm_bce_term = 0.0;
};

/// beta1 * soft_adcf(s) + beta2 * mean BCE(sigmoid(s), y_sasv).
CombinedLossResult combined_loss_v1(std::span<const double> s_sasv,
                                    std::span<const TrialLabel> labels,
                                    const LossWeights& weights,
                                    const SoftAdcfConfig& config);

/// lambda1 * soft_adcf(s) + lambda2 * mean BCE(sigmoid(llr_asv), y_asv) over
/// bona fide trials + lambda3 * mean BCE(sigmoid(llr_cm), y_cm) over all.
CombinedLossResult combined_loss_v2(std::span<const double> llr_asv,
                                    std::span<const double> llr_cm,
                                    std::span<const double> s_sasv,
                                    std::span<const TrialLabel> labels,
                                    const LossWeights& weights,
                                    const SoftAdcfConfig& config);

}  // namespace sasv
