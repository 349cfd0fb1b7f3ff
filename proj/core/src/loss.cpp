// core/src/loss.cpp

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

#include "sasv/loss.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sasv/decision.hpp"

namespace sasv {
namespace {

void require_same_length(std::size_t a, std::size_t b, const char* who) {
  if (a != b)
    throw Error(ErrorCode::kShapeMismatch, std::string(who) + ": length mismatch");
}

void require_nonneg(double w, const char* name) {
  if (!(w >= 0.0) || !std::isfinite(w))
    throw Error(ErrorCode::kInvalidArgument,
                std::string("loss weight ") + name + " must be finite and >= 0");
}

}  // namespace

LossAndGrad bce(double input, int y, BceInput kind) {
  if (y != 0 && y != 1)
    throw Error(ErrorCode::kInvalidArgument, "bce: label must be 0 or 1");
  if (kind == BceInput::kLogit) {
    // softplus(z) - y z
    const double z = input;
    const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    return {softplus - y * z, sigmoid(z) - y};
  }
  const bool clamped = !(input > kBceEpsilon && input < 1.0 - kBceEpsilon);
  const double p = std::clamp(input, kBceEpsilon, 1.0 - kBceEpsilon);
  const double loss = y ? -std::log(p) : -std::log1p(-p);
  const double grad = clamped ? 0.0 : (y ? -1.0 / p : 1.0 / (1.0 - p));
  return {loss, grad};
}

void SoftAdcfConfig::validate() const {
  cost.validate();
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::kInvalidArgument, "soft a-DCF alpha must be > 0");
  if (!std::isfinite(tau))
    throw Error(ErrorCode::kInvalidArgument, "soft a-DCF tau must be finite");
}

SoftAdcfResult soft_adcf(std::span<const double> scores,
                         std::span<const TrialLabel> labels,
                         const SoftAdcfConfig& config) {
  require_same_length(scores.size(), labels.size(), "soft_adcf");
  config.validate();
  std::array<std::size_t, 3> counts{0, 0, 0};
  for (TrialLabel l : labels) ++counts[static_cast<std::size_t>(l)];
  for (TrialLabel l : kAllLabels) {
    if (counts[static_cast<std::size_t>(l)] == 0)
      throw Error(ErrorCode::kEmptyClass,
                  "soft_adcf: no " + std::string(label_name(l)) + " trials in batch");
  }

  const double scale = config.normalized ? 1.0 / config.cost.default_cost() : 1.0;
  const std::array<double, 3> coef{
      scale * config.cost.weight_miss_tar() / counts[0],
      scale * config.cost.weight_fa_non() / counts[1],
      scale * config.cost.weight_fa_spf() / counts[2]};

  SoftAdcfResult r;
  r.d_scores.resize(scores.size());
  std::array<double, 3> soft_errors{0.0, 0.0, 0.0};
  const double a = config.alpha;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    // Misses are scores below tau, false alarms scores above it.
    const double sign = labels[i] == TrialLabel::kTargetBonafide ? -1.0 : 1.0;
    const double e = sigmoid(sign * a * (scores[i] - config.tau));
    soft_errors[k] += e;
    r.d_scores[i] = coef[k] * sign * a * e * (1.0 - e);
    r.d_tau -= r.d_scores[i];
  }
  r.p_miss_tar = soft_errors[0] / counts[0];
  r.p_fa_non = soft_errors[1] / counts[1];
  r.p_fa_spf = soft_errors[2] / counts[2];
  r.loss = coef[0] * soft_errors[0] + coef[1] * soft_errors[1] +
           coef[2] * soft_errors[2];
  return r;
}

void LossWeights::validate_v1() const {
  require_nonneg(beta1, "beta1");
  require_nonneg(beta2, "beta2");
  if (beta1 == 0.0 && beta2 == 0.0)
    throw Error(ErrorCode::kInvalidArgument, "beta1 and beta2 are both zero");
}

void LossWeights::validate_v2() const {
  require_nonneg(lambda1, "lambda1");
  require_nonneg(lambda2, "lambda2");
  require_nonneg(lambda3, "lambda3");
  if (lambda1 == 0.0 && lambda2 == 0.0 && lambda3 == 0.0)
    throw Error(ErrorCode::kInvalidArgument, "lambda1..3 are all zero");
}

CombinedLossResult combined_loss_v1(std::span<const double> s_sasv,
                                    std::span<const TrialLabel> labels,
                                    const LossWeights& weights,
                                    const SoftAdcfConfig& config) {
  require_same_length(s_sasv.size(), labels.size(), "combined_loss_v1");
  weights.validate_v1();
  if (s_sasv.empty()) throw Error(ErrorCode::kEmptyClass, "combined_loss_v1: empty batch");
  const std::size_t n = s_sasv.size();
  CombinedLossResult r;
  r.d_sasv.assign(n, 0.0);
  r.d_asv.assign(n, 0.0);
  r.d_cm.assign(n, 0.0);

  if (weights.beta1 > 0.0) {
    const auto adcf = soft_adcf(s_sasv, labels, config);
    r.adcf_term = adcf.loss;
    for (std::size_t i = 0; i < n; ++i) r.d_sasv[i] += weights.beta1 * adcf.d_scores[i];
    r.d_tau = weights.beta1 * adcf.d_tau;
  }
  if (weights.beta2 > 0.0) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = bce(s_sasv[i], label_maps(labels[i]).sasv, BceInput::kLogit);
      total += b.loss;
      r.d_sasv[i] += weights.beta2 * b.grad / n;
    }
    r.sasv_bce_term = total / n;
  }
  r.loss = weights.beta1 * r.adcf_term + weights.beta2 * r.sasv_bce_term;
  return r;
}

CombinedLossResult combined_loss_v2(std::span<const double> llr_asv,
                                    std::span<const double> llr_cm,
                                    std::span<const double> s_sasv,
                                    std::span<const TrialLabel> labels,
                                    const LossWeights& weights,
                                    const SoftAdcfConfig& config) {
  require_same_length(s_sasv.size(), labels.size(), "combined_loss_v2");
  require_same_length(llr_asv.size(), labels.size(), "combined_loss_v2");
  require_same_length(llr_cm.size(), labels.size(), "combined_loss_v2");
  weights.validate_v2();
  if (s_sasv.empty()) throw Error(ErrorCode::kEmptyClass, "combined_loss_v2: empty batch");
  const std::size_t n = s_sasv.size();
  CombinedLossResult r;
  r.d_sasv.assign(n, 0.0);
  r.d_asv.assign(n, 0.0);
  r.d_cm.assign(n, 0.0);

  if (weights.lambda1 > 0.0) {
    const auto adcf = soft_adcf(s_sasv, labels, config);
    r.adcf_term = adcf.loss;
    for (std::size_t i = 0; i < n; ++i) r.d_sasv[i] = weights.lambda1 * adcf.d_scores[i];
    r.d_tau = weights.lambda1 * adcf.d_tau;
  }
  if (weights.lambda2 > 0.0) {
    std::size_t bonafide = 0;
    for (TrialLabel l : labels) bonafide += l != TrialLabel::kSpoof;
    if (bonafide == 0)
      throw Error(ErrorCode::kEmptyClass, "combined_loss_v2: no bona fide trials for ASV BCE");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = label_maps(labels[i]).asv;
      if (!y) continue;
      const auto b = bce(llr_asv[i], *y, BceInput::kLogit);
      total += b.loss;
      r.d_asv[i] = weights.lambda2 * b.grad / bonafide;
    }
    r.asv_bce_term = total / bonafide;
  }
  if (weights.lambda3 > 0.0) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = bce(llr_cm[i], label_maps(labels[i]).cm, BceInput::kLogit);
      total += b.loss;
      r.d_cm[i] = weights.lambda3 * b.grad / n;
    }
    r.cm_bce_term = total / n;
  }
  r.loss = weights.lambda1 * r.adcf_term + weights.lambda2 * r.asv_bce_term +
           weights.lambda3 * r.cm_bce_term;
  return r;
}

}  // namespace sasv
