// core/src/decision.cpp

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

#include "sasv/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sasv {
namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

struct CalibrationObjective {
  std::span<const double> scores;
  std::span<const int> labels;
  double weight_pos;  // 0.5 / n_pos
  double weight_neg;  // 0.5 / n_neg
  double target_pos = 1.0;
  double target_neg = 0.0;

  double target(int label) const { return label ? target_pos : target_neg; }

  double value(double w0, double w1) const {
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = w0 + w1 * scores[i];
      const double t = target(labels[i]);
      const double c = labels[i] ? weight_pos : weight_neg;
      total += c * (t * softplus(-z) + (1.0 - t) * softplus(z));
    }
    return total;
  }
};

}  // namespace

double logit(double p) { return std::log(p) - std::log1p(-p); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

CalibrationFit fit_calibration(std::span<const double> scores,
                               std::span<const int> labels,
                               const CalibrationOptions& options) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::kShapeMismatch,
                "fit_calibration: scores and labels differ in length");
  std::size_t n_pos = 0;
  double min_pos = std::numeric_limits<double>::infinity();
  double max_pos = -min_pos, min_neg = min_pos, max_neg = -min_pos;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]))
      throw Error(ErrorCode::kInvalidArgument, "fit_calibration: non-finite score");
    if (labels[i] != 0 && labels[i] != 1)
      throw Error(ErrorCode::kInvalidArgument, "fit_calibration: labels must be 0/1");
    if (labels[i]) {
      ++n_pos;
      min_pos = std::min(min_pos, scores[i]);
      max_pos = std::max(max_pos, scores[i]);
    } else {
      min_neg = std::min(min_neg, scores[i]);
      max_neg = std::max(max_neg, scores[i]);
    }
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorCode::kEmptyClass,
                "fit_calibration: both classes must be present");

  CalibrationFit fit;
  fit.separable = max_neg < min_pos || max_pos < min_neg;
  CalibrationObjective objective{scores, labels, 0.5 / n_pos, 0.5 / n_neg};
  if (options.smooth_targets) {
    objective.target_pos = (n_pos + 1.0) / (n_pos + 2.0);
    objective.target_neg = 1.0 / (n_neg + 2.0);
  }

  double w0 = 0.0, w1 = 0.0;
  double current = objective.value(w0, w1);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    // Gradient and Hessian of the weighted negative log-likelihood.
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = scores[i];
      const double p = sigmoid(w0 + w1 * s);
      const double c = labels[i] ? objective.weight_pos : objective.weight_neg;
      const double r = c * (p - objective.target(labels[i]));
      const double h = c * p * (1.0 - p);
      g0 += r;
      g1 += r * s;
      h00 += h;
      h01 += h * s;
      h11 += h * s * s;
    }
    fit.iterations = iter;
    if (std::hypot(g0, g1) < options.gradient_tolerance) break;

    const double ridge = 1e-12 * (h00 + h11) + 1e-300;
    h00 += ridge;
    h11 += ridge;
    const double det = h00 * h11 - h01 * h01;
    double d0 = (h11 * g0 - h01 * g1) / det;
    double d1 = (h00 * g1 - h01 * g0) / det;
    if (!std::isfinite(d0) || !std::isfinite(d1)) {
      d0 = g0;
      d1 = g1;
    }

    // Clip the step so that |w1| never leaves the cap.
    double max_step = 1.0;
    if (std::abs(w1 - d1) > options.max_scale && d1 != 0.0) {
      const double target = (w1 - d1 > 0.0 ? 1.0 : -1.0) * options.max_scale;
      max_step = (w1 - target) / d1;
    }

    double step = max_step;
    double next = current;
    bool improved = false;
    for (int k = 0; k < 60; ++k) {
      next = objective.value(w0 - step * d0, w1 - step * d1);
      if (next <= current) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // at the floating-point optimum

    w0 -= step * d0;
    w1 -= step * d1;
    current = next;
    if (step == max_step && max_step < 1.0) {
      w1 = std::copysign(options.max_scale, w1);
      fit.scale_capped = true;
      break;
    }
    if (iter == options.max_iterations)
      throw Error(ErrorCode::kNonConvergence,
                  "fit_calibration: no convergence after " +
                      std::to_string(options.max_iterations) + " iterations");
  }
  fit.params = {w0, w1};
  return fit;
}

void FusionConfig::validate() const {
  if (!(rho_tilde >= 0.0 && rho_tilde <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "rho_tilde must lie in [0,1]");
}

FusionConfig default_fusion(const CostModel& cm) {
  return {FusionMode::kNonlinear, derive_rho(cm)};
}

double fuse_linear(double llr_asv, double llr_cm) {
  static const double kInvSqrt6 = 1.0 / std::sqrt(6.0);
  return (llr_asv + llr_cm) * kInvSqrt6;
}

double neg_log_mixture(double u, double a, double v, double c) {
  if (u == 0.0 && v == 0.0) return std::numeric_limits<double>::infinity();
  if (v == 0.0) return a - std::log(u);
  if (u == 0.0) return c - std::log(v);
  const double m = std::max(-a, -c);
  return -m - std::log(u * std::exp(-a - m) + v * std::exp(-c - m));
}

double fuse_nonlinear(double llr_asv, double llr_cm, double rho_tilde) {
  if (!(rho_tilde >= 0.0 && rho_tilde <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "rho_tilde must lie in [0,1]");
  return neg_log_mixture(1.0 - rho_tilde, llr_asv, rho_tilde, llr_cm);
}

double fuse(const FusionConfig& config, double llr_asv, double llr_cm) {
  return config.mode == FusionMode::kLinear
             ? fuse_linear(llr_asv, llr_cm)
             : fuse_nonlinear(llr_asv, llr_cm, config.rho_tilde);
}

FusionGrad fuse_with_grad(const FusionConfig& config, double llr_asv,
                          double llr_cm) {
  FusionGrad g;
  if (config.mode == FusionMode::kLinear) {
    static const double kInvSqrt6 = 1.0 / std::sqrt(6.0);
    g.value = fuse_linear(llr_asv, llr_cm);
    g.d_asv = kInvSqrt6;
    g.d_cm = kInvSqrt6;
    return g;
  }
  const double rho = config.rho_tilde;
  const double u = 1.0 - rho;
  g.value = fuse_nonlinear(llr_asv, llr_cm, rho);
  // Posterior-like responsibilities of the two terms.
  const double m = std::max(-llr_asv, -llr_cm);
  const double ea = std::exp(-llr_asv - m);
  const double ec = std::exp(-llr_cm - m);
  const double z = u * ea + rho * ec;
  g.d_asv = u * ea / z;
  g.d_cm = rho * ec / z;
  g.d_rho = (ea - ec) / z;
  return g;
}

double sasv_decision_score(double llr_asv, double llr_cm, const CostModel& cm) {
  if (!(cm.c_miss_tar > 0.0))
    throw Error(ErrorCode::kInvalidArgument,
                "Bayes SASV rule needs C_miss > 0");
  const double rho = derive_rho(cm);
  const double u = (1.0 - rho) * cm.c_fa_non / cm.c_miss_tar;
  const double v = rho * cm.c_fa_spf / cm.c_miss_tar;
  return neg_log_mixture(u, llr_asv, v, llr_cm);
}

bool bayes_accept(double llr_asv, double llr_cm, const CostModel& cm) {
  const double threshold = -std::log(derive_beta(cm));
  return sasv_decision_score(llr_asv, llr_cm, cm) > threshold;
}

double asv_bayes_threshold(const CostModel& cm) {
  if (!(cm.pi_tar > 0.0 && cm.pi_tar < 1.0))
    throw Error(ErrorCode::kDegeneratePriors, "pi_tar must lie in (0,1)");
  if (!(cm.c_fa_non > 0.0 && cm.c_miss_tar > 0.0))
    throw Error(ErrorCode::kInvalidArgument,
                "ASV Bayes threshold needs C_fa_non > 0 and C_miss > 0");
  return std::log(cm.c_fa_non / cm.c_miss_tar) - logit(cm.pi_tar);
}

}  // namespace sasv
