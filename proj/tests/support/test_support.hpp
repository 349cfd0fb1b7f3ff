// tests/support/test_support.hpp

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

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sasv/nn.hpp"
#include "sasv/rng.hpp"
#include "sasv/types.hpp"

namespace sasv::testing {

/// Random three-class score set with every class present. Scores are rounded
/// to a coarse grid when `ties` is set so that equal scores occur.
inline std::vector<LabeledScore> random_trials(CounterRng& rng, std::size_t n_min,
                                               std::size_t n_max, bool ties = false) {
  const std::size_t n = n_min + rng.below(n_max - n_min + 1);
  std::vector<LabeledScore> out;
  out.reserve(n);
  const double shift[3] = {1.0 + rng.uniform(), -1.0, rng.uniform(-1.0, 1.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = i < 3 ? kAllLabels[i] : kAllLabels[rng.below(3)];
    double s = shift[static_cast<int>(label)] + 1.5 * rng.normal();
    if (ties) s = std::round(s * 4.0) / 4.0;
    out.push_back({s, label});
  }
  return out;
}

/// Expected cost by direct counting, no shared code with the library sweep.
inline double counted_cost(const std::vector<LabeledScore>& trials, double threshold,
                           const CostModel& cm, bool normalized) {
  double n[3] = {0, 0, 0}, err[3] = {0, 0, 0};
  for (const auto& t : trials) {
    const int c = static_cast<int>(t.label);
    n[c] += 1;
    const bool accept = t.score >= threshold;
    if (c == 0 && !accept) err[c] += 1;
    if (c != 0 && accept) err[c] += 1;
  }
  double cost = 0.0;
  if (n[0] > 0) cost += cm.c_miss_tar * cm.pi_tar * err[0] / n[0];
  if (n[1] > 0) cost += cm.c_fa_non * cm.pi_non * err[1] / n[1];
  if (n[2] > 0) cost += cm.c_fa_spf * cm.pi_spf * err[2] / n[2];
  if (normalized)
    cost /= std::min(cm.c_miss_tar * cm.pi_tar,
                     cm.c_fa_non * cm.pi_non + cm.c_fa_spf * cm.pi_spf);
  return cost;
}

/// Minimum over a dense threshold grid that also contains every midpoint
/// between distinct scores and both extremes.
inline double brute_force_min_cost(const std::vector<LabeledScore>& trials,
                                   const CostModel& cm, bool normalized,
                                   std::size_t grid_points) {
  std::vector<double> s;
  for (const auto& t : trials) s.push_back(t.score);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<double> thresholds{s.front() - 1.0, s.back() + 1.0};
  for (std::size_t i = 0; i + 1 < s.size(); ++i) thresholds.push_back(0.5 * (s[i] + s[i + 1]));
  const double lo = s.front() - 1.0, hi = s.back() + 1.0;
  for (std::size_t g = 0; g < grid_points; ++g)
    thresholds.push_back(lo + (hi - lo) * static_cast<double>(g) /
                                  static_cast<double>(grid_points - 1));
  double best = std::numeric_limits<double>::infinity();
  for (double t : thresholds) best = std::min(best, counted_cost(trials, t, cm, normalized));
  return best;
}

inline double central_difference(const std::function<double(double)>& f, double x,
                                  double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative error; below `scale_floor` in magnitude the difference is
/// measured against the floor instead.
inline double gradient_error(double analytic, double numeric, double scale_floor = 1e-5) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), scale_floor});
  return std::abs(analytic - numeric) / scale;
}

/// Straightforward loop implementation of the MLP forward pass.
inline double naive_mlp(const MlpParams& p, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (const auto& layer : p.layers) {
    std::vector<double> z(static_cast<std::size_t>(layer.weight.rows()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      double acc = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        acc += layer.weight(r, c) * h[static_cast<std::size_t>(c)];
      switch (layer.activation) {
        case Activation::kIdentity: break;
        case Activation::kLeakyRelu: acc = acc > 0 ? acc : 0.3 * acc; break;
        case Activation::kRelu: acc = acc > 0 ? acc : 0.0; break;
        case Activation::kTanh: acc = std::tanh(acc); break;
      }
      z[static_cast<std::size_t>(r)] = acc;
    }
    h = z;
  }
  return h[0];
}

}  // namespace sasv::testing
