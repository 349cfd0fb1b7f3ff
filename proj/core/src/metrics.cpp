// core/src/metrics.cpp

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

#include "sasv/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace sasv {
namespace {

struct ClassCounts {
  std::array<std::size_t, 3> n{0, 0, 0};
};

std::size_t label_index(TrialLabel label) {
  return static_cast<std::size_t>(label);
}

ClassCounts count_classes(std::span<const LabeledScore> trials) {
  ClassCounts c;
  for (const auto& t : trials) ++c.n[label_index(t.label)];
  return c;
}

void require_all_classes(const ClassCounts& c, const char* who) {
  for (TrialLabel label : kAllLabels) {
    if (c.n[label_index(label)] == 0)
      throw Error(ErrorCode::kEmptyClass,
                  std::string(who) + ": no " + std::string(label_name(label)) +
                      " trials");
  }
}

// Rate of a class with zero trials is taken as 0; callers make sure such a
// class has zero cost weight.
double rate(std::size_t errors, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(errors) / total;
}

// Shared by adcf_at and the min sweep so both produce identical bits for the
// same error counts.
double cost_from_counts(std::size_t miss, std::size_t n_tar, std::size_t fa_non,
                        std::size_t n_non, std::size_t fa_spf,
                        std::size_t n_spf, const CostModel& cm,
                        bool normalized) {
  const double cost = cm.weight_miss_tar() * rate(miss, n_tar) +
                      cm.weight_fa_non() * rate(fa_non, n_non) +
                      cm.weight_fa_spf() * rate(fa_spf, n_spf);
  return normalized ? cost / cm.default_cost() : cost;
}

double below_all(double lowest) { return lowest - (1.0 + std::abs(lowest)); }
double above_all(double highest) { return highest + (1.0 + std::abs(highest)); }

struct RocVertex {
  double p_fa;
  double p_miss;
  double threshold;
};

std::vector<RocVertex> roc_vertices(std::span<const double> positives,
                                    std::span<const double> negatives) {
  if (positives.empty() || negatives.empty())
    throw Error(ErrorCode::kEmptyClass, "ROC needs non-empty positive and negative lists");
  std::vector<double> pos(positives.begin(), positives.end());
  std::vector<double> neg(negatives.begin(), negatives.end());
  for (double s : pos)
    if (std::isnan(s)) throw Error(ErrorCode::kInvalidArgument, "NaN score");
  for (double s : neg)
    if (std::isnan(s)) throw Error(ErrorCode::kInvalidArgument, "NaN score");
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());

  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  const double top = std::max(pos.front(), neg.front());

  std::vector<RocVertex> out;
  out.reserve(pos.size() + neg.size() + 1);
  out.push_back({0.0, 1.0, above_all(top)});

  // Lower the threshold through each distinct score, accepting everything at
  // or above it.
  std::size_t ip = 0, in = 0;
  while (ip < pos.size() || in < neg.size()) {
    double u = -std::numeric_limits<double>::infinity();
    if (ip < pos.size()) u = std::max(u, pos[ip]);
    if (in < neg.size()) u = std::max(u, neg[in]);
    while (ip < pos.size() && pos[ip] == u) ++ip;
    while (in < neg.size() && neg[in] == u) ++in;
    out.push_back({in / nn, (pos.size() - ip) / np, u});
  }
  return out;
}

}  // namespace

ErrorRates error_rates(std::span<const LabeledScore> trials, double threshold) {
  const ClassCounts counts = count_classes(trials);
  require_all_classes(counts, "error_rates");
  std::array<std::size_t, 3> errors{0, 0, 0};
  for (const auto& t : trials) {
    const bool accepted = t.score >= threshold;
    if (t.label == TrialLabel::kTargetBonafide ? !accepted : accepted)
      ++errors[label_index(t.label)];
  }
  return {rate(errors[0], counts.n[0]), rate(errors[1], counts.n[1]),
          rate(errors[2], counts.n[2]), threshold};
}

double adcf_at(std::span<const LabeledScore> trials, double threshold,
               const CostModel& cm, bool normalized) {
  cm.validate();
  const ClassCounts counts = count_classes(trials);
  const std::array<double, 3> weights{cm.weight_miss_tar(), cm.weight_fa_non(),
                                      cm.weight_fa_spf()};
  for (TrialLabel label : kAllLabels) {
    const std::size_t k = label_index(label);
    if (weights[k] > 0.0 && counts.n[k] == 0)
      throw Error(ErrorCode::kEmptyClass,
                  "adcf_at: no " + std::string(label_name(label)) + " trials");
  }
  std::array<std::size_t, 3> errors{0, 0, 0};
  for (const auto& t : trials) {
    const bool accepted = t.score >= threshold;
    if (t.label == TrialLabel::kTargetBonafide ? !accepted : accepted)
      ++errors[label_index(t.label)];
  }
  return cost_from_counts(errors[0], counts.n[0], errors[1], counts.n[1],
                          errors[2], counts.n[2], cm, normalized);
}

AdcfReport min_adcf(std::span<const LabeledScore> trials, const CostModel& cm,
                    bool normalized) {
  cm.validate();
  const ClassCounts counts = count_classes(trials);
  require_all_classes(counts, "min_adcf");
  for (const auto& t : trials)
    if (std::isnan(t.score)) throw Error(ErrorCode::kInvalidArgument, "NaN score");

  std::vector<std::size_t> order(trials.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trials[a].score < trials[b].score;
  });

  const std::size_t n_tar = counts.n[0], n_non = counts.n[1], n_spf = counts.n[2];
  // Threshold below everything: all accepted.
  std::size_t miss = 0, fa_non = n_non, fa_spf = n_spf;
  double best = cost_from_counts(miss, n_tar, fa_non, n_non, fa_spf, n_spf, cm,
                                 normalized);
  double best_threshold = below_all(trials[order.front()].score);
  std::array<std::size_t, 3> best_errors{miss, fa_non, fa_spf};

  std::size_t i = 0;
  while (i < order.size()) {
    const double s = trials[order[i]].score;
    // Move the threshold above every score equal to s.
    while (i < order.size() && trials[order[i]].score == s) {
      switch (trials[order[i]].label) {
        case TrialLabel::kTargetBonafide: ++miss; break;
        case TrialLabel::kNontargetBonafide: --fa_non; break;
        case TrialLabel::kSpoof: --fa_spf; break;
      }
      ++i;
    }
    double threshold = above_all(s);
    if (i < order.size()) {
      const double next = trials[order[i]].score;
      threshold = s + (next - s) / 2.0;
      if (!(threshold > s)) threshold = next;  // adjacent doubles
    }
    const double cost = cost_from_counts(miss, n_tar, fa_non, n_non, fa_spf,
                                         n_spf, cm, normalized);
    if (cost < best) {
      best = cost;
      best_threshold = threshold;
      best_errors = {miss, fa_non, fa_spf};
    }
  }

  AdcfReport report;
  report.min_adcf = best;
  report.min_threshold = best_threshold;
  report.normalized = normalized;
  report.rates_at_min = {rate(best_errors[0], n_tar), rate(best_errors[1], n_non),
                         rate(best_errors[2], n_spf), best_threshold};
  return report;
}

double actual_adcf(std::span<const LabeledScore> eval, double dev_threshold,
                   const CostModel& cm, bool normalized) {
  if (!std::isfinite(dev_threshold))
    throw Error(ErrorCode::kInvalidArgument, "actual_adcf: threshold must be finite");
  return adcf_at(eval, dev_threshold, cm, normalized);
}

EerResult eer(std::span<const double> positives,
              std::span<const double> negatives) {
  const auto v = roc_vertices(positives, negatives);
  // p_miss - p_fa goes from +1 at the first vertex to -1 at the last.
  for (std::size_t k = 1; k < v.size(); ++k) {
    const double d = v[k].p_miss - v[k].p_fa;
    if (d > 0.0) continue;
    if (d == 0.0) return {v[k].p_fa, v[k].threshold};
    const double d_prev = v[k - 1].p_miss - v[k - 1].p_fa;
    const double lambda = d_prev / (d_prev - d);
    const double rate_at =
        v[k - 1].p_fa + lambda * (v[k].p_fa - v[k - 1].p_fa);
    const double threshold =
        v[k - 1].threshold + lambda * (v[k].threshold - v[k - 1].threshold);
    return {rate_at, threshold};
  }
  return {v.back().p_fa, v.back().threshold};  // unreachable
}

std::vector<DetPoint> det_points(std::span<const double> positives,
                                 std::span<const double> negatives) {
  const auto v = roc_vertices(positives, negatives);
  std::vector<DetPoint> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back({x.p_fa, x.p_miss});
  return out;
}

ScoresByClass split_by_class(std::span<const LabeledScore> trials) {
  ScoresByClass out;
  for (const auto& t : trials) {
    switch (t.label) {
      case TrialLabel::kTargetBonafide: out.target.push_back(t.score); break;
      case TrialLabel::kNontargetBonafide: out.nontarget.push_back(t.score); break;
      case TrialLabel::kSpoof: out.spoof.push_back(t.score); break;
    }
  }
  return out;
}

EerResult sv_eer(std::span<const LabeledScore> trials) {
  const auto by = split_by_class(trials);
  return eer(by.target, by.nontarget);
}

EerResult spf_eer(std::span<const LabeledScore> trials) {
  const auto by = split_by_class(trials);
  return eer(by.target, by.spoof);
}

}  // namespace sasv
