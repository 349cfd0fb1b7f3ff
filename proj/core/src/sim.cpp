// core/src/sim.cpp

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

#include "sasv/sim.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "sasv/rng.hpp"

namespace sasv {

namespace {

struct Cholesky2 {
  double l11, l21, l22;
};

Cholesky2 cholesky(const ClassGaussian& g, const char* who) {
  const double a = g.cov[0], b = g.cov[1], c = g.cov[2], d = g.cov[3];
  for (double v : g.cov)
    if (!std::isfinite(v))
      throw Error(ErrorCode::kInvalidArgument, std::string(who) + ": non-finite covariance");
  if (b != c)
    throw Error(ErrorCode::kInvalidArgument, std::string(who) + ": covariance not symmetric");
  if (!(a > 0.0))
    throw Error(ErrorCode::kInvalidArgument,
                std::string(who) + ": covariance not positive definite");
  const double l11 = std::sqrt(a);
  const double l21 = b / l11;
  const double rest = d - l21 * l21;
  if (!(rest > 0.0))
    throw Error(ErrorCode::kInvalidArgument,
                std::string(who) + ": covariance not positive definite");
  return {l11, l21, std::sqrt(rest)};
}

std::vector<double> unit_vector(std::size_t dim, CounterRng& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<double> noisy(const std::vector<double>& mean, double sd, CounterRng& rng) {
  std::vector<double> out(mean.size());
  for (std::size_t k = 0; k < mean.size(); ++k) out[k] = mean[k] + sd * rng.normal();
  return out;
}

std::string speaker_tag(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%03zu", s);
  return buf;
}

std::string numbered(const std::string& prefix, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", k);
  return prefix + buf;
}

}  // namespace

const ClassGaussian& ScoreSimConfig::of(TrialLabel label) const {
  switch (label) {
    case TrialLabel::kTargetBonafide: return target;
    case TrialLabel::kNontargetBonafide: return nontarget;
    case TrialLabel::kSpoof: return spoof;
  }
  return target;
}

ClassGaussian& ScoreSimConfig::of(TrialLabel label) {
  return const_cast<ClassGaussian&>(std::as_const(*this).of(label));
}

void ScoreSimConfig::validate() const {
  for (TrialLabel l : kAllLabels) {
    const auto& g = of(l);
    const std::string who = "score sim " + std::string(label_name(l));
    cholesky(g, who.c_str());
    if (!std::isfinite(g.mean[0]) || !std::isfinite(g.mean[1]))
      throw Error(ErrorCode::kInvalidArgument, who + ": non-finite mean");
    if (g.count == 0) throw Error(ErrorCode::kInvalidArgument, who + ": count must be >= 1");
  }
}

std::vector<SimulatedScore> simulate_scores(const ScoreSimConfig& config) {
  config.validate();
  std::vector<SimulatedScore> out;
  out.reserve(config.target.count + config.nontarget.count + config.spoof.count);
  std::uint64_t stream = 0;
  for (TrialLabel l : kAllLabels) {
    const auto& g = config.of(l);
    const Cholesky2 L = cholesky(g, "score sim");
    CounterRng rng(config.seed, stream++);
    for (std::size_t i = 0; i < g.count; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      out.push_back({g.mean[0] + L.l11 * z1, g.mean[1] + L.l21 * z1 + L.l22 * z2, l});
    }
  }
  return out;
}

double gaussian_log_density(const ClassGaussian& g, double x, double y) {
  const double a = g.cov[0], b = g.cov[1], d = g.cov[3];
  const double det = a * d - b * b;
  if (!(det > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "gaussian density: singular covariance");
  const double dx = x - g.mean[0];
  const double dy = y - g.mean[1];
  const double q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
  return -0.5 * q - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
}

std::pair<double, double> true_llrs(const ScoreSimConfig& config, double x, double y) {
  const double lt = gaussian_log_density(config.target, x, y);
  return {lt - gaussian_log_density(config.nontarget, x, y),
          lt - gaussian_log_density(config.spoof, x, y)};
}

void EmbeddingSimConfig::validate() const {
  if (n_speakers < 2)
    throw Error(ErrorCode::kInvalidArgument, "embedding sim: need >= 2 speakers per split");
  if (asv_dim < 2 || cm_dim < 2)
    throw Error(ErrorCode::kInvalidArgument, "embedding sim: dims must be >= 2");
  if (!std::isfinite(sigma_w) || sigma_w <= 0.0)
    throw Error(ErrorCode::kInvalidArgument, "embedding sim: sigma_w must be > 0");
  if (!(spoof_proximity >= 0.0 && spoof_proximity <= 1.0))
    throw Error(ErrorCode::kInvalidArgument, "embedding sim: spoof proximity must lie in [0,1]");
  if (!std::isfinite(cm_margin) || cm_margin < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "embedding sim: CM margin must be >= 0");
}

SimulatedEmbeddings simulate_embeddings(const EmbeddingSimConfig& config) {
  config.validate();
  SimulatedEmbeddings out{EmbeddingStore(config.asv_dim), EmbeddingStore(config.cm_dim),
                          {}, {}, {}};
  CounterRng rng(config.seed);
  const double sd_asv = config.sigma_w / std::sqrt(static_cast<double>(config.asv_dim));
  const double sd_cm = config.sigma_w / std::sqrt(static_cast<double>(config.cm_dim));
  const std::vector<double> cm_dir = unit_vector(config.cm_dim, rng);
  const double half = 0.5 * config.cm_margin;

  auto cm_embedding = [&](bool bonafide) {
    std::vector<double> v(config.cm_dim);
    const double shift = bonafide ? half : -half;
    for (std::size_t k = 0; k < config.cm_dim; ++k)
      v[k] = shift * cm_dir[k] + sd_cm * rng.normal();
    return v;
  };

  const std::size_t n = config.n_speakers;
  std::size_t first_speaker = 0;
  const TrialCounts* counts[3] = {&config.train, &config.dev, &config.eval};
  std::vector<TrialRecord>* protos[3] = {&out.train, &out.dev, &out.eval};
  for (int split = 0; split < 3; ++split) {
    std::vector<std::vector<double>> means(n);
    std::vector<std::string> tags(n);
    std::vector<std::size_t> n_tests(n, 0), n_spoofs(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
      means[s] = unit_vector(config.asv_dim, rng);
      tags[s] = speaker_tag(first_speaker + s);
      out.asv.insert(tags[s] + "_enr", noisy(means[s], sd_asv, rng));
    }
    auto bonafide_test = [&](std::size_t s) {
      const std::string id = numbered(tags[s] + "_tst", n_tests[s]++);
      out.asv.insert(id, noisy(means[s], sd_asv, rng));
      out.cm.insert(id, cm_embedding(true));
      return id;
    };
    auto& proto = *protos[split];
    const TrialCounts& c = *counts[split];
    for (std::size_t k = 0; k < c.target; ++k) {
      const std::size_t s = k % n;
      proto.push_back({tags[s] + "_enr", bonafide_test(s), TrialLabel::kTargetBonafide});
    }
    for (std::size_t k = 0; k < c.nontarget; ++k) {
      const std::size_t s = k % n;
      const std::size_t other = (s + 1 + rng.below(n - 1)) % n;
      proto.push_back({tags[s] + "_enr", bonafide_test(other),
                       TrialLabel::kNontargetBonafide});
    }
    for (std::size_t k = 0; k < c.spoof; ++k) {
      const std::size_t s = k % n;
      const std::vector<double> decoy = unit_vector(config.asv_dim, rng);
      std::vector<double> centre(config.asv_dim);
      for (std::size_t d = 0; d < config.asv_dim; ++d)
        centre[d] = config.spoof_proximity * means[s][d] +
                    (1.0 - config.spoof_proximity) * decoy[d];
      const std::string id = numbered("spf_" + tags[s] + "_", n_spoofs[s]++);
      out.asv.insert(id, noisy(centre, sd_asv, rng));
      out.cm.insert(id, cm_embedding(false));
      proto.push_back({tags[s] + "_enr", id, TrialLabel::kSpoof});
    }
    first_speaker += n;
  }
  return out;
}

void GridSpec::validate() const {
  for (double v : {asv_min, asv_max, cm_min, cm_max})
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "grid bounds must be finite");
  if (asv_steps == 0 || cm_steps == 0)
    throw Error(ErrorCode::kInvalidArgument, "grid is empty");
  if (asv_max < asv_min || cm_max < cm_min)
    throw Error(ErrorCode::kInvalidArgument, "grid upper bound below lower bound");
}

std::vector<GridNode> boundary_grid(const FusionConfig& fusion,
                                    const CostModel& cost, const GridSpec& grid) {
  grid.validate();
  fusion.validate();
  cost.validate();
  auto axis = [](double lo, double hi, std::size_t steps, std::size_t i) {
    if (steps == 1) return lo;
    if (i + 1 == steps) return hi;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  };
  std::vector<GridNode> out;
  out.reserve(grid.asv_steps * grid.cm_steps);
  for (std::size_t r = 0; r < grid.cm_steps; ++r) {
    const double c = axis(grid.cm_min, grid.cm_max, grid.cm_steps, r);
    for (std::size_t k = 0; k < grid.asv_steps; ++k) {
      const double a = axis(grid.asv_min, grid.asv_max, grid.asv_steps, k);
      out.push_back({a, c, fuse(fusion, a, c), bayes_accept(a, c, cost)});
    }
  }
  return out;
}

}  // namespace sasv
