// core/include/sasv/sim.hpp

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

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "sasv/decision.hpp"
#include "sasv/types.hpp"

namespace sasv {

// ---------------------------------------------------------------------------
// Score space

/// Bivariate Gaussian over (llr_asv, llr_cm) for one trial class.
struct ClassGaussian {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  std::size_t count = 2000;
};

struct ScoreSimConfig {
  ClassGaussian target{{3.5, 3.5}};
  ClassGaussian nontarget{{-3.5, 3.5}};
  ClassGaussian spoof{{0.0, -3.5}};
  std::uint64_t seed = 0;

  const ClassGaussian& of(TrialLabel label) const;
  ClassGaussian& of(TrialLabel label);
  /// Symmetric positive definite covariances, counts >= 1, finite means.
  void validate() const;
};

struct SimulatedScore {
  double llr_asv = 0.0;
  double llr_cm = 0.0;
  TrialLabel label = TrialLabel::kTargetBonafide;
};

/// Exactly `count` draws per class, classes in target, nontarget, spoof order.
/// Each class draws from its own stream of the seed.
std::vector<SimulatedScore> simulate_scores(const ScoreSimConfig& config);

double gaussian_log_density(const ClassGaussian& g, double x, double y);

/// Log-likelihood ratios of the generating model at (x, y): target against
/// nontarget, and target against spoof.
std::pair<double, double> true_llrs(const ScoreSimConfig& config, double x, double y);

// ---------------------------------------------------------------------------
// Embedding space

struct TrialCounts {
  std::size_t target = 0;
  std::size_t nontarget = 0;
  std::size_t spoof = 0;
};

/// Speaker means are unit vectors; within-speaker noise is isotropic with
/// total standard deviation sigma_w (sigma_w / sqrt(D) per dimension).
/// Spoofed test utterances sit at spoof_proximity * attacked mean +
/// (1 - spoof_proximity) * an unrelated unit vector in ASV space and are
/// displaced by cm_margin along a fixed direction in CM space.
struct EmbeddingSimConfig {
  std::size_t n_speakers = 40;  // per split, disjoint across splits
  std::size_t asv_dim = 32;
  std::size_t cm_dim = 16;
  double sigma_w = 0.3;
  double spoof_proximity = 1.0;
  double cm_margin = 4.0;
  TrialCounts train{1000, 1000, 1000};
  TrialCounts dev{500, 500, 500};
  TrialCounts eval{500, 500, 500};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimulatedEmbeddings {
  EmbeddingStore asv;
  EmbeddingStore cm;
  std::vector<TrialRecord> train;
  std::vector<TrialRecord> dev;
  std::vector<TrialRecord> eval;
};

/// Ids: "spk003_enr", "spk003_tst0007", "spf_spk003_0004". Every test
/// utterance is used in exactly one trial.
SimulatedEmbeddings simulate_embeddings(const EmbeddingSimConfig& config);

// ---------------------------------------------------------------------------
// Decision-boundary grid

struct GridSpec {
  double asv_min = -10.0;
  double asv_max = 10.0;
  double cm_min = -10.0;
  double cm_max = 10.0;
  std::size_t asv_steps = 101;
  std::size_t cm_steps = 101;

  void validate() const;
};

struct GridNode {
  double llr_asv = 0.0;
  double llr_cm = 0.0;
  double s_sasv = 0.0;
  bool accept = false;  // bayes_accept of the node's LLR pair
};

/// Row-major over llr_cm (outer) and llr_asv (inner).
std::vector<GridNode> boundary_grid(const FusionConfig& fusion,
                                    const CostModel& cost, const GridSpec& grid);

}  // namespace sasv
