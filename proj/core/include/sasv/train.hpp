// core/include/sasv/train.hpp

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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sasv/decision.hpp"
#include "sasv/loss.hpp"
#include "sasv/nn.hpp"
#include "sasv/types.hpp"

namespace sasv {

/// ASV head / CM head pairings.
enum class Architecture {
  kMlpMlp,             // MLP on [e_enr, e_tst]
  kCosineMlp,          // fixed cosine, only calibration trains on the ASV side
  kWeightedCosineMlp,  // cosine of per-dimension reweighted embeddings
};
enum class LossVariant { kV1, kV2 };
enum class OptimizerKind { kSgd, kAdam };
enum class InitKind { kRandom, kPretrained };
/// Which objective terms update the calibration offsets and scales.
enum class CalibrationGradSource { kBoth, kFusionOnly, kAuxOnly };

std::string_view architecture_name(Architecture a);  // "mlp-mlp", ...
std::optional<Architecture> parse_architecture(std::string_view name);
std::string_view loss_variant_name(LossVariant v);
std::optional<LossVariant> parse_loss_variant(std::string_view name);
std::string_view optimizer_name(OptimizerKind k);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);
std::string_view init_name(InitKind k);
std::optional<InitKind> parse_init(std::string_view name);
std::string_view fusion_mode_name(FusionMode m);
std::optional<FusionMode> parse_fusion_mode(std::string_view name);

struct TrainConfig {
  Architecture architecture = Architecture::kWeightedCosineMlp;
  FusionMode fusion = FusionMode::kNonlinear;
  LossVariant loss = LossVariant::kV1;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  InitKind init = InitKind::kRandom;
  int epochs = 100;
  int pretrain_epochs = 20;
  std::size_t batch_size = 192;
  double lr = 0.000861;
  std::uint64_t seed = 0;
  CostModel cost;
  std::vector<std::size_t> hidden{384, 160};
  Activation hidden_activation = Activation::kLeakyRelu;
  LossWeights loss_weights;
  double alpha = 1.0;
  bool normalized_loss = true;
  CalibrationGradSource calibration_grad = CalibrationGradSource::kBoth;

  void validate() const;
};

/// Every trainable of the back-end.
struct ModelParams {
  Architecture architecture = Architecture::kWeightedCosineMlp;
  std::size_t asv_dim = 0;
  std::size_t cm_dim = 0;
  std::optional<MlpParams> asv_mlp;                  // kMlpMlp only
  std::optional<WeightedCosineParams> asv_weights;   // kWeightedCosineMlp only
  MlpParams cm_mlp;                                  // input [e_tst_asv; e_tst_cm]
  CalibrationParams asv_calibration;
  CalibrationParams cm_calibration;
  FusionMode fusion_mode = FusionMode::kNonlinear;
  double rho_logit = 0.0;  // rho_tilde = sigmoid(rho_logit)
  double tau = 0.0;        // soft a-DCF threshold

  double rho_tilde() const;
  FusionConfig fusion() const;
  /// Shapes consistent with architecture and dims, everything finite.
  void validate() const;
  /// Same structure, every value zero. Used as a gradient accumulator.
  ModelParams zeros_like() const;
};

/// Seeded initial model: MLPs uniform fan-in, w_asv = 1, identity
/// calibration, rho_tilde = rho of the cost model, tau = 0.
ModelParams init_model(const TrainConfig& config, std::size_t asv_dim,
                       std::size_t cm_dim);

// ---------------------------------------------------------------------------
// Parameter views and optimizers

struct TrainableMask {
  bool asv_head = false;
  bool cm_head = false;
  bool asv_calibration = false;
  bool cm_calibration = false;
  bool rho = false;
  bool tau = false;
};

/// Which parameters the joint objective updates for this configuration.
TrainableMask joint_trainables(const TrainConfig& config);

/// Flat views over the selected parameters in a fixed order. Calling this on
/// a model and on its zeros_like() gradient yields matching lists.
std::vector<std::span<double>> parameter_blocks(ModelParams& params,
                                                const TrainableMask& mask);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 0.000861;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> first_moment;   // Adam, per block
  std::vector<std::vector<double>> second_moment;  // Adam, per block
  std::int64_t step = 0;
};

using ParamBlocks = std::vector<std::span<double>>;
using GradBlocks = std::vector<std::span<const double>>;

/// p <- p - lr * g
void sgd_step(const ParamBlocks& params, const GradBlocks& grads,
              OptimizerState& state);
/// Bias-corrected Adam.
void adam_step(const ParamBlocks& params, const GradBlocks& grads,
               OptimizerState& state);
void optimizer_step(const ParamBlocks& params, const GradBlocks& grads,
                    OptimizerState& state);

// ---------------------------------------------------------------------------
// Data, forward pass, loss

/// Protocol rows resolved against the two embedding stores.
struct PreparedTrials {
  std::vector<std::size_t> enroll_row;   // in the ASV store
  std::vector<std::size_t> test_row;     // in the ASV store
  std::vector<std::size_t> test_cm_row;  // in the CM store
  std::vector<TrialLabel> labels;

  std::size_t size() const { return labels.size(); }
};

/// Throws kUnknownId naming the first id that is missing.
PreparedTrials prepare_trials(const EmbeddingStore& asv, const EmbeddingStore& cm,
                              std::span<const TrialRecord> trials);

/// Intermediate scores of the fused graph for a set of trials.
struct ForwardScores {
  std::vector<double> s_asv;
  std::vector<double> s_cm;
  std::vector<double> llr_asv;
  std::vector<double> llr_cm;
  std::vector<double> s_sasv;
};

ForwardScores forward_scores(const ModelParams& params, const EmbeddingStore& asv,
                             const EmbeddingStore& cm, const PreparedTrials& trials,
                             std::span<const std::size_t> indices);

/// Full-graph scoring of every trial, calibrated and fused.
std::vector<ScoredTrial> score_trials(const ModelParams& params,
                                      const EmbeddingStore& asv,
                                      const EmbeddingStore& cm,
                                      std::span<const TrialRecord> trials);

enum class Objective { kJoint, kAsvAux, kCmAux };

struct BatchLoss {
  double loss = 0.0;
  ModelParams grad;  // only meaningful when requested
};

/// Loss of one batch under `config` and, when `with_grad`, the exact gradient
/// with respect to every parameter (frozen ones included; masking happens in
/// the optimizer).
BatchLoss batch_loss(const ModelParams& params, const EmbeddingStore& asv,
                     const EmbeddingStore& cm, const PreparedTrials& trials,
                     std::span<const std::size_t> indices,
                     const TrainConfig& config, Objective objective,
                     bool with_grad);

/// Splits `pool` into shuffled mini-batches of roughly `batch_size`, each
/// holding at least one trial of every class present in the pool.
std::vector<std::vector<std::size_t>> make_stratified_batches(
    std::span<const std::size_t> pool, std::span<const TrialLabel> labels,
    std::size_t batch_size, CounterRng& rng);

// ---------------------------------------------------------------------------
// Training loop

struct TrainData {
  const EmbeddingStore& asv;
  const EmbeddingStore& cm;
  std::span<const TrialRecord> train;
  std::span<const TrialRecord> dev;
};

struct EpochLog {
  int epoch = 0;
  std::optional<double> train_loss;  // absent for the untrained epoch 0
  double dev_min_adcf = 0.0;
  double dev_threshold = 0.0;
};

/// One JSON object per line: epoch, train_loss, dev_min_adcf, dev_threshold.
std::string format_log_line(const EpochLog& entry);

struct Checkpoint {
  int epoch = 0;
  ModelParams params;
  double dev_min_adcf = 0.0;
  double dev_threshold = 0.0;
};

struct TrainResult {
  Checkpoint best;
  ModelParams final_params;
  ModelParams initial_params;
  std::vector<EpochLog> log;
};

/// Dev-set min a-DCF (normalized) and its threshold.
std::pair<double, double> evaluate_dev(const ModelParams& params,
                                       const EmbeddingStore& asv,
                                       const EmbeddingStore& cm,
                                       const PreparedTrials& dev,
                                       const CostModel& cost);

/// Joint training. Epoch 0 is the initial model; after every epoch the dev
/// min a-DCF is measured and the best epoch is returned.
TrainResult train_joint(const TrainConfig& config, const TrainData& data);

/// Trains the ASV head with the ASV BCE alone (bona fide trials only) and the
/// CM head with the CM BCE alone, each with its calibration.
ModelParams pretrain_heads(const TrainConfig& config, const TrainData& data,
                           ModelParams init);
ModelParams pretrain_heads(const TrainConfig& config, const TrainData& data);

}  // namespace sasv
