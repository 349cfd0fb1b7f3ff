// core/src/train.cpp

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

#include "sasv/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "sasv/metrics.hpp"

namespace sasv {

namespace {

constexpr std::uint64_t kSaltAsvInit = 0x11;
constexpr std::uint64_t kSaltCmInit = 0x12;
constexpr std::uint64_t kSaltShuffle = 0x21;
constexpr std::uint64_t kSaltPretrainAsv = 0x31;
constexpr std::uint64_t kSaltPretrainCm = 0x32;
constexpr std::size_t kEvalChunk = 4096;

// Keeps the initial logit finite when a prior is degenerate.
constexpr double kRhoClamp = 1e-6;

void copy_mlp_grad(const MlpGrad& src, MlpParams& dst) {
  for (std::size_t l = 0; l < dst.layers.size(); ++l) {
    dst.layers[l].weight = src.layers[l].weight;
    dst.layers[l].bias = src.layers[l].bias;
  }
}

MlpParams zero_mlp_like(const MlpParams& p) {
  MlpParams z = p;
  for (auto& layer : z.layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
  return z;
}

void push_mlp_blocks(MlpParams& p, std::vector<std::span<double>>& out) {
  for (auto& layer : p.layers) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
}

// Everything the backward pass needs from one forward pass.
struct ForwardCache {
  std::optional<MlpBatchOutput> asv_mlp;
  std::vector<WeightedCosineTape> asv_wcos;
  MlpBatchOutput cm_mlp;
  ForwardScores scores;
  std::vector<FusionGrad> fusion;
  std::vector<TrialLabel> labels;
};

ForwardCache forward_impl(const ModelParams& params, const EmbeddingStore& asv,
                          const EmbeddingStore& cm, const PreparedTrials& trials,
                          std::span<const std::size_t> indices, bool keep_tape) {
  const std::size_t n = indices.size();
  const std::size_t da = params.asv_dim;
  const std::size_t dc = params.cm_dim;
  ForwardCache c;
  c.labels.reserve(n);
  auto& s = c.scores;
  s.s_asv.resize(n);
  s.s_cm.resize(n);
  s.llr_asv.resize(n);
  s.llr_cm.resize(n);
  s.s_sasv.resize(n);

  switch (params.architecture) {
    case Architecture::kMlpMlp: {
      Eigen::MatrixXd x(2 * da, n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t t = indices[j];
        const auto e = asv.row(trials.enroll_row[t]);
        const auto v = asv.row(trials.test_row[t]);
        for (std::size_t k = 0; k < da; ++k) {
          x(k, j) = e[k];
          x(da + k, j) = v[k];
        }
      }
      c.asv_mlp = mlp_forward_batch(*params.asv_mlp, x);
      for (std::size_t j = 0; j < n; ++j) s.s_asv[j] = c.asv_mlp->scores(j);
      if (!keep_tape) c.asv_mlp.reset();
      break;
    }
    case Architecture::kCosineMlp:
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t t = indices[j];
        s.s_asv[j] = cosine_score(asv.row(trials.enroll_row[t]),
                                  asv.row(trials.test_row[t]));
      }
      break;
    case Architecture::kWeightedCosineMlp:
      if (keep_tape) c.asv_wcos.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t t = indices[j];
        auto f = weighted_cosine_score(*params.asv_weights,
                                       asv.row(trials.enroll_row[t]),
                                       asv.row(trials.test_row[t]));
        s.s_asv[j] = f.score;
        if (keep_tape) c.asv_wcos.push_back(std::move(f.tape));
      }
      break;
  }

  Eigen::MatrixXd x(da + dc, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t t = indices[j];
    const auto v = asv.row(trials.test_row[t]);
    const auto w = cm.row(trials.test_cm_row[t]);
    for (std::size_t k = 0; k < da; ++k) x(k, j) = v[k];
    for (std::size_t k = 0; k < dc; ++k) x(da + k, j) = w[k];
  }
  c.cm_mlp = mlp_forward_batch(params.cm_mlp, x);
  if (!keep_tape) c.cm_mlp.tape = MlpTape{};

  const FusionConfig fc = params.fusion();
  c.fusion.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    s.s_cm[j] = c.cm_mlp.scores(j);
    s.llr_asv[j] = calibrate(s.s_asv[j], params.asv_calibration);
    s.llr_cm[j] = calibrate(s.s_cm[j], params.cm_calibration);
    c.fusion[j] = fuse_with_grad(fc, s.llr_asv[j], s.llr_cm[j]);
    s.s_sasv[j] = c.fusion[j].value;
    c.labels.push_back(trials.labels[indices[j]]);
  }
  return c;
}

void require_all_classes(const PreparedTrials& t, const char* split) {
  for (TrialLabel l : kAllLabels) {
    if (std::find(t.labels.begin(), t.labels.end(), l) == t.labels.end())
      throw Error(ErrorCode::kEmptyClass, std::string(split) + " split has no " +
                                              std::string(label_name(l)) + " trials");
  }
}

void check_dims(const TrainData& data) {
  if (data.asv.dim() == 0 || data.cm.dim() == 0)
    throw Error(ErrorCode::kInvalidArgument, "embedding stores must have a dimension");
}

// Runs `epochs` passes of plain minimization of one auxiliary objective.
void pretrain_phase(ModelParams& params, const TrainConfig& config,
                    const TrainData& data, const PreparedTrials& train,
                    Objective objective, const TrainableMask& mask,
                    std::uint64_t salt) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (objective == Objective::kAsvAux && train.labels[i] == TrialLabel::kSpoof)
      continue;
    pool.push_back(i);
  }
  TrainConfig phase = config;
  phase.calibration_grad = CalibrationGradSource::kBoth;
  OptimizerState opt;
  opt.kind = config.optimizer;
  opt.lr = config.lr;
  CounterRng rng(derive_seed(config.seed, salt));
  for (int epoch = 1; epoch <= config.pretrain_epochs; ++epoch) {
    const auto batches = make_stratified_batches(pool, train.labels, config.batch_size, rng);
    for (const auto& batch : batches) {
      BatchLoss bl = batch_loss(params, data.asv, data.cm, train, batch, phase,
                                objective, true);
      if (!std::isfinite(bl.loss))
        throw Error(ErrorCode::kNonConvergence,
                    "pretraining diverged at epoch " + std::to_string(epoch));
      const auto p = parameter_blocks(params, mask);
      const auto g = parameter_blocks(bl.grad, mask);
      optimizer_step(p, GradBlocks(g.begin(), g.end()), opt);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Names

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::kMlpMlp: return "mlp-mlp";
    case Architecture::kCosineMlp: return "cosine-mlp";
    case Architecture::kWeightedCosineMlp: return "wcos-mlp";
  }
  return "?";
}

std::optional<Architecture> parse_architecture(std::string_view name) {
  if (name == "mlp-mlp") return Architecture::kMlpMlp;
  if (name == "cosine-mlp") return Architecture::kCosineMlp;
  if (name == "wcos-mlp") return Architecture::kWeightedCosineMlp;
  return std::nullopt;
}

std::string_view loss_variant_name(LossVariant v) {
  return v == LossVariant::kV1 ? "v1" : "v2";
}

std::optional<LossVariant> parse_loss_variant(std::string_view name) {
  if (name == "v1") return LossVariant::kV1;
  if (name == "v2") return LossVariant::kV2;
  return std::nullopt;
}

std::string_view optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  return std::nullopt;
}

std::string_view init_name(InitKind k) {
  return k == InitKind::kRandom ? "random" : "pretrained";
}

std::optional<InitKind> parse_init(std::string_view name) {
  if (name == "random") return InitKind::kRandom;
  if (name == "pretrained") return InitKind::kPretrained;
  return std::nullopt;
}

std::string_view fusion_mode_name(FusionMode m) {
  return m == FusionMode::kLinear ? "linear" : "nonlinear";
}

std::optional<FusionMode> parse_fusion_mode(std::string_view name) {
  if (name == "linear") return FusionMode::kLinear;
  if (name == "nonlinear") return FusionMode::kNonlinear;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Config and parameters

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  if (pretrain_epochs < 0)
    throw Error(ErrorCode::kInvalidArgument, "pretrain epochs must be >= 0");
  if (batch_size < 3)
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 3");
  if (!std::isfinite(lr) || lr < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be finite and >= 0");
  if (!std::isfinite(alpha) || alpha <= 0.0)
    throw Error(ErrorCode::kInvalidArgument, "alpha must be > 0");
  for (std::size_t h : hidden)
    if (h == 0) throw Error(ErrorCode::kInvalidArgument, "hidden widths must be > 0");
  cost.validate();
  if (loss == LossVariant::kV1)
    loss_weights.validate_v1();
  else
    loss_weights.validate_v2();
}

double ModelParams::rho_tilde() const { return sigmoid(rho_logit); }

FusionConfig ModelParams::fusion() const {
  return FusionConfig{fusion_mode, rho_tilde()};
}

void ModelParams::validate() const {
  if (asv_dim == 0 || cm_dim == 0)
    throw Error(ErrorCode::kShapeMismatch, "model: asv_dim and cm_dim must be > 0");
  switch (architecture) {
    case Architecture::kMlpMlp:
      if (!asv_mlp || asv_weights)
        throw Error(ErrorCode::kShapeMismatch, "model: mlp-mlp needs exactly an ASV MLP");
      asv_mlp->validate();
      if (asv_mlp->input_dim() != 2 * asv_dim)
        throw Error(ErrorCode::kShapeMismatch, "model: ASV MLP input must be 2*asv_dim");
      break;
    case Architecture::kCosineMlp:
      if (asv_mlp || asv_weights)
        throw Error(ErrorCode::kShapeMismatch, "model: cosine-mlp has no ASV head parameters");
      break;
    case Architecture::kWeightedCosineMlp:
      if (asv_mlp || !asv_weights)
        throw Error(ErrorCode::kShapeMismatch, "model: wcos-mlp needs exactly an ASV weight vector");
      if (static_cast<std::size_t>(asv_weights->w.size()) != asv_dim)
        throw Error(ErrorCode::kShapeMismatch, "model: ASV weight vector length != asv_dim");
      if (!asv_weights->w.allFinite())
        throw Error(ErrorCode::kInvalidArgument, "model: non-finite ASV weights");
      break;
  }
  cm_mlp.validate();
  if (cm_mlp.input_dim() != asv_dim + cm_dim)
    throw Error(ErrorCode::kShapeMismatch, "model: CM MLP input must be asv_dim+cm_dim");
  for (double v : {asv_calibration.w0, asv_calibration.w1, cm_calibration.w0,
                   cm_calibration.w1, rho_logit, tau}) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::kInvalidArgument, "model: non-finite scalar parameter");
  }
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  if (z.asv_mlp) z.asv_mlp = zero_mlp_like(*asv_mlp);
  if (z.asv_weights) z.asv_weights->w.setZero();
  z.cm_mlp = zero_mlp_like(cm_mlp);
  z.asv_calibration = {0.0, 0.0};
  z.cm_calibration = {0.0, 0.0};
  z.rho_logit = 0.0;
  z.tau = 0.0;
  return z;
}

ModelParams init_model(const TrainConfig& config, std::size_t asv_dim,
                       std::size_t cm_dim) {
  config.validate();
  if (asv_dim == 0 || cm_dim == 0)
    throw Error(ErrorCode::kInvalidArgument, "init_model: dims must be > 0");
  ModelParams m;
  m.architecture = config.architecture;
  m.asv_dim = asv_dim;
  m.cm_dim = cm_dim;
  if (config.architecture == Architecture::kMlpMlp) {
    CounterRng rng(derive_seed(config.seed, kSaltAsvInit));
    m.asv_mlp = MlpParams::random(2 * asv_dim, config.hidden,
                                  config.hidden_activation, rng);
  } else if (config.architecture == Architecture::kWeightedCosineMlp) {
    m.asv_weights = WeightedCosineParams::ones(asv_dim);
  }
  CounterRng rng(derive_seed(config.seed, kSaltCmInit));
  m.cm_mlp = MlpParams::random(asv_dim + cm_dim, config.hidden,
                               config.hidden_activation, rng);
  m.fusion_mode = config.fusion;
  const double rho = std::clamp(derive_rho(config.cost), kRhoClamp, 1.0 - kRhoClamp);
  m.rho_logit = logit(rho);
  m.tau = 0.0;
  return m;
}

TrainableMask joint_trainables(const TrainConfig& config) {
  TrainableMask m;
  m.asv_head = config.architecture != Architecture::kCosineMlp;
  m.cm_head = true;
  m.asv_calibration = true;
  m.cm_calibration = true;
  m.rho = config.fusion == FusionMode::kNonlinear;
  const bool uses_adcf = config.loss == LossVariant::kV1
                             ? config.loss_weights.beta1 > 0.0
                             : config.loss_weights.lambda1 > 0.0;
  m.tau = uses_adcf;
  return m;
}

std::vector<std::span<double>> parameter_blocks(ModelParams& params,
                                                const TrainableMask& mask) {
  std::vector<std::span<double>> out;
  if (mask.asv_head) {
    if (params.asv_mlp) push_mlp_blocks(*params.asv_mlp, out);
    if (params.asv_weights)
      out.emplace_back(params.asv_weights->w.data(),
                       static_cast<std::size_t>(params.asv_weights->w.size()));
  }
  if (mask.cm_head) push_mlp_blocks(params.cm_mlp, out);
  if (mask.asv_calibration) {
    out.emplace_back(&params.asv_calibration.w0, 1);
    out.emplace_back(&params.asv_calibration.w1, 1);
  }
  if (mask.cm_calibration) {
    out.emplace_back(&params.cm_calibration.w0, 1);
    out.emplace_back(&params.cm_calibration.w1, 1);
  }
  if (mask.rho) out.emplace_back(&params.rho_logit, 1);
  if (mask.tau) out.emplace_back(&params.tau, 1);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

namespace {

void check_blocks(const ParamBlocks& params, const GradBlocks& grads) {
  if (params.size() != grads.size())
    throw Error(ErrorCode::kShapeMismatch, "optimizer: parameter/gradient block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size())
      throw Error(ErrorCode::kShapeMismatch,
                  "optimizer: block " + std::to_string(b) + " size mismatch");
  }
}

void check_lr(double lr) {
  if (!std::isfinite(lr) || lr < 0.0)
    throw Error(ErrorCode::kInvalidArgument, "optimizer: lr must be finite and >= 0");
}

}  // namespace

void sgd_step(const ParamBlocks& params, const GradBlocks& grads,
              OptimizerState& state) {
  check_blocks(params, grads);
  check_lr(state.lr);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= state.lr * g[i];
  }
  ++state.step;
}

void adam_step(const ParamBlocks& params, const GradBlocks& grads,
               OptimizerState& state) {
  check_blocks(params, grads);
  check_lr(state.lr);
  if (state.first_moment.empty() && state.second_moment.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw Error(ErrorCode::kShapeMismatch, "adam: moment block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (state.first_moment[b].size() != params[b].size() ||
        state.second_moment[b].size() != params[b].size())
      throw Error(ErrorCode::kShapeMismatch,
                  "adam: moment block " + std::to_string(b) + " size mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      p[i] -= state.lr * mh / (std::sqrt(vh) + state.eps);
    }
  }
}

void optimizer_step(const ParamBlocks& params, const GradBlocks& grads,
                    OptimizerState& state) {
  if (state.kind == OptimizerKind::kSgd)
    sgd_step(params, grads, state);
  else
    adam_step(params, grads, state);
}

// ---------------------------------------------------------------------------
// Data and forward pass

PreparedTrials prepare_trials(const EmbeddingStore& asv, const EmbeddingStore& cm,
                              std::span<const TrialRecord> trials) {
  PreparedTrials p;
  p.enroll_row.reserve(trials.size());
  p.test_row.reserve(trials.size());
  p.test_cm_row.reserve(trials.size());
  p.labels.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (!asv.contains(t.enroll_id))
      throw Error(ErrorCode::kUnknownId, "trial " + std::to_string(i + 1) +
                                             ": enrollment id '" + t.enroll_id +
                                             "' not in ASV embeddings");
    if (!asv.contains(t.test_id))
      throw Error(ErrorCode::kUnknownId, "trial " + std::to_string(i + 1) +
                                             ": test id '" + t.test_id +
                                             "' not in ASV embeddings");
    if (!cm.contains(t.test_id))
      throw Error(ErrorCode::kUnknownId, "trial " + std::to_string(i + 1) +
                                             ": test id '" + t.test_id +
                                             "' not in CM embeddings");
    p.enroll_row.push_back(asv.index_of(t.enroll_id));
    p.test_row.push_back(asv.index_of(t.test_id));
    p.test_cm_row.push_back(cm.index_of(t.test_id));
    p.labels.push_back(t.label);
  }
  return p;
}

ForwardScores forward_scores(const ModelParams& params, const EmbeddingStore& asv,
                             const EmbeddingStore& cm, const PreparedTrials& trials,
                             std::span<const std::size_t> indices) {
  ForwardScores out;
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t len = std::min(kEvalChunk, indices.size() - start);
    auto c = forward_impl(params, asv, cm, trials, indices.subspan(start, len), false);
    auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    append(out.s_asv, c.scores.s_asv);
    append(out.s_cm, c.scores.s_cm);
    append(out.llr_asv, c.scores.llr_asv);
    append(out.llr_cm, c.scores.llr_cm);
    append(out.s_sasv, c.scores.s_sasv);
  }
  return out;
}

std::vector<ScoredTrial> score_trials(const ModelParams& params,
                                      const EmbeddingStore& asv,
                                      const EmbeddingStore& cm,
                                      std::span<const TrialRecord> trials) {
  params.validate();
  if (asv.dim() != params.asv_dim || cm.dim() != params.cm_dim)
    throw Error(ErrorCode::kShapeMismatch, "embedding dims do not match the model");
  const PreparedTrials prepared = prepare_trials(asv, cm, trials);
  std::vector<std::size_t> idx(prepared.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const ForwardScores f = forward_scores(params, asv, cm, prepared, idx);
  std::vector<ScoredTrial> out(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out[i].trial = trials[i];
    out[i].s_asv_raw = f.s_asv[i];
    out[i].s_cm_raw = f.s_cm[i];
    out[i].llr_asv = f.llr_asv[i];
    out[i].llr_cm = f.llr_cm[i];
    out[i].s_sasv = f.s_sasv[i];
  }
  return out;
}

BatchLoss batch_loss(const ModelParams& params, const EmbeddingStore& asv,
                     const EmbeddingStore& cm, const PreparedTrials& trials,
                     std::span<const std::size_t> indices,
                     const TrainConfig& config, Objective objective,
                     bool with_grad) {
  if (indices.empty()) throw Error(ErrorCode::kEmptyClass, "batch_loss: empty batch");
  const std::size_t n = indices.size();
  ForwardCache c = forward_impl(params, asv, cm, trials, indices, with_grad);
  const auto& s = c.scores;

  SoftAdcfConfig sc{config.cost, params.tau, config.alpha, config.normalized_loss};
  CombinedLossResult r;
  switch (objective) {
    case Objective::kJoint:
      r = config.loss == LossVariant::kV1
              ? combined_loss_v1(s.s_sasv, c.labels, config.loss_weights, sc)
              : combined_loss_v2(s.llr_asv, s.llr_cm, s.s_sasv, c.labels,
                                 config.loss_weights, sc);
      break;
    case Objective::kAsvAux:
      r = combined_loss_v2(s.llr_asv, s.llr_cm, s.s_sasv, c.labels,
                           LossWeights{0, 0, 0.0, 1.0, 0.0}, sc);
      break;
    case Objective::kCmAux:
      r = combined_loss_v2(s.llr_asv, s.llr_cm, s.s_sasv, c.labels,
                           LossWeights{0, 0, 0.0, 0.0, 1.0}, sc);
      break;
  }

  BatchLoss out;
  out.loss = r.loss;
  if (!with_grad) return out;

  ModelParams& g = out.grad = params.zeros_like();
  const auto source = objective == Objective::kJoint ? config.calibration_grad
                                                     : CalibrationGradSource::kBoth;
  const bool use_fusion = source != CalibrationGradSource::kAuxOnly;
  const bool use_aux = source != CalibrationGradSource::kFusionOnly;

  Eigen::VectorXd d_s_asv(n), d_s_cm(n);
  double rho_grad = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const FusionGrad& fg = c.fusion[j];
    const double da_fusion = r.d_sasv[j] * fg.d_asv;
    const double dc_fusion = r.d_sasv[j] * fg.d_cm;
    const double da_aux = r.d_asv[j];
    const double dc_aux = r.d_cm[j];
    const double da_cal = (use_fusion ? da_fusion : 0.0) + (use_aux ? da_aux : 0.0);
    const double dc_cal = (use_fusion ? dc_fusion : 0.0) + (use_aux ? dc_aux : 0.0);
    g.asv_calibration.w0 += da_cal;
    g.asv_calibration.w1 += da_cal * s.s_asv[j];
    g.cm_calibration.w0 += dc_cal;
    g.cm_calibration.w1 += dc_cal * s.s_cm[j];
    d_s_asv(j) = (da_fusion + da_aux) * params.asv_calibration.w1;
    d_s_cm(j) = (dc_fusion + dc_aux) * params.cm_calibration.w1;
    rho_grad += r.d_sasv[j] * fg.d_rho;
  }
  if (params.fusion_mode == FusionMode::kNonlinear) {
    const double rt = params.rho_tilde();
    g.rho_logit = rho_grad * rt * (1.0 - rt);
  }
  g.tau = r.d_tau;

  if (params.architecture == Architecture::kMlpMlp) {
    copy_mlp_grad(mlp_backward_batch(*params.asv_mlp, c.asv_mlp->tape, d_s_asv),
                  *g.asv_mlp);
  } else if (params.architecture == Architecture::kWeightedCosineMlp) {
    Eigen::VectorXd& gw = g.asv_weights->w;
    for (std::size_t j = 0; j < n; ++j)
      gw += weighted_cosine_backward(c.asv_wcos[j], d_s_asv(j)).w;
  }
  copy_mlp_grad(mlp_backward_batch(params.cm_mlp, c.cm_mlp.tape, d_s_cm), g.cm_mlp);
  return out;
}

std::vector<std::vector<std::size_t>> make_stratified_batches(
    std::span<const std::size_t> pool, std::span<const TrialLabel> labels,
    std::size_t batch_size, CounterRng& rng) {
  if (pool.empty()) throw Error(ErrorCode::kEmptyClass, "no trials to batch");
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be > 0");
  std::vector<std::vector<std::size_t>> by_class(3);
  for (std::size_t i : pool) {
    if (i >= labels.size())
      throw Error(ErrorCode::kShapeMismatch, "batch pool index out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::size_t smallest = pool.size();
  for (auto& cls : by_class) {
    if (cls.empty()) continue;
    rng.shuffle(std::span<std::size_t>(cls));
    smallest = std::min(smallest, cls.size());
  }
  std::size_t nb = (pool.size() + batch_size - 1) / batch_size;
  nb = std::max<std::size_t>(1, std::min(nb, smallest));
  std::vector<std::vector<std::size_t>> batches(nb);
  for (const auto& cls : by_class) {
    const std::size_t nc = cls.size();
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lo = b * nc / nb;
      const std::size_t hi = (b + 1) * nc / nb;
      batches[b].insert(batches[b].end(), cls.begin() + lo, cls.begin() + hi);
    }
  }
  rng.shuffle(std::span<std::vector<std::size_t>>(batches));
  return batches;
}

// ---------------------------------------------------------------------------
// Training

std::string format_log_line(const EpochLog& entry) {
  nlohmann::ordered_json j;
  j["epoch"] = entry.epoch;
  if (entry.train_loss)
    j["train_loss"] = *entry.train_loss;
  else
    j["train_loss"] = nullptr;
  j["dev_min_adcf"] = entry.dev_min_adcf;
  j["dev_threshold"] = entry.dev_threshold;
  return j.dump();
}

std::pair<double, double> evaluate_dev(const ModelParams& params,
                                       const EmbeddingStore& asv,
                                       const EmbeddingStore& cm,
                                       const PreparedTrials& dev,
                                       const CostModel& cost) {
  std::vector<std::size_t> idx(dev.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const ForwardScores f = forward_scores(params, asv, cm, dev, idx);
  std::vector<LabeledScore> scored(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) scored[i] = {f.s_sasv[i], dev.labels[i]};
  const AdcfReport rep = min_adcf(scored, cost, true);
  return {rep.min_adcf, rep.min_threshold};
}

ModelParams pretrain_heads(const TrainConfig& config, const TrainData& data,
                           ModelParams init) {
  config.validate();
  check_dims(data);
  init.validate();
  if (config.pretrain_epochs == 0) return init;
  const PreparedTrials train = prepare_trials(data.asv, data.cm, data.train);
  require_all_classes(train, "train");
  const PreparedTrials dev = prepare_trials(data.asv, data.cm, data.dev);
  require_all_classes(dev, "dev");

  TrainableMask asv_mask;
  asv_mask.asv_head = init.architecture != Architecture::kCosineMlp;
  asv_mask.asv_calibration = true;
  pretrain_phase(init, config, data, train, Objective::kAsvAux, asv_mask, kSaltPretrainAsv);

  TrainableMask cm_mask;
  cm_mask.cm_head = true;
  cm_mask.cm_calibration = true;
  pretrain_phase(init, config, data, train, Objective::kCmAux, cm_mask, kSaltPretrainCm);
  return init;
}

ModelParams pretrain_heads(const TrainConfig& config, const TrainData& data) {
  check_dims(data);
  return pretrain_heads(config, data, init_model(config, data.asv.dim(), data.cm.dim()));
}

TrainResult train_joint(const TrainConfig& config, const TrainData& data) {
  config.validate();
  check_dims(data);
  const PreparedTrials train = prepare_trials(data.asv, data.cm, data.train);
  require_all_classes(train, "train");
  const PreparedTrials dev = prepare_trials(data.asv, data.cm, data.dev);
  require_all_classes(dev, "dev");

  TrainResult result;
  ModelParams params = init_model(config, data.asv.dim(), data.cm.dim());
  if (config.init == InitKind::kPretrained) params = pretrain_heads(config, data, params);
  result.initial_params = params;

  const TrainableMask mask = joint_trainables(config);
  OptimizerState opt;
  opt.kind = config.optimizer;
  opt.lr = config.lr;
  CounterRng rng(derive_seed(config.seed, kSaltShuffle));

  std::vector<std::size_t> pool(train.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});

  auto [m0, t0] = evaluate_dev(params, data.asv, data.cm, dev, config.cost);
  result.log.push_back({0, std::nullopt, m0, t0});
  result.best = {0, params, m0, t0};

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_stratified_batches(pool, train.labels, config.batch_size, rng);
    double total = 0.0;
    for (const auto& batch : batches) {
      BatchLoss bl = batch_loss(params, data.asv, data.cm, train, batch, config,
                                Objective::kJoint, true);
      if (!std::isfinite(bl.loss))
        throw Error(ErrorCode::kNonConvergence,
                    "training diverged at epoch " + std::to_string(epoch));
      const auto p = parameter_blocks(params, mask);
      const auto g = parameter_blocks(bl.grad, mask);
      optimizer_step(p, GradBlocks(g.begin(), g.end()), opt);
      total += bl.loss;
    }
    const double train_loss = total / static_cast<double>(batches.size());
    auto [m, t] = evaluate_dev(params, data.asv, data.cm, dev, config.cost);
    result.log.push_back({epoch, train_loss, m, t});
    if (m < result.best.dev_min_adcf) result.best = {epoch, params, m, t};
  }
  result.final_params = params;
  return result;
}

}  // namespace sasv
