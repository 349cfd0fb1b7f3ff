// core/include/sasv/nn.hpp

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

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sasv/rng.hpp"
#include "sasv/types.hpp"

namespace sasv {

enum class Activation { kIdentity, kLeakyRelu, kRelu, kTanh };

inline constexpr double kLeakyReluSlope = 0.3;

std::string_view activation_name(Activation a);
std::optional<Activation> parse_activation(std::string_view name);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kIdentity;
};

/// Feed-forward scorer. Hidden layers use their own activation; the last
/// layer has one output unit and is normally linear.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t parameter_count() const;
  /// Shapes chain, last layer emits one value, everything finite.
  void validate() const;

  static MlpParams zeros(std::size_t input_dim,
                         std::span<const std::size_t> hidden,
                         Activation hidden_activation = Activation::kLeakyRelu);
  /// Weights and biases uniform in +-sqrt(1/fan_in).
  static MlpParams random(std::size_t input_dim,
                          std::span<const std::size_t> hidden,
                          Activation hidden_activation, CounterRng& rng);
};

/// Hidden widths of the score-level heads.
inline constexpr std::size_t kDefaultHidden[] = {384, 160};

/// Activation record of a batched forward pass. Samples are columns.
struct MlpTape {
  Eigen::MatrixXd input;             // in x batch
  std::vector<Eigen::MatrixXd> pre;  // per layer, out x batch
  std::vector<Eigen::MatrixXd> post;
};

struct MlpBatchOutput {
  Eigen::VectorXd scores;  // one per column of the input
  MlpTape tape;
};

MlpBatchOutput mlp_forward_batch(const MlpParams& p,
                                 const Eigen::MatrixXd& inputs);

struct MlpForward {
  double score = 0.0;
  MlpTape tape;
};

MlpForward mlp_forward(const MlpParams& p, std::span<const double> x);

struct LayerGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct MlpGrad {
  std::vector<LayerGrad> layers;  // summed over the batch
  Eigen::MatrixXd input;          // in x batch
};

/// Reverse pass for sum_i upstream[i] * score_i.
MlpGrad mlp_backward_batch(const MlpParams& p, const MlpTape& tape,
                           const Eigen::VectorXd& upstream);

MlpGrad mlp_backward(const MlpParams& p, const MlpTape& tape, double upstream);

// ---------------------------------------------------------------------------
// Cosine heads

double cosine_score(std::span<const double> e1, std::span<const double> e2);

struct WeightedCosineParams {
  Eigen::VectorXd w;

  static WeightedCosineParams ones(std::size_t dim);
};

struct WeightedCosineTape {
  Eigen::VectorXd w;
  Eigen::VectorXd enroll;
  Eigen::VectorXd test;
  double norm_enroll = 0.0;  // |w . enroll|
  double norm_test = 0.0;
  double score = 0.0;
};

struct WeightedCosineForward {
  double score = 0.0;
  WeightedCosineTape tape;
};

/// Cosine similarity of w.*enroll and w.*test.
WeightedCosineForward weighted_cosine_score(const WeightedCosineParams& p,
                                            std::span<const double> enroll,
                                            std::span<const double> test);

struct WeightedCosineGrad {
  Eigen::VectorXd w;
  Eigen::VectorXd enroll;
  Eigen::VectorXd test;
};

WeightedCosineGrad weighted_cosine_backward(const WeightedCosineTape& tape,
                                            double upstream);

}  // namespace sasv
