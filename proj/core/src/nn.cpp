// core/src/nn.cpp

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

#include "sasv/nn.hpp"

#include <cmath>
#include <string>

namespace sasv {
namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::kIdentity: return z;
    case Activation::kLeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakyReluSlope * v; });
    case Activation::kRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
    case Activation::kTanh:
      return z.array().tanh().matrix();
  }
  return z;
}

// Elementwise derivative of the activation at the pre-activation z.
Eigen::MatrixXd activation_slope(const Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::kLeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakyReluSlope; });
    case Activation::kRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kTanh:
      return (1.0 - z.array().tanh().square()).matrix();
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

std::vector<DenseLayer> layer_shapes(std::size_t input_dim,
                                     std::span<const std::size_t> hidden,
                                     Activation hidden_activation) {
  if (input_dim == 0)
    throw Error(ErrorCode::kInvalidArgument, "MLP input dim must be positive");
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  for (std::size_t width : hidden) {
    if (width == 0)
      throw Error(ErrorCode::kInvalidArgument, "MLP hidden width must be positive");
    layers.push_back({Eigen::MatrixXd::Zero(width, in), Eigen::VectorXd::Zero(width),
                      hidden_activation});
    in = width;
  }
  layers.push_back({Eigen::MatrixXd::Zero(1, in), Eigen::VectorXd::Zero(1),
                    Activation::kIdentity});
  return layers;
}

void check_tape(const MlpParams& p, const MlpTape& tape) {
  if (tape.pre.size() != p.layers.size() || tape.post.size() != p.layers.size() ||
      static_cast<std::size_t>(tape.input.rows()) != p.input_dim())
    throw Error(ErrorCode::kShapeMismatch, "MLP tape does not match parameters");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (tape.pre[l].rows() != p.layers[l].weight.rows() ||
        tape.pre[l].cols() != tape.input.cols())
      throw Error(ErrorCode::kShapeMismatch,
                  "MLP tape layer " + std::to_string(l) + " does not match parameters");
  }
}

}  // namespace

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  return std::nullopt;
}

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw Error(ErrorCode::kShapeMismatch, "MLP has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows())
      throw Error(ErrorCode::kShapeMismatch,
                  "MLP layer " + std::to_string(l) + ": bias/weight rows differ");
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows())
      throw Error(ErrorCode::kShapeMismatch,
                  "MLP layer " + std::to_string(l) + ": input width does not chain");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw Error(ErrorCode::kInvalidArgument,
                  "MLP layer " + std::to_string(l) + ": non-finite parameter");
  }
  if (layers.back().weight.rows() != 1)
    throw Error(ErrorCode::kShapeMismatch, "MLP must end in a single output");
}

MlpParams MlpParams::zeros(std::size_t input_dim,
                           std::span<const std::size_t> hidden,
                           Activation hidden_activation) {
  return {layer_shapes(input_dim, hidden, hidden_activation)};
}

MlpParams MlpParams::random(std::size_t input_dim,
                            std::span<const std::size_t> hidden,
                            Activation hidden_activation, CounterRng& rng) {
  MlpParams p{layer_shapes(input_dim, hidden, hidden_activation)};
  for (auto& layer : p.layers) {
    const double bound = std::sqrt(1.0 / static_cast<double>(layer.weight.cols()));
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < layer.weight.size(); ++j)
      layer.weight.data()[j] = rng.uniform(-bound, bound);
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j)
      layer.bias[j] = rng.uniform(-bound, bound);
  }
  return p;
}

MlpBatchOutput mlp_forward_batch(const MlpParams& p,
                                 const Eigen::MatrixXd& inputs) {
  if (p.layers.empty() || static_cast<std::size_t>(inputs.rows()) != p.input_dim())
    throw Error(ErrorCode::kShapeMismatch,
                "mlp_forward: input has " + std::to_string(inputs.rows()) +
                    " rows, expected " + std::to_string(p.input_dim()));
  MlpBatchOutput out;
  out.tape.input = inputs;
  out.tape.pre.reserve(p.layers.size());
  out.tape.post.reserve(p.layers.size());
  const Eigen::MatrixXd* x = &out.tape.input;
  for (const auto& layer : p.layers) {
    Eigen::MatrixXd z = layer.weight * (*x);
    z.colwise() += layer.bias;
    out.tape.post.push_back(activate(z, layer.activation));
    out.tape.pre.push_back(std::move(z));
    x = &out.tape.post.back();
  }
  out.scores = out.tape.post.back().row(0).transpose();
  return out;
}

MlpForward mlp_forward(const MlpParams& p, std::span<const double> x) {
  Eigen::MatrixXd input(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) input(static_cast<Eigen::Index>(i), 0) = x[i];
  auto batch = mlp_forward_batch(p, input);
  return {batch.scores[0], std::move(batch.tape)};
}

MlpGrad mlp_backward_batch(const MlpParams& p, const MlpTape& tape,
                           const Eigen::VectorXd& upstream) {
  check_tape(p, tape);
  if (upstream.size() != tape.input.cols())
    throw Error(ErrorCode::kShapeMismatch, "mlp_backward: upstream size mismatch");
  MlpGrad grad;
  grad.layers.resize(p.layers.size());
  Eigen::MatrixXd delta = upstream.transpose();  // 1 x batch
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    delta = delta.cwiseProduct(activation_slope(tape.pre[l], layer.activation));
    const Eigen::MatrixXd& x = l == 0 ? tape.input : tape.post[l - 1];
    grad.layers[l].weight = delta * x.transpose();
    grad.layers[l].bias = delta.rowwise().sum();
    delta = layer.weight.transpose() * delta;
  }
  grad.input = std::move(delta);
  return grad;
}

MlpGrad mlp_backward(const MlpParams& p, const MlpTape& tape, double upstream) {
  Eigen::VectorXd u = Eigen::VectorXd::Constant(tape.input.cols(), upstream);
  return mlp_backward_batch(p, tape, u);
}

double cosine_score(std::span<const double> e1, std::span<const double> e2) {
  if (e1.size() != e2.size())
    throw Error(ErrorCode::kShapeMismatch, "cosine_score: length mismatch");
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    dot += e1[i] * e2[i];
    n1 += e1[i] * e1[i];
    n2 += e2[i] * e2[i];
  }
  if (n1 == 0.0 || n2 == 0.0)
    throw Error(ErrorCode::kZeroNorm, "cosine_score: zero-norm vector");
  return dot / (std::sqrt(n1) * std::sqrt(n2));
}

WeightedCosineParams WeightedCosineParams::ones(std::size_t dim) {
  return {Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))};
}

WeightedCosineForward weighted_cosine_score(const WeightedCosineParams& p,
                                            std::span<const double> enroll,
                                            std::span<const double> test) {
  const auto n = static_cast<std::size_t>(p.w.size());
  if (enroll.size() != n || test.size() != n)
    throw Error(ErrorCode::kShapeMismatch, "weighted_cosine_score: length mismatch");
  WeightedCosineForward out;
  auto& t = out.tape;
  t.w = p.w;
  t.enroll = Eigen::Map<const Eigen::VectorXd>(enroll.data(), static_cast<Eigen::Index>(n));
  t.test = Eigen::Map<const Eigen::VectorXd>(test.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd a = t.w.cwiseProduct(t.enroll);
  const Eigen::VectorXd b = t.w.cwiseProduct(t.test);
  t.norm_enroll = a.norm();
  t.norm_test = b.norm();
  if (t.norm_enroll == 0.0 || t.norm_test == 0.0)
    throw Error(ErrorCode::kZeroNorm, "weighted_cosine_score: zero norm after weighting");
  t.score = a.dot(b) / (t.norm_enroll * t.norm_test);
  out.score = t.score;
  return out;
}

WeightedCosineGrad weighted_cosine_backward(const WeightedCosineTape& t,
                                            double upstream) {
  if (t.enroll.size() != t.w.size() || t.test.size() != t.w.size() ||
      t.norm_enroll == 0.0 || t.norm_test == 0.0)
    throw Error(ErrorCode::kShapeMismatch, "weighted_cosine_backward: invalid tape");
  const Eigen::VectorXd a = t.w.cwiseProduct(t.enroll);
  const Eigen::VectorXd b = t.w.cwiseProduct(t.test);
  const double nn = t.norm_enroll * t.norm_test;
  const Eigen::VectorXd ds_da =
      b / nn - (t.score / (t.norm_enroll * t.norm_enroll)) * a;
  const Eigen::VectorXd ds_db =
      a / nn - (t.score / (t.norm_test * t.norm_test)) * b;
  WeightedCosineGrad g;
  g.w = upstream * (ds_da.cwiseProduct(t.enroll) + ds_db.cwiseProduct(t.test));
  g.enroll = upstream * ds_da.cwiseProduct(t.w);
  g.test = upstream * ds_db.cwiseProduct(t.w);
  return g;
}

}  // namespace sasv
