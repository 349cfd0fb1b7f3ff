// core/src/types.cpp

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

#include "sasv/types.hpp"

#include <algorithm>
#include <cmath>

namespace sasv {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDegeneratePriors: return "degenerate-priors";
    case ErrorCode::kEmptyClass: return "empty-class";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kZeroNorm: return "zero-norm";
    case ErrorCode::kNonConvergence: return "non-convergence";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUnknownId: return "unknown-id";
  }
  return "unknown";
}

LabelBits label_maps(TrialLabel label) {
  switch (label) {
    case TrialLabel::kTargetBonafide: return {1, 1, 1};
    case TrialLabel::kNontargetBonafide: return {0, 0, 1};
    case TrialLabel::kSpoof: return {0, std::nullopt, 0};
  }
  throw Error(ErrorCode::kInvalidArgument, "label_maps: bad label");
}

std::string_view label_name(TrialLabel label) {
  switch (label) {
    case TrialLabel::kTargetBonafide: return "target";
    case TrialLabel::kNontargetBonafide: return "nontarget";
    case TrialLabel::kSpoof: return "spoof";
  }
  return "?";
}

std::optional<TrialLabel> parse_label(std::string_view name) {
  if (name == "target") return TrialLabel::kTargetBonafide;
  if (name == "nontarget") return TrialLabel::kNontargetBonafide;
  if (name == "spoof") return TrialLabel::kSpoof;
  return std::nullopt;
}

bool is_valid_id(std::string_view id) {
  return !id.empty() && id.find_first_of("\t\r\n") == std::string_view::npos;
}

void validate_trial(const TrialRecord& trial) {
  if (!is_valid_id(trial.enroll_id) || !is_valid_id(trial.test_id))
    throw Error(ErrorCode::kInvalidArgument,
                "trial ids must be non-empty and contain no tab/newline");
}

CostModel CostModel::make(double c_miss_tar, double c_fa_non, double c_fa_spf,
                          double pi_tar, double pi_non, double pi_spf,
                          bool renormalize) {
  CostModel cm{c_miss_tar, c_fa_non, c_fa_spf, pi_tar, pi_non, pi_spf};
  if (renormalize) {
    const double total = pi_tar + pi_non + pi_spf;
    if (!(total > 0.0) || !std::isfinite(total))
      throw Error(ErrorCode::kDegeneratePriors,
                  "cannot renormalize priors with non-positive sum");
    cm.pi_tar /= total;
    cm.pi_non /= total;
    cm.pi_spf /= total;
  }
  cm.validate();
  return cm;
}

void CostModel::validate() const {
  for (double c : {c_miss_tar, c_fa_non, c_fa_spf}) {
    if (!std::isfinite(c) || c < 0.0)
      throw Error(ErrorCode::kInvalidArgument,
                  "costs must be finite and non-negative");
  }
  if (c_miss_tar == 0.0 && c_fa_non == 0.0 && c_fa_spf == 0.0)
    throw Error(ErrorCode::kInvalidArgument, "at least one cost must be > 0");
  if (!(pi_tar > 0.0 && pi_tar < 1.0))
    throw Error(ErrorCode::kDegeneratePriors, "pi_tar must lie in (0,1)");
  if (!(pi_non >= 0.0 && pi_non < 1.0) || !(pi_spf >= 0.0 && pi_spf < 1.0))
    throw Error(ErrorCode::kDegeneratePriors,
                "pi_non and pi_spf must lie in [0,1)");
  if (std::abs(pi_tar + pi_non + pi_spf - 1.0) > 1e-9)
    throw Error(ErrorCode::kDegeneratePriors,
                "priors must sum to 1 (use renormalization explicitly)");
}

double CostModel::default_cost() const {
  return std::min(weight_miss_tar(), weight_fa_non() + weight_fa_spf());
}

double derive_rho(const CostModel& cm) {
  const double neg = cm.pi_non + cm.pi_spf;
  if (!(neg > 0.0))
    throw Error(ErrorCode::kDegeneratePriors,
                "rho undefined: pi_non + pi_spf = 0");
  return cm.pi_spf / neg;
}

double derive_beta(const CostModel& cm) {
  if (!(cm.pi_tar > 0.0 && cm.pi_tar < 1.0))
    throw Error(ErrorCode::kInvalidArgument, "beta undefined: pi_tar not in (0,1)");
  return cm.pi_tar / (1.0 - cm.pi_tar);
}

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0)
    throw Error(ErrorCode::kInvalidArgument, "embedding dim must be positive");
}

void EmbeddingStore::insert(const std::string& id,
                            std::span<const double> values) {
  if (dim_ == 0)
    throw Error(ErrorCode::kInvalidArgument, "embedding store has no dim");
  if (!is_valid_id(id))
    throw Error(ErrorCode::kInvalidArgument, "invalid embedding id '" + id + "'");
  if (values.size() != dim_)
    throw Error(ErrorCode::kShapeMismatch,
                "embedding '" + id + "' has length " +
                    std::to_string(values.size()) + ", expected " +
                    std::to_string(dim_));
  for (double v : values) {
    if (!std::isfinite(v))
      throw Error(ErrorCode::kInvalidArgument,
                  "embedding '" + id + "' has a non-finite component");
  }
  if (index_.count(id))
    throw Error(ErrorCode::kInvalidArgument, "duplicate embedding id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  values_.insert(values_.end(), values.begin(), values.end());
}

bool EmbeddingStore::contains(const std::string& id) const {
  return index_.count(id) != 0;
}

std::size_t EmbeddingStore::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end())
    throw Error(ErrorCode::kUnknownId, "unknown embedding id '" + id + "'");
  return it->second;
}

std::span<const double> EmbeddingStore::at(const std::string& id) const {
  return row(index_of(id));
}

std::span<const double> EmbeddingStore::row(std::size_t i) const {
  return std::span<const double>(values_.data() + i * dim_, dim_);
}

}  // namespace sasv
