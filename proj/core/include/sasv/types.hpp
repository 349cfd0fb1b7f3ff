// core/include/sasv/types.hpp

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

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sasv {

enum class ErrorCode {
  kInvalidArgument,
  kDegeneratePriors,
  kEmptyClass,
  kShapeMismatch,
  kZeroNorm,
  kNonConvergence,
  kParse,
  kIo,
  kUnknownId,
};

const char* ErrorCodeName(ErrorCode code);

/// All library failures are reported as sasv::Error. The code lets callers
/// (and the CLI) tell user mistakes apart from data problems without string
/// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Labels

enum class TrialLabel { kTargetBonafide, kNontargetBonafide, kSpoof };

inline constexpr TrialLabel kAllLabels[] = {TrialLabel::kTargetBonafide,
                                            TrialLabel::kNontargetBonafide,
                                            TrialLabel::kSpoof};

/// Binary supervision derived from a three-class label. Spoof trials carry no
/// speaker label: the ASV auxiliary objective only contrasts bona fide target
/// against bona fide nontarget.
struct LabelBits {
  int sasv;
  std::optional<int> asv;
  int cm;
};

LabelBits label_maps(TrialLabel label);

/// Protocol spelling: "target", "nontarget", "spoof".
std::string_view label_name(TrialLabel label);
std::optional<TrialLabel> parse_label(std::string_view name);

struct TrialRecord {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kTargetBonafide;

  bool operator==(const TrialRecord&) const = default;
};

/// True if `id` is non-empty and free of tab, CR and LF characters.
bool is_valid_id(std::string_view id);
void validate_trial(const TrialRecord& trial);

// ---------------------------------------------------------------------------
// Costs and priors

/// Decision costs and class priors of the three-class SASV task.
struct CostModel {
  double c_miss_tar = 1.0;
  double c_fa_non = 10.0;
  double c_fa_spf = 20.0;
  double pi_tar = 0.9;
  double pi_non = 0.05;
  double pi_spf = 0.05;

  /// Builds and validates. Priors must sum to one within 1e-9 unless
  /// `renormalize` is set, in which case they are divided by their sum.
  static CostModel make(double c_miss_tar, double c_fa_non, double c_fa_spf,
                        double pi_tar, double pi_non, double pi_spf,
                        bool renormalize = false);

  /// Throws kInvalidArgument / kDegeneratePriors when an invariant fails.
  void validate() const;

  /// Weights of the three error rates in the expected cost.
  double weight_miss_tar() const { return c_miss_tar * pi_tar; }
  double weight_fa_non() const { return c_fa_non * pi_non; }
  double weight_fa_spf() const { return c_fa_spf * pi_spf; }

  /// Cost of the best blind system: min(reject-all, accept-all).
  double default_cost() const;

  bool operator==(const CostModel&) const = default;
};

/// Spoof prevalence prior: the spoofed share of the non-target mass.
double derive_rho(const CostModel& cm);

/// Prior odds of a bona fide target.
double derive_beta(const CostModel& cm);

// ---------------------------------------------------------------------------
// Embeddings

/// Named fixed-dimension vectors. Insertion order is preserved so that a
/// store written to disk and read back serializes to the same bytes.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// Throws on wrong length, non-finite components, invalid or duplicate id.
  void insert(const std::string& id, std::span<const double> values);

  bool contains(const std::string& id) const;
  /// Throws kUnknownId if absent.
  std::span<const double> at(const std::string& id) const;
  /// Index-based access in insertion order.
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const double> row(std::size_t i) const;
  std::size_t index_of(const std::string& id) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;  // row-major, size() x dim()
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Scores

/// A single detection score with its ground truth.
struct LabeledScore {
  double score = 0.0;
  TrialLabel label = TrialLabel::kTargetBonafide;
};

struct ScoredTrial {
  TrialRecord trial;
  double s_asv_raw = 0.0;
  double s_cm_raw = 0.0;
  std::optional<double> llr_asv;
  std::optional<double> llr_cm;
  std::optional<double> s_sasv;
};

}  // namespace sasv
