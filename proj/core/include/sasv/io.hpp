// core/include/sasv/io.hpp

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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sasv/decision.hpp"
#include "sasv/metrics.hpp"
#include "sasv/sim.hpp"
#include "sasv/train.hpp"
#include "sasv/types.hpp"

namespace sasv {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Whole-string decimal parse; nullopt on junk, overflow or non-finite.
std::optional<double> parse_double(std::string_view text);

/// Reads a whole file. Throws kIo.
std::string read_file(const std::string& path);
/// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

// ---------------------------------------------------------------------------
// Protocol TSV: enroll_id TAB test_id TAB label; '#' lines are comments.

std::vector<TrialRecord> parse_protocol(std::string_view text,
                                        std::vector<std::string>* warnings = nullptr);
std::string format_protocol(const std::vector<TrialRecord>& trials);
std::vector<TrialRecord> read_protocol(const std::string& path,
                                       std::vector<std::string>* warnings = nullptr);
void write_protocol(const std::string& path, const std::vector<TrialRecord>& trials);

// ---------------------------------------------------------------------------
// Score TSV: enroll_id TAB test_id TAB score TAB label

struct ScoreRecord {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  TrialLabel label = TrialLabel::kTargetBonafide;

  bool operator==(const ScoreRecord&) const = default;
};

std::vector<ScoreRecord> parse_scores(std::string_view text,
                                      std::vector<std::string>* warnings = nullptr);
std::string format_scores(const std::vector<ScoreRecord>& scores);
std::vector<ScoreRecord> read_scores(const std::string& path,
                                     std::vector<std::string>* warnings = nullptr);
void write_scores(const std::string& path, const std::vector<ScoreRecord>& scores);

std::vector<LabeledScore> to_labeled(const std::vector<ScoreRecord>& scores);

// ---------------------------------------------------------------------------
// Embedding binary, little-endian:
//   "SASVEMB1" | u8 version=1 | u32 count | u32 dim |
//   count x (u16 id length | id bytes | dim x f32)

inline constexpr char kEmbeddingMagic[8] = {'S', 'A', 'S', 'V', 'E', 'M', 'B', '1'};
inline constexpr unsigned kEmbeddingVersion = 1;

std::string encode_embeddings(const EmbeddingStore& store);
EmbeddingStore decode_embeddings(std::string_view bytes);
EmbeddingStore read_embeddings(const std::string& path);
void write_embeddings(const std::string& path, const EmbeddingStore& store);

// ---------------------------------------------------------------------------
// Checkpoint JSON

struct CheckpointFile {
  ModelParams params;
  std::optional<TrainConfig> config;
  int epoch = 0;
  std::optional<double> dev_min_adcf;
  std::optional<double> dev_threshold;
};

std::string format_checkpoint(const CheckpointFile& ckpt);
CheckpointFile parse_checkpoint(std::string_view text);
CheckpointFile read_checkpoint(const std::string& path);
void write_checkpoint(const std::string& path, const CheckpointFile& ckpt);

// ---------------------------------------------------------------------------
// Calibration JSON

enum class CalibrationTask { kAsv, kCm };

struct CalibrationFile {
  CalibrationTask task = CalibrationTask::kAsv;
  CalibrationFit fit;
};

std::string format_calibration(const CalibrationFile& c);
CalibrationFile parse_calibration(std::string_view text);

// ---------------------------------------------------------------------------
// Report JSON

struct EvalReport {
  CostModel cost;
  AdcfReport adcf;
  std::optional<EerResult> sv_eer;
  std::optional<EerResult> spf_eer;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
  std::size_t n_spoof = 0;
};

std::string format_report(const EvalReport& report);

// ---------------------------------------------------------------------------
// CSV

/// Header "p_fa,p_miss"; values printed with %.12g.
std::string format_det_csv(const std::vector<DetPoint>& points);
/// Header "llr_asv,llr_cm,s_sasv,accept"; accept is 0 or 1.
std::string format_grid_csv(const std::vector<GridNode>& nodes);

// ---------------------------------------------------------------------------
// Simulation configs. Missing keys keep their defaults; unknown keys fail.

ScoreSimConfig parse_score_sim_config(std::string_view text);
EmbeddingSimConfig parse_embedding_sim_config(std::string_view text);

}  // namespace sasv
