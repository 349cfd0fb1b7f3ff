// core/src/io.cpp

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

#include "sasv/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <utility>

#include <nlohmann/json.hpp>

namespace sasv {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Numbers and files

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  double v = 0.0;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "read error on '" + path + "'");
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write error on '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot move output into place at '" + path + "'");
  }
}

// ---------------------------------------------------------------------------
// TSV

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Calls fn(line_number, fields) for each data row.
template <typename Fn>
void for_each_row(std::string_view text, std::size_t expected_fields,
                  const char* what, Fn&& fn) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != expected_fields)
      throw Error(ErrorCode::kParse, std::string(what) + " line " + std::to_string(lineno) +
                                         ": expected " + std::to_string(expected_fields) +
                                         " tab-separated fields, got " +
                                         std::to_string(fields.size()));
    for (std::size_t i = 0; i < 2; ++i) {
      if (fields[i].empty())
        throw Error(ErrorCode::kParse, std::string(what) + " line " +
                                           std::to_string(lineno) + ": empty id");
    }
    fn(lineno, fields);
  }
}

TrialLabel label_at(std::string_view field, std::size_t lineno, const char* what) {
  auto l = parse_label(field);
  if (!l)
    throw Error(ErrorCode::kParse, std::string(what) + " line " + std::to_string(lineno) +
                                       ": unknown label '" + std::string(field) + "'");
  return *l;
}

void note_duplicate(std::set<std::pair<std::string, std::string>>& seen,
                    const std::string& e, const std::string& t, std::size_t lineno,
                    const char* what, std::vector<std::string>* warnings) {
  if (!seen.emplace(e, t).second && warnings)
    warnings->push_back(std::string(what) + " line " + std::to_string(lineno) +
                        ": duplicate trial (" + e + ", " + t + ")");
}

void check_ids(const std::string& e, const std::string& t) {
  if (!is_valid_id(e) || !is_valid_id(t))
    throw Error(ErrorCode::kInvalidArgument,
                "ids must be non-empty and free of tab/newline characters");
}

}  // namespace

std::vector<TrialRecord> parse_protocol(std::string_view text,
                                        std::vector<std::string>* warnings) {
  std::vector<TrialRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_row(text, 3, "protocol", [&](std::size_t lineno, const auto& f) {
    TrialRecord r{std::string(f[0]), std::string(f[1]), label_at(f[2], lineno, "protocol")};
    note_duplicate(seen, r.enroll_id, r.test_id, lineno, "protocol", warnings);
    out.push_back(std::move(r));
  });
  return out;
}

std::string format_protocol(const std::vector<TrialRecord>& trials) {
  std::string out;
  for (const auto& t : trials) {
    check_ids(t.enroll_id, t.test_id);
    out += t.enroll_id;
    out += '\t';
    out += t.test_id;
    out += '\t';
    out += label_name(t.label);
    out += '\n';
  }
  return out;
}

std::vector<TrialRecord> read_protocol(const std::string& path,
                                       std::vector<std::string>* warnings) {
  return parse_protocol(read_file(path), warnings);
}

void write_protocol(const std::string& path, const std::vector<TrialRecord>& trials) {
  write_file_atomic(path, format_protocol(trials));
}

std::vector<ScoreRecord> parse_scores(std::string_view text,
                                      std::vector<std::string>* warnings) {
  std::vector<ScoreRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_row(text, 4, "scores", [&](std::size_t lineno, const auto& f) {
    auto v = parse_double(f[2]);
    if (!v)
      throw Error(ErrorCode::kParse, "scores line " + std::to_string(lineno) +
                                         ": cannot parse score '" + std::string(f[2]) + "'");
    ScoreRecord r{std::string(f[0]), std::string(f[1]), *v, label_at(f[3], lineno, "scores")};
    note_duplicate(seen, r.enroll_id, r.test_id, lineno, "scores", warnings);
    out.push_back(std::move(r));
  });
  return out;
}

std::string format_scores(const std::vector<ScoreRecord>& scores) {
  std::string out;
  for (const auto& s : scores) {
    check_ids(s.enroll_id, s.test_id);
    if (!std::isfinite(s.score))
      throw Error(ErrorCode::kInvalidArgument, "cannot write a non-finite score");
    out += s.enroll_id;
    out += '\t';
    out += s.test_id;
    out += '\t';
    out += format_double(s.score);
    out += '\t';
    out += label_name(s.label);
    out += '\n';
  }
  return out;
}

std::vector<ScoreRecord> read_scores(const std::string& path,
                                     std::vector<std::string>* warnings) {
  return parse_scores(read_file(path), warnings);
}

void write_scores(const std::string& path, const std::vector<ScoreRecord>& scores) {
  write_file_atomic(path, format_scores(scores));
}

std::vector<LabeledScore> to_labeled(const std::vector<ScoreRecord>& scores) {
  std::vector<LabeledScore> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back({s.score, s.label});
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

namespace {

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::kParse, std::string("embeddings: truncated ") + what +
                                         " at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_embeddings(const EmbeddingStore& store) {
  if (store.dim() == 0)
    throw Error(ErrorCode::kInvalidArgument, "embeddings: store has no dimension");
  if (store.size() > UINT32_MAX || store.dim() > UINT32_MAX)
    throw Error(ErrorCode::kInvalidArgument, "embeddings: store too large");
  std::string out(kEmbeddingMagic, sizeof kEmbeddingMagic);
  put_le<std::uint8_t>(out, kEmbeddingVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& id = store.id(i);
    if (id.size() > UINT16_MAX)
      throw Error(ErrorCode::kInvalidArgument, "embeddings: id longer than 65535 bytes");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (double v : store.row(i))
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

EmbeddingStore decode_embeddings(std::string_view bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(sizeof kEmbeddingMagic, "magic");
  if (std::memcmp(magic.data(), kEmbeddingMagic, sizeof kEmbeddingMagic) != 0)
    throw Error(ErrorCode::kParse, "embeddings: bad magic");
  const auto version = r.get<std::uint8_t>("version");
  if (version != kEmbeddingVersion)
    throw Error(ErrorCode::kParse,
                "embeddings: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("count");
  const auto dim = r.get<std::uint32_t>("dim");
  if (dim == 0) throw Error(ErrorCode::kParse, "embeddings: dim is zero");
  // Each entry needs at least 2 + 4*dim bytes; reject absurd counts early.
  const std::uint64_t min_entry = 2 + 4ull * dim;
  if (count * min_entry > r.remaining())
    throw Error(ErrorCode::kParse, "embeddings: truncated, header declares " +
                                       std::to_string(count) + " entries");
  EmbeddingStore store(dim);
  std::vector<double> values(dim);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = r.get<std::uint16_t>("id length");
    const std::string id(r.take(len, "id"));
    for (std::uint32_t k = 0; k < dim; ++k)
      values[k] = std::bit_cast<float>(r.get<std::uint32_t>("values"));
    try {
      store.insert(id, values);
    } catch (const Error& err) {
      throw Error(ErrorCode::kParse,
                  "embeddings: entry " + std::to_string(e) + ": " + err.what());
    }
  }
  if (r.remaining() != 0)
    throw Error(ErrorCode::kParse, "embeddings: " + std::to_string(r.remaining()) +
                                       " trailing bytes after last entry");
  return store;
}

EmbeddingStore read_embeddings(const std::string& path) {
  return decode_embeddings(read_file(path));
}

void write_embeddings(const std::string& path, const EmbeddingStore& store) {
  write_file_atomic(path, encode_embeddings(store));
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object())
    throw Error(ErrorCode::kParse, "'" + path + "' is not an object");
  auto it = j.find(key);
  if (it == j.end())
    throw Error(ErrorCode::kParse, "missing field '" + path + "." + key + "'");
  return *it;
}

double num(const json& j, const std::string& path) {
  if (!j.is_number())
    throw Error(ErrorCode::kParse, "field '" + path + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw Error(ErrorCode::kParse, "field '" + path + "' must be finite");
  return v;
}

double num(const json& j, const std::string& path, const char* key) {
  return num(field(j, path, key), path + "." + key);
}

std::uint64_t uint(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw Error(ErrorCode::kParse, "field '" + path + "' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

std::uint64_t uint(const json& j, const std::string& path, const char* key) {
  return uint(field(j, path, key), path + "." + key);
}

std::string str(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_string())
    throw Error(ErrorCode::kParse, "field '" + path + "." + key + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const json& j, const std::string& path, const char* key) {
  const json& v = field(j, path, key);
  if (!v.is_boolean())
    throw Error(ErrorCode::kParse, "field '" + path + "." + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& path, std::size_t expected) {
  if (!j.is_array())
    throw Error(ErrorCode::kParse, "field '" + path + "' must be an array");
  if (j.size() != expected)
    throw Error(ErrorCode::kShapeMismatch, "field '" + path + "' has " +
                                               std::to_string(j.size()) +
                                               " numbers, expected " +
                                               std::to_string(expected));
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

ojson cost_to_json(const CostModel& c) {
  ojson j;
  j["c_miss_tar"] = c.c_miss_tar;
  j["c_fa_non"] = c.c_fa_non;
  j["c_fa_spf"] = c.c_fa_spf;
  j["pi_tar"] = c.pi_tar;
  j["pi_non"] = c.pi_non;
  j["pi_spf"] = c.pi_spf;
  return j;
}

CostModel cost_from_json(const json& j, const std::string& path) {
  CostModel c;
  c.c_miss_tar = num(j, path, "c_miss_tar");
  c.c_fa_non = num(j, path, "c_fa_non");
  c.c_fa_spf = num(j, path, "c_fa_spf");
  c.pi_tar = num(j, path, "pi_tar");
  c.pi_non = num(j, path, "pi_non");
  c.pi_spf = num(j, path, "pi_spf");
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, "field '" + path + "': " + e.what());
  }
  return c;
}

ojson mlp_to_json(const MlpParams& p) {
  ojson layers = ojson::array();
  for (const auto& layer : p.layers) {
    ojson l;
    l["in"] = layer.weight.cols();
    l["out"] = layer.weight.rows();
    l["activation"] = std::string(activation_name(layer.activation));
    ojson w = ojson::array();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    l["weight"] = std::move(w);
    ojson b = ojson::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) b.push_back(layer.bias(r));
    l["bias"] = std::move(b);
    layers.push_back(std::move(l));
  }
  ojson j;
  j["layers"] = std::move(layers);
  return j;
}

MlpParams mlp_from_json(const json& j, const std::string& path, std::size_t expected_in) {
  const json& layers = field(j, path, "layers");
  if (!layers.is_array() || layers.empty())
    throw Error(ErrorCode::kParse, "field '" + path + ".layers' must be a non-empty array");
  MlpParams p;
  std::size_t in = expected_in;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string lp = path + ".layers[" + std::to_string(i) + "]";
    const json& l = layers[i];
    const std::size_t declared_in = uint(l, lp, "in");
    const std::size_t out = uint(l, lp, "out");
    if (declared_in != in)
      throw Error(ErrorCode::kShapeMismatch, "field '" + lp + ".in' is " +
                                                 std::to_string(declared_in) + ", expected " +
                                                 std::to_string(in));
    if (out == 0)
      throw Error(ErrorCode::kShapeMismatch, "field '" + lp + ".out' must be > 0");
    if (i + 1 == layers.size() && out != 1)
      throw Error(ErrorCode::kShapeMismatch, "field '" + lp + ".out' of the last layer must be 1");
    const std::string act_name = str(l, lp, "activation");
    const auto act = parse_activation(act_name);
    if (!act)
      throw Error(ErrorCode::kParse, "field '" + lp + ".activation': unknown '" + act_name + "'");
    const auto w = numbers(field(l, lp, "weight"), lp + ".weight", out * in);
    const auto b = numbers(field(l, lp, "bias"), lp + ".bias", out);
    DenseLayer d;
    d.activation = *act;
    d.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (std::size_t r = 0; r < out; ++r)
      for (std::size_t c = 0; c < in; ++c)
        d.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * in + c];
    d.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(out));
    p.layers.push_back(std::move(d));
    in = out;
  }
  return p;
}

ojson calib_to_json(const CalibrationParams& c) {
  ojson j;
  j["w0"] = c.w0;
  j["w1"] = c.w1;
  return j;
}

CalibrationParams calib_from_json(const json& j, const std::string& path) {
  return {num(j, path, "w0"), num(j, path, "w1")};
}

std::string_view calibration_grad_name(CalibrationGradSource s) {
  switch (s) {
    case CalibrationGradSource::kBoth: return "both";
    case CalibrationGradSource::kFusionOnly: return "fusion";
    case CalibrationGradSource::kAuxOnly: return "aux";
  }
  return "?";
}

ojson config_to_json(const TrainConfig& c) {
  ojson j;
  j["architecture"] = std::string(architecture_name(c.architecture));
  j["fusion"] = std::string(fusion_mode_name(c.fusion));
  j["loss"] = std::string(loss_variant_name(c.loss));
  j["optimizer"] = std::string(optimizer_name(c.optimizer));
  j["init"] = std::string(init_name(c.init));
  j["epochs"] = c.epochs;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["seed"] = c.seed;
  j["hidden"] = c.hidden;
  j["hidden_activation"] = std::string(activation_name(c.hidden_activation));
  ojson w;
  w["beta1"] = c.loss_weights.beta1;
  w["beta2"] = c.loss_weights.beta2;
  w["lambda1"] = c.loss_weights.lambda1;
  w["lambda2"] = c.loss_weights.lambda2;
  w["lambda3"] = c.loss_weights.lambda3;
  j["loss_weights"] = std::move(w);
  j["alpha"] = c.alpha;
  j["normalized_loss"] = c.normalized_loss;
  j["calibration_grad"] = std::string(calibration_grad_name(c.calibration_grad));
  j["cost"] = cost_to_json(c.cost);
  return j;
}

template <typename T, typename Parse>
T enum_field(const json& j, const std::string& path, const char* key, Parse parse) {
  const std::string name = str(j, path, key);
  auto v = parse(name);
  if (!v)
    throw Error(ErrorCode::kParse,
                "field '" + path + "." + key + "': unknown value '" + name + "'");
  return *v;
}

TrainConfig config_from_json(const json& j, const std::string& p) {
  TrainConfig c;
  c.architecture = enum_field<Architecture>(j, p, "architecture", parse_architecture);
  c.fusion = enum_field<FusionMode>(j, p, "fusion", parse_fusion_mode);
  c.loss = enum_field<LossVariant>(j, p, "loss", parse_loss_variant);
  c.optimizer = enum_field<OptimizerKind>(j, p, "optimizer", parse_optimizer);
  c.init = enum_field<InitKind>(j, p, "init", parse_init);
  c.epochs = static_cast<int>(uint(j, p, "epochs"));
  c.pretrain_epochs = static_cast<int>(uint(j, p, "pretrain_epochs"));
  c.batch_size = uint(j, p, "batch_size");
  c.lr = num(j, p, "lr");
  c.seed = uint(j, p, "seed");
  const json& hidden = field(j, p, "hidden");
  if (!hidden.is_array())
    throw Error(ErrorCode::kParse, "field '" + p + ".hidden' must be an array");
  c.hidden.clear();
  for (std::size_t i = 0; i < hidden.size(); ++i)
    c.hidden.push_back(uint(hidden[i], p + ".hidden[" + std::to_string(i) + "]"));
  c.hidden_activation =
      enum_field<Activation>(j, p, "hidden_activation", parse_activation);
  const std::string wp = p + ".loss_weights";
  const json& w = field(j, p, "loss_weights");
  c.loss_weights = {num(w, wp, "beta1"), num(w, wp, "beta2"), num(w, wp, "lambda1"),
                    num(w, wp, "lambda2"), num(w, wp, "lambda3")};
  c.alpha = num(j, p, "alpha");
  c.normalized_loss = boolean(j, p, "normalized_loss");
  c.calibration_grad = enum_field<CalibrationGradSource>(
      j, p, "calibration_grad", [](std::string_view s) -> std::optional<CalibrationGradSource> {
        if (s == "both") return CalibrationGradSource::kBoth;
        if (s == "fusion") return CalibrationGradSource::kFusionOnly;
        if (s == "aux") return CalibrationGradSource::kAuxOnly;
        return std::nullopt;
      });
  c.cost = cost_from_json(field(j, p, "cost"), p + ".cost");
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Checkpoint

std::string format_checkpoint(const CheckpointFile& ckpt) {
  const ModelParams& m = ckpt.params;
  m.validate();
  ojson j;
  j["format"] = "sasv-checkpoint";
  j["version"] = 1;
  j["architecture"] = std::string(architecture_name(m.architecture));
  j["asv_dim"] = m.asv_dim;
  j["cm_dim"] = m.cm_dim;
  ojson head;
  if (m.asv_mlp) {
    head["mlp"] = mlp_to_json(*m.asv_mlp);
  } else if (m.asv_weights) {
    ojson w = ojson::array();
    for (Eigen::Index i = 0; i < m.asv_weights->w.size(); ++i) w.push_back(m.asv_weights->w(i));
    head["weights"] = std::move(w);
  }
  j["asv_head"] = head.is_null() ? ojson::object() : std::move(head);
  j["cm_mlp"] = mlp_to_json(m.cm_mlp);
  j["asv_calibration"] = calib_to_json(m.asv_calibration);
  j["cm_calibration"] = calib_to_json(m.cm_calibration);
  ojson f;
  f["mode"] = std::string(fusion_mode_name(m.fusion_mode));
  f["rho_logit"] = m.rho_logit;
  j["fusion"] = std::move(f);
  j["tau"] = m.tau;
  j["epoch"] = ckpt.epoch;
  j["dev_min_adcf"] = ckpt.dev_min_adcf ? ojson(*ckpt.dev_min_adcf) : ojson(nullptr);
  j["dev_threshold"] = ckpt.dev_threshold ? ojson(*ckpt.dev_threshold) : ojson(nullptr);
  j["config"] = ckpt.config ? config_to_json(*ckpt.config) : ojson(nullptr);
  return j.dump(1) + "\n";
}

CheckpointFile parse_checkpoint(std::string_view text) {
  const json j = parse_json(text, "checkpoint");
  const std::string root = "checkpoint";
  if (str(j, root, "format") != "sasv-checkpoint")
    throw Error(ErrorCode::kParse, "field 'checkpoint.format' is not 'sasv-checkpoint'");
  if (uint(j, root, "version") != 1)
    throw Error(ErrorCode::kParse, "field 'checkpoint.version': unsupported version");
  CheckpointFile c;
  ModelParams& m = c.params;
  m.architecture = enum_field<Architecture>(j, root, "architecture", parse_architecture);
  m.asv_dim = uint(j, root, "asv_dim");
  m.cm_dim = uint(j, root, "cm_dim");
  if (m.asv_dim == 0 || m.cm_dim == 0)
    throw Error(ErrorCode::kShapeMismatch, "fields 'checkpoint.asv_dim' and 'checkpoint.cm_dim' must be > 0");
  const json& head = field(j, root, "asv_head");
  const std::string hp = root + ".asv_head";
  switch (m.architecture) {
    case Architecture::kMlpMlp:
      m.asv_mlp = mlp_from_json(field(head, hp, "mlp"), hp + ".mlp", 2 * m.asv_dim);
      break;
    case Architecture::kWeightedCosineMlp: {
      const auto w = numbers(field(head, hp, "weights"), hp + ".weights", m.asv_dim);
      m.asv_weights = WeightedCosineParams{
          Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()))};
      break;
    }
    case Architecture::kCosineMlp:
      if (!head.is_object() || !head.empty())
        throw Error(ErrorCode::kShapeMismatch, "field '" + hp + "' must be empty for cosine-mlp");
      break;
  }
  m.cm_mlp = mlp_from_json(field(j, root, "cm_mlp"), root + ".cm_mlp", m.asv_dim + m.cm_dim);
  m.asv_calibration = calib_from_json(field(j, root, "asv_calibration"), root + ".asv_calibration");
  m.cm_calibration = calib_from_json(field(j, root, "cm_calibration"), root + ".cm_calibration");
  const json& f = field(j, root, "fusion");
  m.fusion_mode = enum_field<FusionMode>(f, root + ".fusion", "mode", parse_fusion_mode);
  m.rho_logit = num(f, root + ".fusion", "rho_logit");
  m.tau = num(j, root, "tau");
  const json& ep = field(j, root, "epoch");
  c.epoch = static_cast<int>(uint(ep, root + ".epoch"));
  const json& dm = field(j, root, "dev_min_adcf");
  if (!dm.is_null()) c.dev_min_adcf = num(dm, root + ".dev_min_adcf");
  const json& dt = field(j, root, "dev_threshold");
  if (!dt.is_null()) c.dev_threshold = num(dt, root + ".dev_threshold");
  const json& cfg = field(j, root, "config");
  if (!cfg.is_null()) c.config = config_from_json(cfg, root + ".config");
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("checkpoint: ") + e.what());
  }
  return c;
}

CheckpointFile read_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

void write_checkpoint(const std::string& path, const CheckpointFile& ckpt) {
  write_file_atomic(path, format_checkpoint(ckpt));
}

// ---------------------------------------------------------------------------
// Calibration

std::string format_calibration(const CalibrationFile& c) {
  ojson j;
  j["task"] = c.task == CalibrationTask::kAsv ? "asv" : "cm";
  j["w0"] = c.fit.params.w0;
  j["w1"] = c.fit.params.w1;
  j["iterations"] = c.fit.iterations;
  j["separable"] = c.fit.separable;
  j["scale_capped"] = c.fit.scale_capped;
  return j.dump(1) + "\n";
}

CalibrationFile parse_calibration(std::string_view text) {
  const json j = parse_json(text, "calibration");
  const std::string root = "calibration";
  CalibrationFile c;
  const std::string task = str(j, root, "task");
  if (task == "asv")
    c.task = CalibrationTask::kAsv;
  else if (task == "cm")
    c.task = CalibrationTask::kCm;
  else
    throw Error(ErrorCode::kParse, "field 'calibration.task': unknown value '" + task + "'");
  c.fit.params = {num(j, root, "w0"), num(j, root, "w1")};
  c.fit.iterations = static_cast<int>(uint(j, root, "iterations"));
  c.fit.separable = boolean(j, root, "separable");
  c.fit.scale_capped = boolean(j, root, "scale_capped");
  return c;
}

// ---------------------------------------------------------------------------
// Report and CSV

std::string format_report(const EvalReport& r) {
  ojson j;
  j["cost_model"] = cost_to_json(r.cost);
  j["normalized"] = r.adcf.normalized;
  j["n_target"] = r.n_target;
  j["n_nontarget"] = r.n_nontarget;
  j["n_spoof"] = r.n_spoof;
  j["min_adcf"] = r.adcf.min_adcf;
  j["min_threshold"] = r.adcf.min_threshold;
  ojson rates;
  rates["p_miss_tar"] = r.adcf.rates_at_min.p_miss_tar;
  rates["p_fa_non"] = r.adcf.rates_at_min.p_fa_non;
  rates["p_fa_spf"] = r.adcf.rates_at_min.p_fa_spf;
  j["rates_at_min"] = std::move(rates);
  j["act_adcf"] = r.adcf.act_adcf ? ojson(*r.adcf.act_adcf) : ojson(nullptr);
  j["act_threshold"] = r.adcf.act_threshold ? ojson(*r.adcf.act_threshold) : ojson(nullptr);
  auto eer_json = [](const std::optional<EerResult>& e) {
    if (!e) return ojson(nullptr);
    ojson o;
    o["eer"] = e->eer;
    o["threshold"] = e->threshold;
    return o;
  };
  j["sv_eer"] = eer_json(r.sv_eer);
  j["spf_eer"] = eer_json(r.spf_eer);
  return j.dump(1) + "\n";
}

std::string format_det_csv(const std::vector<DetPoint>& points) {
  std::string out = "p_fa,p_miss\n";
  char buf[64];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", p.p_fa, p.p_miss);
    out += buf;
  }
  return out;
}

std::string format_grid_csv(const std::vector<GridNode>& nodes) {
  std::string out = "llr_asv,llr_cm,s_sasv,accept\n";
  for (const auto& n : nodes) {
    out += format_double(n.llr_asv);
    out += ',';
    out += format_double(n.llr_cm);
    out += ',';
    out += format_double(n.s_sasv);
    out += n.accept ? ",1\n" : ",0\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation configs

namespace {

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> known) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "'" + path + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::kParse, "unknown field '" + path + "." + key + "'");
  }
}

void read_class(const json& j, const std::string& path, ClassGaussian& g) {
  reject_unknown(j, path, {"mean", "cov", "count"});
  if (j.contains("mean")) {
    const auto m = numbers(j["mean"], path + ".mean", 2);
    g.mean = {m[0], m[1]};
  }
  if (j.contains("cov")) {
    const auto c = numbers(j["cov"], path + ".cov", 4);
    g.cov = {c[0], c[1], c[2], c[3]};
  }
  if (j.contains("count")) g.count = uint(j["count"], path + ".count");
}

void read_counts(const json& j, const std::string& path, TrialCounts& c) {
  reject_unknown(j, path, {"target", "nontarget", "spoof"});
  if (j.contains("target")) c.target = uint(j["target"], path + ".target");
  if (j.contains("nontarget")) c.nontarget = uint(j["nontarget"], path + ".nontarget");
  if (j.contains("spoof")) c.spoof = uint(j["spoof"], path + ".spoof");
}

}  // namespace

ScoreSimConfig parse_score_sim_config(std::string_view text) {
  const json j = parse_json(text, "score sim config");
  const std::string root = "config";
  reject_unknown(j, root, {"target", "nontarget", "spoof", "seed"});
  ScoreSimConfig c;
  if (j.contains("target")) read_class(j["target"], root + ".target", c.target);
  if (j.contains("nontarget")) read_class(j["nontarget"], root + ".nontarget", c.nontarget);
  if (j.contains("spoof")) read_class(j["spoof"], root + ".spoof", c.spoof);
  if (j.contains("seed")) c.seed = uint(j["seed"], root + ".seed");
  c.validate();
  return c;
}

EmbeddingSimConfig parse_embedding_sim_config(std::string_view text) {
  const json j = parse_json(text, "embedding sim config");
  const std::string root = "config";
  reject_unknown(j, root,
                 {"n_speakers", "asv_dim", "cm_dim", "sigma_w", "spoof_proximity",
                  "cm_margin", "train", "dev", "eval", "seed"});
  EmbeddingSimConfig c;
  if (j.contains("n_speakers")) c.n_speakers = uint(j["n_speakers"], root + ".n_speakers");
  if (j.contains("asv_dim")) c.asv_dim = uint(j["asv_dim"], root + ".asv_dim");
  if (j.contains("cm_dim")) c.cm_dim = uint(j["cm_dim"], root + ".cm_dim");
  if (j.contains("sigma_w")) c.sigma_w = num(j["sigma_w"], root + ".sigma_w");
  if (j.contains("spoof_proximity"))
    c.spoof_proximity = num(j["spoof_proximity"], root + ".spoof_proximity");
  if (j.contains("cm_margin")) c.cm_margin = num(j["cm_margin"], root + ".cm_margin");
  if (j.contains("train")) read_counts(j["train"], root + ".train", c.train);
  if (j.contains("dev")) read_counts(j["dev"], root + ".dev", c.dev);
  if (j.contains("eval")) read_counts(j["eval"], root + ".eval", c.eval);
  if (j.contains("seed")) c.seed = uint(j["seed"], root + ".seed");
  c.validate();
  return c;
}

}  // namespace sasv
