// tools/cli.cpp

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

#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "sasv/decision.hpp"
#include "sasv/io.hpp"
#include "sasv/metrics.hpp"
#include "sasv/sim.hpp"
#include "sasv/train.hpp"

namespace sasv::cli {

namespace {

// Bad flag values detected after parsing; reported like parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CostFlags {
  double cmiss = 1.0;
  double cfa_non = 10.0;
  double cfa_spf = 20.0;
  double ptar = 0.9;
  double pnon = 0.05;
  double pspf = 0.05;

  CostModel resolve() const {
    try {
      return CostModel::make(cmiss, cfa_non, cfa_spf, ptar, pnon, pspf);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
};

void add_cost_flags(CLI::App* sub, CostFlags& f) {
  sub->add_option("--cmiss", f.cmiss, "Cost of a missed target")->capture_default_str();
  sub->add_option("--cfa-non", f.cfa_non, "Cost of accepting a nontarget")->capture_default_str();
  sub->add_option("--cfa-spf", f.cfa_spf, "Cost of accepting a spoof")->capture_default_str();
  sub->add_option("--ptar", f.ptar, "Target prior")->capture_default_str();
  sub->add_option("--pnon", f.pnon, "Nontarget prior")->capture_default_str();
  sub->add_option("--pspf", f.pspf, "Spoof prior")->capture_default_str();
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

template <typename Opt>
Opt parse_choice(const std::string& name, std::optional<Opt> (*parse)(std::string_view),
                 const char* flag) {
  auto v = parse(name);
  if (!v) throw UsageError(std::string(flag) + ": unknown value '" + name + "'");
  return *v;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string mode;
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

std::string numbered_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, i);
  return buf;
}

void run_simulate(const SimulateArgs& a, std::ostream& out) {
  const std::filesystem::path dir(a.out_dir);
  auto make_dir = [&] {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create directory '" + a.out_dir + "'");
  };
  const std::string text = a.config.empty() ? "{}" : read_file(a.config);
  if (a.mode == "scores") {
    ScoreSimConfig cfg = parse_score_sim_config(text);
    if (a.seed_opt->count()) cfg.seed = a.seed;
    const auto sims = simulate_scores(cfg);
    make_dir();
    std::vector<ScoreRecord> asv, cm;
    for (std::size_t i = 0; i < sims.size(); ++i) {
      const std::string e = numbered_id('e', i), t = numbered_id('t', i);
      asv.push_back({e, t, sims[i].llr_asv, sims[i].label});
      cm.push_back({e, t, sims[i].llr_cm, sims[i].label});
    }
    write_scores((dir / "asv_scores.tsv").string(), asv);
    write_scores((dir / "cm_scores.tsv").string(), cm);
    out << "wrote " << sims.size() << " trials to " << a.out_dir << "\n";
  } else {
    EmbeddingSimConfig cfg = parse_embedding_sim_config(text);
    if (a.seed_opt->count()) cfg.seed = a.seed;
    const auto sims = simulate_embeddings(cfg);
    make_dir();
    write_embeddings((dir / "asv.bin").string(), sims.asv);
    write_embeddings((dir / "cm.bin").string(), sims.cm);
    write_protocol((dir / "train.tsv").string(), sims.train);
    write_protocol((dir / "dev.tsv").string(), sims.dev);
    write_protocol((dir / "eval.tsv").string(), sims.eval);
    out << "wrote " << sims.asv.size() << " ASV and " << sims.cm.size()
        << " CM embeddings to " << a.out_dir << "\n";
  }
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string scores;
  std::string task;
  std::string out;
  bool smooth = false;
};

void run_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto recs = read_scores(a.scores, &warnings);
  print_warnings(warnings, err);
  const bool asv = a.task == "asv";
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& r : recs) {
    const LabelBits bits = label_maps(r.label);
    if (asv) {
      if (!bits.asv) continue;
      y.push_back(*bits.asv);
    } else {
      y.push_back(bits.cm);
    }
    s.push_back(r.score);
  }
  CalibrationFile file;
  file.task = asv ? CalibrationTask::kAsv : CalibrationTask::kCm;
  CalibrationOptions opt;
  opt.smooth_targets = a.smooth;
  file.fit = fit_calibration(s, y, opt);
  if (file.fit.separable && !a.smooth)
    err << "warning: classes are separable; the fitted scale w1 = "
        << format_double(file.fit.params.w1) << " is arbitrary (try --smooth)\n";
  write_file_atomic(a.out, format_calibration(file));
  out << "w0 " << format_double(file.fit.params.w0) << " w1 "
      << format_double(file.fit.params.w1) << "\n";
}

// ---------------------------------------------------------------------------

struct FuseArgs {
  std::string asv, cm, mode, asv_calib, cm_calib, out;
  double rho = 0.5;
};

CalibrationParams load_calibration(const std::string& path, CalibrationTask expected) {
  if (path.empty()) return {};
  const CalibrationFile c = parse_calibration(read_file(path));
  if (c.task != expected)
    throw Error(ErrorCode::kInvalidArgument,
                "calibration file '" + path + "' was fitted for the other task");
  return c.fit.params;
}

void run_fuse(const FuseArgs& a, std::ostream& out, std::ostream& err) {
  FusionConfig fc{parse_choice<FusionMode>(a.mode, parse_fusion_mode, "--mode"), a.rho};
  try {
    fc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const CalibrationParams ca = load_calibration(a.asv_calib, CalibrationTask::kAsv);
  const CalibrationParams cc = load_calibration(a.cm_calib, CalibrationTask::kCm);
  std::vector<std::string> warnings;
  const auto asv = read_scores(a.asv, &warnings);
  const auto cm = read_scores(a.cm, &warnings);
  print_warnings(warnings, err);
  std::map<std::pair<std::string, std::string>, std::size_t> cm_index;
  for (std::size_t i = 0; i < cm.size(); ++i)
    cm_index.emplace(std::make_pair(cm[i].enroll_id, cm[i].test_id), i);
  std::vector<ScoreRecord> fused;
  fused.reserve(asv.size());
  for (const auto& r : asv) {
    auto it = cm_index.find({r.enroll_id, r.test_id});
    if (it == cm_index.end())
      throw Error(ErrorCode::kUnknownId, "trial (" + r.enroll_id + ", " + r.test_id +
                                             ") has no CM score");
    const ScoreRecord& c = cm[it->second];
    if (c.label != r.label)
      throw Error(ErrorCode::kInvalidArgument, "trial (" + r.enroll_id + ", " + r.test_id +
                                                   ") has different labels in the two files");
    fused.push_back({r.enroll_id, r.test_id,
                     fuse(fc, calibrate(r.score, ca), calibrate(c.score, cc)), r.label});
  }
  write_scores(a.out, fused);
  out << "fused " << fused.size() << " trials\n";
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string scores, report;
  CostFlags cost;
  double threshold = 0.0;
  CLI::Option* threshold_opt = nullptr;
  bool unnormalized = false;
};

void run_eval(const EvalArgs& a, int jobs, std::ostream& out, std::ostream& err) {
  const CostModel cost = a.cost.resolve();
  std::vector<std::string> warnings;
  const auto recs = read_scores(a.scores, &warnings);
  print_warnings(warnings, err);
  const auto trials = to_labeled(recs);
  const bool normalized = !a.unnormalized;

  EvalReport rep;
  rep.cost = cost;
  const ScoresByClass by = split_by_class(trials);
  rep.n_target = by.target.size();
  rep.n_nontarget = by.nontarget.size();
  rep.n_spoof = by.spoof.size();
  auto sv = [&]() -> std::optional<EerResult> {
    if (by.target.empty() || by.nontarget.empty()) return std::nullopt;
    return eer(by.target, by.nontarget);
  };
  auto spf = [&]() -> std::optional<EerResult> {
    if (by.target.empty() || by.spoof.empty()) return std::nullopt;
    return eer(by.target, by.spoof);
  };
  if (jobs > 1) {
    // Independent computations; the results do not depend on scheduling.
    auto f_sv = std::async(std::launch::async, sv);
    auto f_spf = std::async(std::launch::async, spf);
    rep.adcf = min_adcf(trials, cost, normalized);
    rep.sv_eer = f_sv.get();
    rep.spf_eer = f_spf.get();
  } else {
    rep.adcf = min_adcf(trials, cost, normalized);
    rep.sv_eer = sv();
    rep.spf_eer = spf();
  }
  if (a.threshold_opt->count()) {
    rep.adcf.act_adcf = actual_adcf(trials, a.threshold, cost, normalized);
    rep.adcf.act_threshold = a.threshold;
  }
  write_file_atomic(a.report, format_report(rep));
  out << "min_adcf " << format_double(rep.adcf.min_adcf) << "\n";
  if (rep.adcf.act_adcf) out << "act_adcf " << format_double(*rep.adcf.act_adcf) << "\n";
  if (rep.sv_eer) out << "sv_eer " << format_double(rep.sv_eer->eer) << "\n";
  if (rep.spf_eer) out << "spf_eer " << format_double(rep.spf_eer->eer) << "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string arch, loss = "v1", optimizer = "sgd", init = "random", fusion = "nonlinear";
  std::string asv_emb, cm_emb, train_proto, dev_proto, out, log, dev_scores;
  int epochs = 100;
  int pretrain_epochs = 20;
  std::size_t batch = 192;
  double lr = 0.000861;
  std::uint64_t seed = 0;
  CostFlags cost;
};

void run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  cfg.architecture = parse_choice<Architecture>(a.arch, parse_architecture, "--arch");
  cfg.loss = parse_choice<LossVariant>(a.loss, parse_loss_variant, "--loss");
  cfg.optimizer = parse_choice<OptimizerKind>(a.optimizer, parse_optimizer, "--optimizer");
  cfg.init = parse_choice<InitKind>(a.init, parse_init, "--init");
  cfg.fusion = parse_choice<FusionMode>(a.fusion, parse_fusion_mode, "--fusion");
  cfg.epochs = a.epochs;
  cfg.pretrain_epochs = a.pretrain_epochs;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.seed = a.seed;
  cfg.cost = a.cost.resolve();
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const EmbeddingStore asv = read_embeddings(a.asv_emb);
  const EmbeddingStore cm = read_embeddings(a.cm_emb);
  std::vector<std::string> warnings;
  const auto train = read_protocol(a.train_proto, &warnings);
  const auto dev = read_protocol(a.dev_proto, &warnings);
  print_warnings(warnings, err);

  const TrainResult result = train_joint(cfg, TrainData{asv, cm, train, dev});

  std::string log;
  for (const auto& e : result.log) log += format_log_line(e) + "\n";
  if (!a.log.empty())
    write_file_atomic(a.log, log);
  else
    out << log;

  CheckpointFile ckpt;
  ckpt.params = result.best.params;
  ckpt.config = cfg;
  ckpt.epoch = result.best.epoch;
  ckpt.dev_min_adcf = result.best.dev_min_adcf;
  ckpt.dev_threshold = result.best.dev_threshold;
  write_checkpoint(a.out, ckpt);

  if (!a.dev_scores.empty()) {
    const auto scored = score_trials(result.best.params, asv, cm, dev);
    std::vector<ScoreRecord> recs;
    recs.reserve(scored.size());
    for (const auto& s : scored)
      recs.push_back({s.trial.enroll_id, s.trial.test_id, *s.s_sasv, s.trial.label});
    write_scores(a.dev_scores, recs);
  }
  out << "best epoch " << result.best.epoch << " dev min_adcf "
      << format_double(result.best.dev_min_adcf) << "\n";
}

// ---------------------------------------------------------------------------

struct DetArgs {
  std::string scores, negatives, out;
};

void run_det(const DetArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const auto recs = read_scores(a.scores, &warnings);
  print_warnings(warnings, err);
  const ScoresByClass by = split_by_class(to_labeled(recs));
  const auto& neg = a.negatives == "spoof" ? by.spoof : by.nontarget;
  const auto points = det_points(by.target, neg);
  write_file_atomic(a.out, format_det_csv(points));
  out << "wrote " << points.size() << " DET points\n";
}

// ---------------------------------------------------------------------------

struct GridArgs {
  std::string ckpt, mode, out;
  double rho = 0.0;
  CLI::Option* rho_opt = nullptr;
  CostFlags cost;
  GridSpec grid;
  std::size_t steps = 101;
};

void run_grid(const GridArgs& a, std::ostream& out) {
  const CostModel cost = a.cost.resolve();
  GridSpec spec = a.grid;
  spec.asv_steps = spec.cm_steps = a.steps;
  FusionConfig fc;
  if (!a.ckpt.empty()) {
    if (a.rho_opt->count()) throw UsageError("--rho cannot be combined with --ckpt");
  } else {
    fc.mode = parse_choice<FusionMode>(a.mode, parse_fusion_mode, "--mode");
    fc.rho_tilde = a.rho_opt->count() ? a.rho : default_fusion(cost).rho_tilde;
  }
  try {
    spec.validate();
    if (a.ckpt.empty()) fc.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!a.ckpt.empty()) fc = read_checkpoint(a.ckpt).params.fusion();
  const auto nodes = boundary_grid(fc, cost, spec);
  write_file_atomic(a.out, format_grid_csv(nodes));
  out << "wrote " << nodes.size() << " grid nodes\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibration, fusion, evaluation and joint training of SASV back-ends", "sasv"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads for evaluation")
      ->envname("SASV_JOBS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Generate synthetic scores or embeddings");
  s_sim->add_option("--mode", sim.mode)->required()->check(CLI::IsMember({"scores", "embeddings"}));
  s_sim->add_option("--config", sim.config, "JSON config; defaults when omitted")
      ->check(CLI::ExistingFile);
  s_sim->add_option("--out-dir", sim.out_dir)->required();
  sim.seed_opt = s_sim->add_option("--seed", sim.seed, "Overrides the config seed");

  CalibrateArgs cal;
  auto* s_cal = app.add_subcommand("calibrate", "Fit an affine score calibration");
  s_cal->add_option("--scores", cal.scores)->required()->check(CLI::ExistingFile);
  s_cal->add_option("--task", cal.task)->required()->check(CLI::IsMember({"asv", "cm"}));
  s_cal->add_option("--out", cal.out)->required();
  s_cal->add_flag("--smooth", cal.smooth, "Platt-smoothed targets; finite fit on separable data");

  FuseArgs fu;
  auto* s_fuse = app.add_subcommand("fuse", "Fuse ASV and CM scores");
  s_fuse->add_option("--asv", fu.asv)->required()->check(CLI::ExistingFile);
  s_fuse->add_option("--cm", fu.cm)->required()->check(CLI::ExistingFile);
  s_fuse->add_option("--mode", fu.mode)->required()->check(CLI::IsMember({"linear", "nonlinear"}));
  s_fuse->add_option("--rho", fu.rho, "Spoof weight of nonlinear fusion")->capture_default_str();
  s_fuse->add_option("--asv-calib", fu.asv_calib)->check(CLI::ExistingFile);
  s_fuse->add_option("--cm-calib", fu.cm_calib)->check(CLI::ExistingFile);
  s_fuse->add_option("--out", fu.out)->required();

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Compute a-DCF and EERs of a score file");
  s_eval->add_option("--scores", ev.scores)->required()->check(CLI::ExistingFile);
  add_cost_flags(s_eval, ev.cost);
  ev.threshold_opt = s_eval->add_option("--threshold", ev.threshold, "Threshold for actual a-DCF");
  s_eval->add_flag("--unnormalized", ev.unnormalized, "Report raw expected cost");
  s_eval->add_option("--report", ev.report)->required();

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "Jointly train ASV and CM heads");
  s_train->add_option("--arch", tr.arch)->required()
      ->check(CLI::IsMember({"mlp-mlp", "cosine-mlp", "wcos-mlp"}));
  s_train->add_option("--loss", tr.loss)->check(CLI::IsMember({"v1", "v2"}))->capture_default_str();
  s_train->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  s_train->add_option("--init", tr.init)->check(CLI::IsMember({"random", "pretrained"}))
      ->capture_default_str();
  s_train->add_option("--fusion", tr.fusion)->check(CLI::IsMember({"linear", "nonlinear"}))
      ->capture_default_str();
  s_train->add_option("--asv-emb", tr.asv_emb)->required()->check(CLI::ExistingFile);
  s_train->add_option("--cm-emb", tr.cm_emb)->required()->check(CLI::ExistingFile);
  s_train->add_option("--train-proto", tr.train_proto)->required()->check(CLI::ExistingFile);
  s_train->add_option("--dev-proto", tr.dev_proto)->required()->check(CLI::ExistingFile);
  s_train->add_option("--epochs", tr.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  s_train->add_option("--pretrain-epochs", tr.pretrain_epochs)->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_train->add_option("--batch", tr.batch)->capture_default_str();
  s_train->add_option("--lr", tr.lr)->check(CLI::NonNegativeNumber)->capture_default_str();
  s_train->add_option("--seed", tr.seed)->capture_default_str();
  add_cost_flags(s_train, tr.cost);
  s_train->add_option("--out", tr.out, "Checkpoint of the best dev epoch")->required();
  s_train->add_option("--log", tr.log, "JSON-lines training log (stdout when omitted)");
  s_train->add_option("--dev-scores", tr.dev_scores, "Fused dev scores of the best checkpoint");

  DetArgs det;
  auto* s_det = app.add_subcommand("det", "Export a DET curve");
  s_det->add_option("--scores", det.scores)->required()->check(CLI::ExistingFile);
  s_det->add_option("--negatives", det.negatives)->required()
      ->check(CLI::IsMember({"nontarget", "spoof"}));
  s_det->add_option("--out", det.out)->required();

  GridArgs gr;
  auto* s_grid = app.add_subcommand("grid", "Export the fused score and decision over an LLR grid");
  auto* g_ckpt = s_grid->add_option("--ckpt", gr.ckpt)->check(CLI::ExistingFile);
  auto* g_mode = s_grid->add_option("--mode", gr.mode)->check(CLI::IsMember({"linear", "nonlinear"}));
  g_ckpt->excludes(g_mode);
  gr.rho_opt = s_grid->add_option("--rho", gr.rho, "Defaults to the prior spoof share");
  add_cost_flags(s_grid, gr.cost);
  s_grid->add_option("--asv-min", gr.grid.asv_min)->capture_default_str();
  s_grid->add_option("--asv-max", gr.grid.asv_max)->capture_default_str();
  s_grid->add_option("--cm-min", gr.grid.cm_min)->capture_default_str();
  s_grid->add_option("--cm-max", gr.grid.cm_max)->capture_default_str();
  s_grid->add_option("--steps", gr.steps, "Nodes per axis")->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_grid->add_option("--out", gr.out)->required();

  try {
    app.parse(argc, argv);
    if (s_grid->parsed() && gr.ckpt.empty() && gr.mode.empty())
      throw CLI::ValidationError("grid", "one of --ckpt or --mode is required");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string name = "sasv";
  try {
    if (s_sim->parsed()) {
      name = "simulate";
      run_simulate(sim, out);
    } else if (s_cal->parsed()) {
      name = "calibrate";
      run_calibrate(cal, out, err);
    } else if (s_fuse->parsed()) {
      name = "fuse";
      run_fuse(fu, out, err);
    } else if (s_eval->parsed()) {
      name = "eval";
      run_eval(ev, jobs, out, err);
    } else if (s_train->parsed()) {
      name = "train";
      run_train(tr, out, err);
    } else if (s_det->parsed()) {
      name = "det";
      run_det(det, out, err);
    } else if (s_grid->parsed()) {
      name = "grid";
      run_grid(gr, out);
    }
  } catch (const UsageError& e) {
    err << "sasv " << name << ": usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "sasv " << name << ": " << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "sasv " << name << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace sasv::cli
