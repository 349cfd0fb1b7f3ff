// tests/acceptance/acceptance.cpp

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

// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Usage: sasv_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sasv/decision.hpp"
#include "sasv/io.hpp"
#include "sasv/loss.hpp"
#include "sasv/metrics.hpp"
#include "sasv/nn.hpp"
#include "sasv/rng.hpp"
#include "sasv/sim.hpp"
#include "sasv/train.hpp"
#include "test_support.hpp"

namespace sasv {
namespace {

using testing::central_difference;
using testing::gradient_error;
using testing::random_trials;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

// ---------------------------------------------------------------------------

Outcome fusion_identities() {
  CounterRng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double scale = std::pow(10.0, rng.uniform(-2, 2.5));
    const double a = scale * rng.normal(), c = scale * rng.normal();
    const double tol = 1e-12 * std::max(1.0, std::abs(a));
    const double tolc = 1e-12 * std::max(1.0, std::abs(c));
    worst = std::max({worst, std::abs(fuse_nonlinear(a, c, 0.0) - a) / tol,
                      std::abs(fuse_nonlinear(a, c, 1.0) - c) / tolc,
                      std::abs(fuse_nonlinear(a, a, 0.5) - a) / tol});
  }
  return {worst <= 1.0, fmt("worst error %.3g of tolerance", worst)};
}

// Independent brute force: per-class sorted scores, error counts by binary
// search at every grid threshold.
double dense_grid_min(const std::vector<LabeledScore>& trials, const CostModel& cm,
                      bool normalized) {
  std::vector<double> cls[3], all;
  for (const auto& t : trials) {
    cls[static_cast<int>(t.label)].push_back(t.score);
    all.push_back(t.score);
  }
  for (auto& v : cls) std::sort(v.begin(), v.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> th{all.front() - 1.0, all.back() + 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) th.push_back(0.5 * (all[i] + all[i + 1]));
  const double lo = all.front() - 1.0, hi = all.back() + 1.0;
  const int grid = 100000;
  for (int g = 0; g < grid; ++g) th.push_back(lo + (hi - lo) * g / (grid - 1.0));
  const double w[3] = {cm.c_miss_tar * cm.pi_tar, cm.c_fa_non * cm.pi_non,
                       cm.c_fa_spf * cm.pi_spf};
  const double norm = normalized ? std::min(w[0], w[1] + w[2]) : 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (double t : th) {
    // Accept when score >= t.
    const double below0 = static_cast<double>(
        std::lower_bound(cls[0].begin(), cls[0].end(), t) - cls[0].begin());
    double cost = w[0] * below0 / static_cast<double>(cls[0].size());
    for (int c = 1; c < 3; ++c) {
      const double above = static_cast<double>(
          cls[c].end() - std::lower_bound(cls[c].begin(), cls[c].end(), t));
      cost += w[c] * above / static_cast<double>(cls[c].size());
    }
    best = std::min(best, cost / norm);
  }
  return best;
}

Outcome min_adcf_oracle() {
  const CostModel cm;
  const std::vector<LabeledScore> worked = {
      {1, TrialLabel::kTargetBonafide},    {3, TrialLabel::kTargetBonafide},
      {0, TrialLabel::kNontargetBonafide}, {2, TrialLabel::kNontargetBonafide},
      {-1, TrialLabel::kSpoof},            {2.5, TrialLabel::kSpoof}};
  const double raw = min_adcf(worked, cm, false).min_adcf;
  const double norm = min_adcf(worked, cm, true).min_adcf;
  Outcome o;
  o.pass = std::abs(raw - 0.45) <= 1e-12 && std::abs(norm - 0.5) <= 1e-12;
  CounterRng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto trials = random_trials(rng, 3, 300, i % 3 == 0);
    const bool normalized = i % 2 == 0;
    const double ours = min_adcf(trials, cm, normalized).min_adcf;
    worst = std::max(worst, std::abs(ours - dense_grid_min(trials, cm, normalized)));
  }
  o.pass = o.pass && worst <= 1e-12;
  o.detail = "worked " + fmt("%.17g", raw) + " / " + fmt("%.17g", norm) + ", worst gap " +
             fmt("%.3g", worst);
  return o;
}

Outcome rank_invariance() {
  const CostModel cm;
  CounterRng rng(303);
  int mismatches = 0;
  for (int i = 0; i < 20; ++i) {
    auto trials = random_trials(rng, 30, 300, i % 4 == 0);
    const double w0 = rng.uniform(-5, 5), w1 = std::exp(rng.uniform(-3, 3));
    auto cal = trials;
    for (auto& t : cal) t.score = calibrate(t.score, {w0, w1});
    mismatches += !same_bits(min_adcf(trials, cm).min_adcf, min_adcf(cal, cm).min_adcf);
    mismatches += !same_bits(sv_eer(trials).eer, sv_eer(cal).eer);
    mismatches += !same_bits(spf_eer(trials).eer, spf_eer(cal).eer);
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 60 metrics changed"};
}

// Gradient suite -------------------------------------------------------------

struct GradCheck {
  double worst = 0.0;
  long checks = 0;
  void add(double analytic, double numeric) {
    worst = std::max(worst, gradient_error(analytic, numeric));
    ++checks;
  }
};

std::vector<double> normal_vec(CounterRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void check_mlp(CounterRng& rng, GradCheck& gc, Activation act) {
  const std::size_t hidden[] = {6, 4};
  MlpParams p = MlpParams::random(5, hidden, act, rng);
  auto x = normal_vec(rng, 5);
  const double up = rng.uniform(0.5, 2.0);
  const MlpGrad g = mlp_backward(p, mlp_forward(p, x).tape, up);
  auto f = [&] { return up * mlp_forward(p, x).score; };
  auto probe = [&](double& slot) {
    const double orig = slot;
    const double n = central_difference(
        [&](double v) {
          slot = v;
          const double r = f();
          slot = orig;
          return r;
        },
        orig);
    return n;
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < p.layers[l].weight.size(); ++i)
      gc.add(g.layers[l].weight.data()[i], probe(p.layers[l].weight.data()[i]));
    for (Eigen::Index i = 0; i < p.layers[l].bias.size(); ++i)
      gc.add(g.layers[l].bias(i), probe(p.layers[l].bias(i)));
  }
  for (std::size_t k = 0; k < x.size(); ++k)
    gc.add(g.input(static_cast<Eigen::Index>(k), 0), probe(x[k]));
}

void check_weighted_cosine(CounterRng& rng, GradCheck& gc) {
  auto a = normal_vec(rng, 6), b = normal_vec(rng, 6);
  WeightedCosineParams w{Eigen::VectorXd(6)};
  for (int k = 0; k < 6; ++k) w.w(k) = rng.uniform(0.2, 2.0);
  const double up = rng.uniform(-2, 2);
  const auto g = weighted_cosine_backward(weighted_cosine_score(w, a, b).tape, up);
  auto probe = [&](double& slot) {
    const double orig = slot;
    return central_difference(
        [&](double v) {
          slot = v;
          const double r = up * weighted_cosine_score(w, a, b).score;
          slot = orig;
          return r;
        },
        orig);
  };
  for (int k = 0; k < 6; ++k) {
    gc.add(g.w(k), probe(w.w(k)));
    gc.add(g.enroll(k), probe(a[static_cast<std::size_t>(k)]));
    gc.add(g.test(k), probe(b[static_cast<std::size_t>(k)]));
  }
}

void check_calibrated_fusion(CounterRng& rng, GradCheck& gc) {
  // d/d(w0, w1, rho) of fuse(calibrate(s_asv), calibrate(s_cm)).
  const double sa = rng.normal() * 3, sc = rng.normal() * 3;
  CalibrationParams ca{rng.normal(), rng.uniform(0.2, 3)}, cc{rng.normal(), rng.uniform(0.2, 3)};
  FusionConfig fc{rng.uniform() < 0.5 ? FusionMode::kLinear : FusionMode::kNonlinear,
                  rng.uniform(0.05, 0.95)};
  auto f = [&] { return fuse(fc, calibrate(sa, ca), calibrate(sc, cc)); };
  const FusionGrad g = fuse_with_grad(fc, calibrate(sa, ca), calibrate(sc, cc));
  auto probe = [&](double& slot) {
    const double orig = slot;
    return central_difference(
        [&](double v) {
          slot = v;
          const double r = f();
          slot = orig;
          return r;
        },
        orig);
  };
  gc.add(g.d_asv, probe(ca.w0));
  gc.add(g.d_asv * sa, probe(ca.w1));
  gc.add(g.d_cm, probe(cc.w0));
  gc.add(g.d_cm * sc, probe(cc.w1));
  if (fc.mode == FusionMode::kNonlinear) gc.add(g.d_rho, probe(fc.rho_tilde));
}

void check_bce(CounterRng& rng, GradCheck& gc) {
  const int y = rng.uniform() < 0.5 ? 0 : 1;
  const double z = rng.normal() * 4;
  gc.add(bce(z, y, BceInput::kLogit).grad,
         central_difference([&](double v) { return bce(v, y, BceInput::kLogit).loss; }, z));
  const double p = rng.uniform(0.02, 0.98);
  gc.add(bce(p, y, BceInput::kProbability).grad,
         central_difference([&](double v) { return bce(v, y, BceInput::kProbability).loss; }, p,
                            1e-7));
}

struct Batch {
  std::vector<double> s, a, c;
  std::vector<TrialLabel> y;
};

Batch random_batch(CounterRng& rng, std::size_t n) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    const TrialLabel l = i < 3 ? kAllLabels[i] : kAllLabels[rng.below(3)];
    b.y.push_back(l);
    b.s.push_back((l == TrialLabel::kTargetBonafide ? 1.0 : -0.5) + 1.5 * rng.normal());
    b.a.push_back(rng.normal() * 2);
    b.c.push_back(rng.normal() * 2);
  }
  return b;
}

void check_losses(CounterRng& rng, GradCheck& gc) {
  Batch b = random_batch(rng, 12);
  SoftAdcfConfig cfg;
  cfg.tau = rng.normal();
  cfg.alpha = rng.uniform(0.5, 3);
  cfg.normalized = rng.uniform() < 0.5;
  const LossWeights w{rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2),
                      rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
  const auto soft = soft_adcf(b.s, b.y, cfg);
  const auto v1 = combined_loss_v1(b.s, b.y, w, cfg);
  const auto v2 = combined_loss_v2(b.a, b.c, b.s, b.y, w, cfg);
  enum Which { kSoft, kV1, kV2 };
  auto loss = [&](Which which, const SoftAdcfConfig& c) {
    switch (which) {
      case kSoft: return soft_adcf(b.s, b.y, c).loss;
      case kV1: return combined_loss_v1(b.s, b.y, w, c).loss;
      case kV2: return combined_loss_v2(b.a, b.c, b.s, b.y, w, c).loss;
    }
    return 0.0;
  };
  auto probe = [&](std::vector<double>& v, std::size_t k, Which which) {
    const double orig = v[k];
    return central_difference(
        [&](double x) {
          v[k] = x;
          const double r = loss(which, cfg);
          v[k] = orig;
          return r;
        },
        orig);
  };
  auto probe_tau = [&](Which which) {
    return central_difference(
        [&](double t) {
          SoftAdcfConfig c = cfg;
          c.tau = t;
          return loss(which, c);
        },
        cfg.tau);
  };
  for (std::size_t k = 0; k < b.s.size(); ++k) {
    gc.add(soft.d_scores[k], probe(b.s, k, kSoft));
    gc.add(v1.d_sasv[k], probe(b.s, k, kV1));
    gc.add(v2.d_sasv[k], probe(b.s, k, kV2));
    gc.add(v2.d_asv[k], probe(b.a, k, kV2));
    gc.add(v2.d_cm[k], probe(b.c, k, kV2));
  }
  gc.add(soft.d_tau, probe_tau(kSoft));
  gc.add(v1.d_tau, probe_tau(kV1));
  gc.add(v2.d_tau, probe_tau(kV2));
}

void check_full_graph(std::uint64_t seed, GradCheck& gc) {
  EmbeddingSimConfig sc;
  sc.n_speakers = 4;
  sc.asv_dim = 4;
  sc.cm_dim = 3;
  sc.spoof_proximity = 0.7;
  sc.cm_margin = 1.0;
  sc.train = {5, 5, 5};
  sc.dev = sc.eval = {1, 1, 1};
  sc.seed = seed;
  const SimulatedEmbeddings sim = simulate_embeddings(sc);
  TrainConfig cfg;
  cfg.architecture = static_cast<Architecture>(seed % 3);
  cfg.loss = seed % 2 ? LossVariant::kV2 : LossVariant::kV1;
  cfg.fusion = (seed / 2) % 2 ? FusionMode::kLinear : FusionMode::kNonlinear;
  cfg.hidden = {4, 3};
  cfg.hidden_activation = Activation::kTanh;
  cfg.seed = seed;
  ModelParams m = init_model(cfg, sc.asv_dim, sc.cm_dim);
  CounterRng rng(seed, 7);
  m.tau = rng.normal() * 0.5;
  m.rho_logit = rng.normal();
  m.asv_calibration = {rng.normal(), rng.uniform(0.5, 3)};
  m.cm_calibration = {rng.normal(), rng.uniform(0.5, 3)};
  if (m.asv_weights)
    for (Eigen::Index k = 0; k < m.asv_weights->w.size(); ++k)
      m.asv_weights->w(k) = rng.uniform(0.5, 1.5);
  const PreparedTrials pt = prepare_trials(sim.asv, sim.cm, sim.train);
  std::vector<std::size_t> idx(pt.size());
  std::iota(idx.begin(), idx.end(), 0);
  ModelParams g =
      batch_loss(m, sim.asv, sim.cm, pt, idx, cfg, Objective::kJoint, true).grad;
  const TrainableMask all{true, true, true, true, true, true};
  auto pb = parameter_blocks(m, all);
  auto gb = parameter_blocks(g, all);
  for (std::size_t b = 0; b < pb.size(); ++b)
    for (std::size_t k = 0; k < pb[b].size(); ++k) {
      const double orig = pb[b][k];
      const double num = central_difference(
          [&](double v) {
            pb[b][k] = v;
            const double l =
                batch_loss(m, sim.asv, sim.cm, pt, idx, cfg, Objective::kJoint, false).loss;
            pb[b][k] = orig;
            return l;
          },
          orig);
      gc.add(gb[b][k], num);
    }
}

Outcome gradient_suite() {
  GradCheck gc;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(400 + seed);
    check_mlp(rng, gc, seed % 2 ? Activation::kLeakyRelu : Activation::kTanh);
    check_weighted_cosine(rng, gc);
    check_calibrated_fusion(rng, gc);
    check_bce(rng, gc);
    check_losses(rng, gc);
    check_full_graph(seed, gc);
  }
  return {gc.worst <= 1e-4,
          std::to_string(gc.checks) + " partials, worst rel err " + fmt("%.3g", gc.worst)};
}

Outcome soft_to_hard() {
  CounterRng rng(505);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double tau = rng.normal();
    std::vector<double> s;
    std::vector<TrialLabel> y;
    const std::size_t n = 3 + rng.below(200);
    for (std::size_t k = 0; k < n; ++k) {
      const TrialLabel l = k < 3 ? kAllLabels[k] : kAllLabels[rng.below(3)];
      double v = tau + 2 * rng.normal();
      if (std::abs(v - tau) < 0.05) v = tau + (v >= tau ? 0.05 : -0.05) + 0.01 * rng.uniform();
      s.push_back(v);
      y.push_back(l);
    }
    SoftAdcfConfig cfg;
    cfg.tau = tau;
    cfg.alpha = 1e3;
    cfg.normalized = i % 2 == 0;
    std::vector<LabeledScore> ls;
    for (std::size_t k = 0; k < n; ++k) ls.push_back({s[k], y[k]});
    worst = std::max(worst, std::abs(soft_adcf(s, y, cfg).loss -
                                     adcf_at(ls, tau, cfg.cost, cfg.normalized)));
  }
  return {worst <= 1e-6, "worst gap " + fmt("%.3g", worst)};
}

// Score-space fusion study ---------------------------------------------------

std::vector<LabeledScore> fused(const std::vector<SimulatedScore>& s, const FusionConfig& fc,
                                const CalibrationParams& ca, const CalibrationParams& cc) {
  std::vector<LabeledScore> out;
  for (const auto& p : s)
    out.push_back({fuse(fc, calibrate(p.llr_asv, ca), calibrate(p.llr_cm, cc)), p.label});
  return out;
}

Outcome fusion_trend() {
  const CostModel cost;
  int nonlinear_wins = 0;
  double worst_gap = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ScoreSimConfig dev_cfg, eval_cfg;
    dev_cfg.seed = derive_seed(seed, 1);
    eval_cfg.seed = derive_seed(seed, 2);
    const auto dev = simulate_scores(dev_cfg);
    const auto eval = simulate_scores(eval_cfg);

    // Calibrations fitted on dev: target vs nontarget, bona fide vs spoof.
    std::vector<double> xa, xc;
    std::vector<int> ya, yc;
    for (const auto& p : dev) {
      const LabelBits bits = label_maps(p.label);
      if (bits.asv) {
        xa.push_back(p.llr_asv);
        ya.push_back(*bits.asv);
      }
      xc.push_back(p.llr_cm);
      yc.push_back(bits.cm);
    }
    // Dev classes are often separable here; Platt targets keep the fit finite.
    CalibrationOptions platt;
    platt.smooth_targets = true;
    const CalibrationParams ca = fit_calibration(xa, ya, platt).params;
    const CalibrationParams cc = fit_calibration(xc, yc, platt).params;

    // Nonlinear fusion weight fitted on dev.
    double best_rho = 0.5, best_dev = std::numeric_limits<double>::infinity();
    for (int r = 1; r < 100; ++r) {
      const FusionConfig fc{FusionMode::kNonlinear, r / 100.0};
      const double d = min_adcf(fused(dev, fc, ca, cc), cost).min_adcf;
      if (d < best_dev) {
        best_dev = d;
        best_rho = fc.rho_tilde;
      }
    }
    const double nl =
        min_adcf(fused(eval, {FusionMode::kNonlinear, best_rho}, ca, cc), cost).min_adcf;
    const double lin = min_adcf(fused(eval, {FusionMode::kLinear, 0.5}, ca, cc), cost).min_adcf;

    // Bayes decisions from the generating densities.
    std::vector<LabeledScore> bayes;
    for (const auto& p : eval) {
      const auto [la, lc] = true_llrs(eval_cfg, p.llr_asv, p.llr_cm);
      bayes.push_back({bayes_accept(la, lc, cost) ? 1.0 : 0.0, p.label});
    }
    const double opt = adcf_at(bayes, 0.5, cost);
    nonlinear_wins += nl < lin;
    worst_gap = std::max({worst_gap, std::abs(nl - opt), std::abs(lin - opt)});
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s[rho %.2f nl %.4f lin %.4f bayes %.4f]",
                  seed ? " " : "", best_rho, nl, lin, opt);
    per_seed += buf;
  }
  return {nonlinear_wins >= 4 && worst_gap <= 0.02,
          "nonlinear better on " + std::to_string(nonlinear_wins) + "/5, worst gap to Bayes " +
              fmt("%.4f", worst_gap) + " " + per_seed};
}

// Embedding-space joint training ----------------------------------------------

Outcome joint_training() {
  const SimulatedEmbeddings sim = simulate_embeddings(EmbeddingSimConfig{});
  TrainConfig cfg;
  cfg.architecture = Architecture::kWeightedCosineMlp;
  cfg.loss = LossVariant::kV1;
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.epochs = 100;
  const TrainResult r = train_joint(cfg, TrainData{sim.asv, sim.cm, sim.train, sim.dev});

  // ASV-only baseline: calibrated cosine, rho_tilde = 0.
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& t : sim.train) {
    const LabelBits bits = label_maps(t.label);
    if (!bits.asv) continue;
    s.push_back(cosine_score(sim.asv.at(t.enroll_id), sim.asv.at(t.test_id)));
    y.push_back(*bits.asv);
  }
  const CalibrationParams ca = fit_calibration(s, y).params;
  std::vector<LabeledScore> dev;
  for (const auto& t : sim.dev) {
    const double llr = calibrate(cosine_score(sim.asv.at(t.enroll_id), sim.asv.at(t.test_id)), ca);
    dev.push_back({fuse({FusionMode::kNonlinear, 0.0}, llr, 0.0), t.label});
  }
  const double baseline = min_adcf(dev, cfg.cost).min_adcf;
  return {r.best.dev_min_adcf <= 0.02 && baseline >= 0.5,
          "joint " + fmt("%.4f", r.best.dev_min_adcf) + " at epoch " +
              std::to_string(r.best.epoch) + ", ASV-only " + fmt("%.4f", baseline)};
}

Outcome actual_at_least_min() {
  CounterRng rng(808);
  const CostModel cm;
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto dev = random_trials(rng, 3, 200, i % 5 == 0);
    const auto eval = random_trials(rng, 3, 200, i % 5 == 0);
    const bool normalized = i % 2 == 0;
    const double th = min_adcf(dev, cm, normalized).min_threshold;
    violations += actual_adcf(eval, th, cm, normalized) < min_adcf(eval, cm, normalized).min_adcf;
  }
  return {violations == 0, std::to_string(violations) + " violations in 1000 instances"};
}

// Determinism and file formats -------------------------------------------------

struct TrainRun {
  std::string log, checkpoint, report, asv_embeddings, cm_embeddings;
};

TrainRun train_once() {
  EmbeddingSimConfig sc;
  sc.n_speakers = 10;
  sc.train = {200, 200, 200};
  sc.dev = {100, 100, 100};
  sc.eval = {10, 10, 10};
  sc.seed = 42;
  const SimulatedEmbeddings sim = simulate_embeddings(sc);
  TrainConfig cfg;
  cfg.architecture = Architecture::kMlpMlp;
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.init = InitKind::kPretrained;
  cfg.pretrain_epochs = 2;
  cfg.hidden = {32, 16};
  cfg.lr = 0.001;
  cfg.epochs = 4;
  cfg.batch_size = 64;
  cfg.seed = 42;
  const TrainResult r = train_joint(cfg, TrainData{sim.asv, sim.cm, sim.train, sim.dev});
  TrainRun out;
  for (const auto& e : r.log) out.log += format_log_line(e) + "\n";
  out.checkpoint = format_checkpoint(
      {r.best.params, cfg, r.best.epoch, r.best.dev_min_adcf, r.best.dev_threshold});
  std::vector<LabeledScore> scored;
  for (const auto& s : score_trials(r.best.params, sim.asv, sim.cm, sim.dev))
    scored.push_back({*s.s_sasv, s.trial.label});
  EvalReport rep;
  rep.adcf = min_adcf(scored, rep.cost);
  rep.sv_eer = sv_eer(scored);
  rep.spf_eer = spf_eer(scored);
  out.report = format_report(rep);
  out.asv_embeddings = encode_embeddings(sim.asv);
  out.cm_embeddings = encode_embeddings(sim.cm);
  return out;
}

Outcome determinism_and_io() {
  Outcome o;
  const TrainRun a = train_once(), b = train_once();
  const bool same = a.log == b.log && a.checkpoint == b.checkpoint && a.report == b.report &&
                    a.asv_embeddings == b.asv_embeddings && a.cm_embeddings == b.cm_embeddings;

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sasv_acceptance_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto file = [&](const char* name) { return (dir / name).string(); };

  CounterRng rng(909);
  bool round_trips = true;
  std::vector<TrialRecord> proto;
  std::vector<ScoreRecord> scores;
  for (int i = 0; i < 500; ++i) {
    const std::string e = "enr" + std::to_string(rng.below(50)), t = "tst" + std::to_string(i);
    const TrialLabel l = kAllLabels[rng.below(3)];
    proto.push_back({e, t, l});
    scores.push_back({e, t, rng.normal() * std::pow(10.0, rng.uniform(-8, 8)), l});
  }
  write_protocol(file("p.tsv"), proto);
  round_trips &= read_protocol(file("p.tsv")) == proto;
  round_trips &= format_protocol(read_protocol(file("p.tsv"))) == read_file(file("p.tsv"));
  write_scores(file("s.tsv"), scores);
  round_trips &= read_scores(file("s.tsv")) == scores;
  round_trips &= format_scores(read_scores(file("s.tsv"))) == read_file(file("s.tsv"));
  const std::string& emb = a.asv_embeddings;
  write_file_atomic(file("e.bin"), emb);
  write_embeddings(file("e2.bin"), read_embeddings(file("e.bin")));
  round_trips &= read_file(file("e2.bin")) == emb;
  write_file_atomic(file("c.json"), a.checkpoint);
  write_checkpoint(file("c2.json"), read_checkpoint(file("c.json")));
  round_trips &= read_file(file("c2.json")) == a.checkpoint;

  int fuzz_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const bool binary = i % 2 == 0;
    const std::string& src = binary ? emb : a.checkpoint;
    // The checkpoint's final newline is insignificant whitespace.
    const std::size_t cut = rng.below(binary ? src.size() : src.size() - 1);
    write_file_atomic(file("fuzz"), std::string_view(src).substr(0, cut));
    try {
      if (binary)
        read_embeddings(file("fuzz"));
      else
        read_checkpoint(file("fuzz"));
      ++fuzz_failures;
    } catch (const Error& e) {
      fuzz_failures += e.code() != ErrorCode::kParse;
    } catch (...) {
      ++fuzz_failures;
    }
  }
  fs::remove_all(dir);
  o.pass = same && round_trips && fuzz_failures == 0;
  o.detail = std::string(same ? "reruns identical" : "reruns differ") +
             (round_trips ? ", round-trips exact" : ", round-trip mismatch") + ", " +
             std::to_string(fuzz_failures) + "/1000 truncations not rejected";
  return o;
}

Outcome bayes_reduction() {
  CounterRng rng(1010);
  int disagreements = 0;
  for (int i = 0; i < 10000; ++i) {
    const double pt = rng.uniform(0.01, 0.99);
    const CostModel cm = CostModel::make(std::exp(rng.uniform(-3, 3)), std::exp(rng.uniform(-3, 3)),
                                         std::exp(rng.uniform(-3, 3)), pt, 1.0 - pt, 0.0);
    const double a = rng.normal() * 6, c = rng.normal() * 6;
    disagreements += bayes_accept(a, c, cm) != (a > asv_bayes_threshold(cm));
  }
  return {disagreements == 0, std::to_string(disagreements) + " disagreements in 10000"};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace sasv

int main(int argc, char** argv) {
  using namespace sasv;
  const std::vector<Criterion> all = {
      {1, "fusion identities", 1, fusion_identities},
      {2, "min a-DCF oracle equivalence", 5, min_adcf_oracle},
      {3, "calibration/rank invariance", 0, rank_invariance},
      {4, "gradient suite", 30, gradient_suite},
      {5, "soft to hard convergence", 0, soft_to_hard},
      {6, "nonlinear vs linear fusion trend", 120, fusion_trend},
      {7, "end-to-end joint training", 300, joint_training},
      {8, "actual >= min", 0, actual_at_least_min},
      {9, "determinism and I/O", 0, determinism_and_io},
      {10, "Bayes policy reduction", 0, bayes_reduction},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string budget;
    if (c.budget_s > 0) {
      if (secs >= c.budget_s) o.pass = false;
      budget = fmt(" < %.0f s", c.budget_s);
    }
    std::printf("criterion %2d %s: %s (%s; %.2f s%s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, budget.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
