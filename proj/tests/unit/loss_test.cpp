// tests/unit/loss_test.cpp

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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sasv/decision.hpp"
#include "sasv/loss.hpp"
#include "sasv/metrics.hpp"
#include "sasv/rng.hpp"
#include "test_support.hpp"

namespace sasv {
namespace {

struct Batch {
  std::vector<double> s;
  std::vector<TrialLabel> y;
};

Batch random_batch(CounterRng& rng, std::size_t n) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    const TrialLabel l = i < 3 ? kAllLabels[i] : kAllLabels[rng.below(3)];
    b.y.push_back(l);
    b.s.push_back((l == TrialLabel::kTargetBonafide ? 1.0 : -0.5) + 1.5 * rng.normal());
  }
  return b;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

TEST(Bce, Values) {
  EXPECT_NEAR(bce(0.5, 1, BceInput::kProbability).loss, std::log(2.0), 1e-15);
  const auto l = bce(0.0, 0, BceInput::kLogit);
  EXPECT_NEAR(l.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(l.grad, 0.5, 1e-15);
  EXPECT_NEAR(bce(0.0, 1, BceInput::kProbability).loss, -std::log(kBceEpsilon), 1e-9);
  EXPECT_TRUE(std::isfinite(bce(1000.0, 0, BceInput::kLogit).loss));
  EXPECT_NEAR(bce(1000.0, 0, BceInput::kLogit).loss, 1000.0, 1e-9);
  EXPECT_THROW(bce(0.3, 2, BceInput::kLogit), Error);
}

TEST(Bce, GradientsMatchFiniteDifferences) {
  CounterRng rng(1);
  for (int i = 0; i < 200; ++i) {
    const int y = static_cast<int>(rng.below(2));
    const double z = rng.uniform(-8, 8);
    const double num = testing::central_difference(
        [&](double v) { return bce(v, y, BceInput::kLogit).loss; }, z);
    EXPECT_LE(testing::gradient_error(bce(z, y, BceInput::kLogit).grad, num, 1e-9), 1e-6);
    const double p = rng.uniform(0.01, 0.99);
    const double nump = testing::central_difference(
        [&](double v) { return bce(v, y, BceInput::kProbability).loss; }, p, 1e-7);
    EXPECT_LE(testing::gradient_error(bce(p, y, BceInput::kProbability).grad, nump, 1e-9), 1e-6);
  }
}

TEST(SoftAdcf, FarFromThresholdEqualsHard) {
  CounterRng rng(2);
  for (int i = 0; i < 50; ++i) {
    Batch b = random_batch(rng, 60);
    SoftAdcfConfig cfg;
    cfg.alpha = 50;
    cfg.tau = rng.uniform(-1, 1);
    for (auto& s : b.s)
      if (std::abs(s - cfg.tau) < 0.5) s = cfg.tau + (s >= cfg.tau ? 0.5 : -0.5);
    std::vector<LabeledScore> ls;
    for (std::size_t k = 0; k < b.s.size(); ++k) ls.push_back({b.s[k], b.y[k]});
    for (bool norm : {false, true}) {
      cfg.normalized = norm;
      EXPECT_NEAR(soft_adcf(b.s, b.y, cfg).loss, adcf_at(ls, cfg.tau, cfg.cost, norm), 1e-8);
    }
  }
}

TEST(SoftAdcf, AllAtThreshold) {
  const std::vector<double> s{0.7, 0.7, 0.7, 0.7};
  const std::vector<TrialLabel> y{TrialLabel::kTargetBonafide, TrialLabel::kNontargetBonafide,
                                  TrialLabel::kSpoof, TrialLabel::kSpoof};
  SoftAdcfConfig cfg;
  cfg.tau = 0.7;
  cfg.normalized = false;
  const auto r = soft_adcf(s, y, cfg);
  EXPECT_DOUBLE_EQ(r.p_miss_tar, 0.5);
  EXPECT_DOUBLE_EQ(r.p_fa_non, 0.5);
  EXPECT_DOUBLE_EQ(r.p_fa_spf, 0.5);
  EXPECT_NEAR(r.loss, 0.5 * (0.9 + 0.5 + 1.0), 1e-15);
}

TEST(SoftAdcf, GradientSigns) {
  CounterRng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Batch b = random_batch(rng, 40);
    SoftAdcfConfig cfg;
    cfg.tau = rng.normal();
    const auto r = soft_adcf(b.s, b.y, cfg);
    for (std::size_t k = 0; k < b.s.size(); ++k) {
      if (b.y[k] == TrialLabel::kTargetBonafide)
        EXPECT_LE(r.d_scores[k], 0.0);
      else
        EXPECT_GE(r.d_scores[k], 0.0);
    }
  }
}

TEST(SoftAdcf, ApproachesHardAsAlphaGrows) {
  CounterRng rng(4);
  Batch b = random_batch(rng, 50);
  SoftAdcfConfig cfg;
  cfg.tau = 0.1;
  for (auto& s : b.s)
    if (std::abs(s - cfg.tau) < 0.05) s += 0.1;
  std::vector<LabeledScore> ls;
  for (std::size_t k = 0; k < b.s.size(); ++k) ls.push_back({b.s[k], b.y[k]});
  const double hard = adcf_at(ls, cfg.tau, cfg.cost);
  double prev = 1e300;
  for (double alpha : {1.0, 10.0, 100.0, 1000.0}) {
    cfg.alpha = alpha;
    const double gap = std::abs(soft_adcf(b.s, b.y, cfg).loss - hard);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LE(prev, 1e-6);
}

TEST(SoftAdcf, GradientsMatchFiniteDifferences) {
  CounterRng rng(5);
  for (int i = 0; i < 100; ++i) {
    Batch b = random_batch(rng, 12);
    SoftAdcfConfig cfg;
    cfg.tau = rng.normal();
    cfg.alpha = rng.uniform(0.5, 3);
    cfg.normalized = i % 2 == 0;
    const auto r = soft_adcf(b.s, b.y, cfg);
    for (std::size_t k = 0; k < b.s.size(); ++k) {
      const double orig = b.s[k];
      const double num = testing::central_difference(
          [&](double v) {
            b.s[k] = v;
            const double l = soft_adcf(b.s, b.y, cfg).loss;
            b.s[k] = orig;
            return l;
          },
          orig);
      EXPECT_LE(testing::gradient_error(r.d_scores[k], num), 1e-4);
    }
    const double num_tau = testing::central_difference(
        [&](double t) {
          SoftAdcfConfig c = cfg;
          c.tau = t;
          return soft_adcf(b.s, b.y, c).loss;
        },
        cfg.tau);
    EXPECT_LE(testing::gradient_error(r.d_tau, num_tau), 1e-4);
  }
}

TEST(SoftAdcf, Errors) {
  const std::vector<double> s{1, 2};
  const std::vector<TrialLabel> y{TrialLabel::kTargetBonafide, TrialLabel::kSpoof};
  try {
    soft_adcf(s, y, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyClass);
  }
  SoftAdcfConfig bad;
  bad.alpha = 0;
  EXPECT_THROW(bad.validate(), Error);
}

double mean_sasv_bce(const Batch& b) {
  double t = 0;
  for (std::size_t k = 0; k < b.s.size(); ++k) {
    const int y = b.y[k] == TrialLabel::kTargetBonafide;
    t += softplus(b.s[k]) - y * b.s[k];
  }
  return t / static_cast<double>(b.s.size());
}

TEST(CombinedV1, EndpointsAndSumOfParts) {
  CounterRng rng(6);
  for (int i = 0; i < 50; ++i) {
    const Batch b = random_batch(rng, 30);
    SoftAdcfConfig cfg;
    cfg.tau = rng.normal();
    const double adcf = soft_adcf(b.s, b.y, cfg).loss;
    const double bce_part = mean_sasv_bce(b);
    EXPECT_NEAR(combined_loss_v1(b.s, b.y, {0, 1}, cfg).loss, bce_part, 1e-12);
    EXPECT_NEAR(combined_loss_v1(b.s, b.y, {1, 0}, cfg).loss, adcf, 1e-12);
    EXPECT_NEAR(combined_loss_v1(b.s, b.y, {1, 1}, cfg).loss, adcf + bce_part, 1e-12);
    const double b1 = rng.uniform(0, 3), b2 = rng.uniform(0, 3);
    EXPECT_NEAR(combined_loss_v1(b.s, b.y, {b1, b2}, cfg).loss, b1 * adcf + b2 * bce_part,
                1e-12);
  }
  EXPECT_THROW(combined_loss_v1(std::vector<double>{1}, std::vector<TrialLabel>{TrialLabel::kSpoof},
                                {0, 0}, {}),
               Error);
}

TEST(CombinedV2, EndpointsAndSumOfParts) {
  CounterRng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Batch b = random_batch(rng, 30);
    std::vector<double> a(b.s.size()), c(b.s.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = rng.normal();
      c[k] = rng.normal();
    }
    SoftAdcfConfig cfg;
    cfg.tau = rng.normal();
    const double adcf = soft_adcf(b.s, b.y, cfg).loss;
    double asv = 0, nasv = 0, cm = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const auto bits = label_maps(b.y[k]);
      if (bits.asv) {
        asv += softplus(a[k]) - *bits.asv * a[k];
        ++nasv;
      }
      cm += softplus(c[k]) - bits.cm * c[k];
    }
    asv /= nasv;
    cm /= static_cast<double>(a.size());
    EXPECT_NEAR(combined_loss_v2(a, c, b.s, b.y, {0, 0, 1, 0, 0}, cfg).loss, adcf, 1e-12);
    const auto aux = combined_loss_v2(a, c, b.s, b.y, {0, 0, 0, 1, 1}, cfg);
    EXPECT_NEAR(aux.loss, asv + cm, 1e-12);
    for (double d : aux.d_sasv) EXPECT_EQ(d, 0.0);
    EXPECT_EQ(aux.d_tau, 0.0);
    const double l1 = rng.uniform(0, 2), l2 = rng.uniform(0, 2), l3 = rng.uniform(0, 2);
    EXPECT_NEAR(combined_loss_v2(a, c, b.s, b.y, {0, 0, l1, l2, l3}, cfg).loss,
                l1 * adcf + l2 * asv + l3 * cm, 1e-12);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (b.y[k] == TrialLabel::kSpoof) {
        EXPECT_EQ(aux.d_asv[k], 0.0);
      }
  }
}

TEST(Combined, GradientsMatchFiniteDifferences) {
  CounterRng rng(8);
  for (int i = 0; i < 100; ++i) {
    Batch b = random_batch(rng, 10);
    std::vector<double> a(b.s.size()), c(b.s.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = rng.normal();
      c[k] = rng.normal();
    }
    SoftAdcfConfig cfg;
    cfg.tau = rng.normal();
    const LossWeights w{rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2),
                        rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
    const auto r1 = combined_loss_v1(b.s, b.y, w, cfg);
    const auto r2 = combined_loss_v2(a, c, b.s, b.y, w, cfg);
    auto probe = [&](std::vector<double>& v, std::size_t k, bool v2) {
      const double orig = v[k];
      return testing::central_difference(
          [&](double x) {
            v[k] = x;
            const double l = v2 ? combined_loss_v2(a, c, b.s, b.y, w, cfg).loss
                                : combined_loss_v1(b.s, b.y, w, cfg).loss;
            v[k] = orig;
            return l;
          },
          orig);
    };
    for (std::size_t k = 0; k < b.s.size(); ++k) {
      EXPECT_LE(testing::gradient_error(r1.d_sasv[k], probe(b.s, k, false)), 1e-4);
      EXPECT_LE(testing::gradient_error(r2.d_sasv[k], probe(b.s, k, true)), 1e-4);
      EXPECT_LE(testing::gradient_error(r2.d_asv[k], probe(a, k, true)), 1e-4);
      EXPECT_LE(testing::gradient_error(r2.d_cm[k], probe(c, k, true)), 1e-4);
    }
    const double num_tau = testing::central_difference(
        [&](double t) {
          SoftAdcfConfig cc = cfg;
          cc.tau = t;
          return combined_loss_v1(b.s, b.y, w, cc).loss;
        },
        cfg.tau);
    EXPECT_LE(testing::gradient_error(r1.d_tau, num_tau), 1e-4);
  }
}

TEST(LossWeights, Validation) {
  EXPECT_THROW((LossWeights{-1, 1}.validate_v1()), Error);
  EXPECT_THROW((LossWeights{0, 0}.validate_v1()), Error);
  EXPECT_THROW((LossWeights{1, 1, 0, 0, 0}.validate_v2()), Error);
  EXPECT_NO_THROW((LossWeights{}.validate_v1()));
  EXPECT_NO_THROW((LossWeights{}.validate_v2()));
}

}  // namespace
}  // namespace sasv
