// SPDX-License-Identifier: Apache-2.0
#include "prefopt/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "prefopt/errors.hpp"
#include "prefopt/numeric.hpp"
#include "testutil.hpp"

namespace prefopt {
namespace {

using testutil::random_bigram;
using testutil::random_seq;

MarginInputs inputs_with_margin(double avg_w, double avg_l) {
  MarginInputs in;
  in.avg_w = avg_w;
  in.avg_l = avg_l;
  in.sum_w = avg_w * 3;
  in.sum_l = avg_l * 3;
  in.len_w = 3;
  in.len_l = 3;
  return in;
}

TEST(Margins, ImplicitMargin) {
  EXPECT_DOUBLE_EQ(implicit_margin(inputs_with_margin(-1.0, -1.4)), 0.4);
  EXPECT_DOUBLE_EQ(implicit_margin(inputs_with_margin(-2.0, -2.0)), 0.0);
  EXPECT_DOUBLE_EQ(implicit_margin(inputs_with_margin(-2.0, -1.0)), -1.0);
}

TEST(Margins, DpoMargin) {
  MarginInputs in = inputs_with_margin(-1.0, -1.0);
  in.sum_w = -2.0;
  in.sum_l = -2.5;
  in.ref_sum_w = -2.2;
  in.ref_sum_l = -2.4;
  EXPECT_NEAR(dpo_margin(in), 0.5 - 0.2, 1e-15);

  MarginInputs swapped = in;
  std::swap(swapped.sum_w, swapped.sum_l);
  std::swap(swapped.ref_sum_w, swapped.ref_sum_l);
  std::swap(swapped.len_w, swapped.len_l);
  EXPECT_NEAR(dpo_margin(swapped), -dpo_margin(in), 1e-15);

  in.ref_sum_w.reset();
  EXPECT_THROW(dpo_margin(in), InvalidInputError);
}

TEST(Margins, IdenticalPoliciesGiveZeroDpoMargin) {
  MarginInputs in = inputs_with_margin(-1.0, -1.5);
  in.ref_sum_w = in.sum_w;
  in.ref_sum_l = in.sum_l;
  EXPECT_DOUBLE_EQ(dpo_margin(in), 0.0);
}

TEST(LossValue, RePO) {
  LossConfig cfg{LossKind::RePO, 0.5};
  EXPECT_DOUBLE_EQ(loss_value(cfg, inputs_with_margin(-1.0, -1.1)), 0.4);  // M = 0.1
  EXPECT_DOUBLE_EQ(loss_value(cfg, inputs_with_margin(-1.0, -1.7)), 0.0);  // M = 0.7
}

TEST(LossValue, SimPOAtGammaIsLogTwo) {
  const MarginInputs in = inputs_with_margin(-1.0, -1.3);
  for (double beta : {0.5, 1.0, 10.0}) {
    LossConfig cfg{LossKind::SimPO, implicit_margin(in), beta};  // gamma == M exactly
    EXPECT_DOUBLE_EQ(loss_value(cfg, in), std::log(2.0));
  }
}

TEST(LossValue, RePOppWellSeparatedIsExactlyLogTwo) {
  const MarginInputs at_gamma = inputs_with_margin(-1.0, -1.4);
  LossConfig cfg{LossKind::RePOpp, implicit_margin(at_gamma), 10.0};
  EXPECT_EQ(loss_value(cfg, at_gamma), std::log(2.0));  // M = gamma: ReLU term vanishes
  cfg.gamma = 0.4;
  EXPECT_EQ(loss_value(cfg, inputs_with_margin(-1.0, -1.9)), std::log(2.0));  // M > gamma
}

TEST(LossValue, RePOppBelowGamma) {
  // beta 10, M 0.3, gamma 0.4: softplus(1), computed independently.
  LossConfig cfg{LossKind::RePOpp, 0.4, 10.0};
  const double expected = std::log1p(std::exp(1.0));
  EXPECT_NEAR(loss_value(cfg, inputs_with_margin(-1.0, -1.3)), expected, 1e-12);
  EXPECT_NEAR(expected, 1.3132616875182228, 1e-12);
}

TEST(LossValue, IPO) {
  LossConfig cfg;
  cfg.kind = LossKind::IPO;
  cfg.tau = 0.5;
  MarginInputs in = inputs_with_margin(-1.0, -1.0);
  in.ref_sum_w = in.sum_w;  // dpo margin 0
  in.ref_sum_l = in.sum_l;
  EXPECT_DOUBLE_EQ(loss_value(cfg, in), 1.0);  // (0 - 1)^2
}

TEST(LossValue, SLiCHingePlusRegularizer) {
  LossConfig cfg;
  cfg.kind = LossKind::SLiC;
  cfg.gamma = 1.0;
  cfg.lambda = 0.5;
  MarginInputs in = inputs_with_margin(-1.0, -1.2);  // sums -3.0, -3.6
  // hinge: relu(-(0.6 - 1.0)) = 0.4; regularizer: -0.5 * (-3.0) = 1.5
  EXPECT_NEAR(loss_value(cfg, in), 0.4 + 1.5, 1e-12);
}

TEST(LossValue, ValidatesHyperparameters) {
  LossConfig bad_gamma{LossKind::RePO, 1.5};
  EXPECT_THROW(loss_value(bad_gamma, inputs_with_margin(-1, -1)), InvalidInputError);
  LossConfig bad_beta{LossKind::SimPO, 0.4, 0.0};
  EXPECT_THROW(loss_value(bad_beta, inputs_with_margin(-1, -1)), InvalidInputError);
  LossConfig bad_tau;
  bad_tau.kind = LossKind::IPO;
  bad_tau.tau = 0.0;
  EXPECT_THROW(loss_value(bad_tau, inputs_with_margin(-1, -1)), InvalidInputError);
}

TEST(GradWeight, SimPO) {
  LossConfig cfg{LossKind::SimPO, 0.4, 10.0};
  EXPECT_DOUBLE_EQ(grad_weight(cfg, 0.4), 0.5);
  const double expected = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(grad_weight(cfg, 0.3), expected, 1e-12);
  EXPECT_NEAR(expected, 0.7310585786300049, 1e-12);
}

TEST(GradWeight, RePOIndicatorIsStrict) {
  LossConfig cfg{LossKind::RePO, 0.4};
  EXPECT_EQ(grad_weight(cfg, 0.4), 0.0);  // boundary filtered
  EXPECT_EQ(grad_weight(cfg, 0.39999), 1.0);
  EXPECT_EQ(grad_weight(cfg, 0.9), 0.0);
}

TEST(GradWeight, RePOppIsProductOfSigmoidAndIndicator) {
  LossConfig cfg{LossKind::RePOpp, 0.4, 10.0};
  EXPECT_NEAR(grad_weight(cfg, 0.3), 0.7310585786300049, 1e-12);
  EXPECT_EQ(grad_weight(cfg, 0.4), 0.0);
  EXPECT_EQ(grad_weight(cfg, 0.5), 0.0);
}

TEST(GradWeight, BoundsAndDominance) {
  RngStream rng = make_stream(31);
  for (int i = 0; i < 500; ++i) {
    const double gamma = next_unit(rng);
    const double beta = 0.5 + 9.5 * next_unit(rng);
    const double margin = 4.0 * next_unit(rng) - 2.0;
    const LossConfig simpo{LossKind::SimPO, gamma, beta};
    const LossConfig repo{LossKind::RePO, gamma};
    const LossConfig repopp{LossKind::RePOpp, gamma, beta};
    const double ws = grad_weight(simpo, margin);
    const double wr = grad_weight(repo, margin);
    const double wp = grad_weight(repopp, margin);
    EXPECT_GT(ws, 0.0);
    EXPECT_LT(ws, 1.0);
    EXPECT_TRUE(wr == 0.0 || wr == 1.0);
    EXPECT_LE(wp, std::min(ws, wr));
    EXPECT_GE(wp, 0.0);
  }
}

// Pointwise sigmoid-to-indicator limit at large beta.
TEST(GradWeight, LargeBetaMatchesIndicatorAwayFromGamma) {
  const double gamma = 0.4;
  const LossConfig repo{LossKind::RePO, gamma};
  LossConfig simpo{LossKind::SimPO, gamma, 1e4};
  for (int k = -100; k <= 100; ++k) {
    const double margin = gamma + 0.005 * k;
    if (std::abs(margin - gamma) < 0.01) continue;
    EXPECT_LE(std::abs(grad_weight(simpo, margin) - grad_weight(repo, margin)), 1e-6);
  }
  EXPECT_DOUBLE_EQ(grad_weight(simpo, gamma), 0.5);
}

TEST(PairGradient, RePOFilteredPairHasZeroGradient) {
  // Saturate y_w's path so the margin clears any gamma in [0, 1].
  PolicyParams p = PolicyParams::bigram(6, 1);
  p.logit(0, p.begin_index(), 3) = 30.0;
  const LossConfig cfg{LossKind::RePO, 0.5};
  const auto report =
      pair_gradient(p, nullptr, Prompt{0, {}}, TokenSeq{{3}}, TokenSeq{{1}}, cfg);
  EXPECT_TRUE(report.filtered);
  EXPECT_EQ(report.weight, 0.0);
  EXPECT_EQ(report.loss, 0.0);
  for (double g : report.gradient.values) EXPECT_EQ(g, 0.0);
}

TEST(PairGradient, DescentDirectionCollinearWithAvgDiff) {
  RngStream rng = make_stream(32);
  for (LossKind kind : {LossKind::RePO, LossKind::SimPO, LossKind::RePOpp}) {
    for (int i = 0; i < 20; ++i) {
      const PolicyParams p = random_bigram(6, 2, rng);
      const Prompt prompt{next_index(rng, 2), {}};
      const TokenSeq y_w = random_seq(6, 5, rng);
      const TokenSeq y_l = random_seq(6, 5, rng);
      LossConfig cfg{kind, 0.9, 2.0};  // large gamma: usually unfiltered

      const auto report = pair_gradient(p, nullptr, prompt, y_w, y_l, cfg);
      if (report.filtered) continue;

      const Gradient gw = grad_seq_logprob(p, prompt, y_w, true);
      const Gradient gl = grad_seq_logprob(p, prompt, y_l, true);
      double dot = 0.0, ng = 0.0, nd = 0.0;
      for (std::size_t k = 0; k < gw.values.size(); ++k) {
        const double diff = gw.values[k] - gl.values[k];
        dot += -report.gradient.values[k] * diff;  // descent direction
        ng += report.gradient.values[k] * report.gradient.values[k];
        nd += diff * diff;
      }
      if (ng == 0.0 || nd == 0.0) continue;  // y_w == y_l draw
      EXPECT_NEAR(dot / (std::sqrt(ng) * std::sqrt(nd)), 1.0, 1e-10);
    }
  }
}

TEST(PairGradient, SimPOUnitDirectionInvariantToBeta) {
  RngStream rng = make_stream(33);
  for (int i = 0; i < 20; ++i) {
    const PolicyParams p = random_bigram(6, 2, rng);
    const Prompt prompt{next_index(rng, 2), {}};
    const TokenSeq y_w = random_seq(6, 5, rng);
    const TokenSeq y_l = random_seq(6, 5, rng);
    if (y_w.tokens == y_l.tokens) continue;

    std::vector<std::vector<double>> units;
    for (double beta : {1.0, 10.0, 100.0}) {
      const LossConfig cfg{LossKind::SimPO, 0.4, beta};
      const auto report = pair_gradient(p, nullptr, prompt, y_w, y_l, cfg);
      double norm = 0.0;
      for (double g : report.gradient.values) norm += g * g;
      norm = std::sqrt(norm);
      ASSERT_GT(norm, 0.0);
      std::vector<double> unit(report.gradient.values);
      for (double& g : unit) g /= norm;
      units.push_back(std::move(unit));
    }
    for (std::size_t k = 0; k < units[0].size(); ++k) {
      EXPECT_NEAR(units[0][k], units[1][k], 1e-10);
      EXPECT_NEAR(units[0][k], units[2][k], 1e-10);
    }
  }
}

TEST(PairGradient, RequiresReferenceForDpoFamily) {
  const PolicyParams p = PolicyParams::bigram(4, 1);
  for (LossKind kind : {LossKind::DPO, LossKind::IPO, LossKind::RDPO, LossKind::RePOppOnDPO}) {
    LossConfig cfg;
    cfg.kind = kind;
    cfg.beta = 0.1;
    EXPECT_THROW(pair_gradient(p, nullptr, Prompt{0, {}}, TokenSeq{{1}}, TokenSeq{{2}}, cfg),
                 InvalidInputError)
        << loss_kind_name(kind);
  }
}

TEST(PairGradient, SwappingResponsesNegatesMargins) {
  RngStream rng = make_stream(34);
  const PolicyParams p = random_bigram(6, 2, rng);
  const PolicyParams ref = random_bigram(6, 2, rng);
  const Prompt prompt{0, {}};
  const TokenSeq a = random_seq(6, 5, rng);
  const TokenSeq b = random_seq(6, 5, rng);
  const MarginInputs fwd = margin_inputs(p, &ref, prompt, a, b);
  const MarginInputs rev = margin_inputs(p, &ref, prompt, b, a);
  EXPECT_NEAR(implicit_margin(fwd), -implicit_margin(rev), 1e-15);
  EXPECT_NEAR(dpo_margin(fwd), -dpo_margin(rev), 1e-15);
}

// RePO's loss in M: non-negative, convex piecewise-linear, zero iff M >= gamma.
TEST(LossValue, RePOShapeInMargin) {
  const LossConfig cfg{LossKind::RePO, 0.35};
  auto loss_at = [&](double m) {
    const MarginInputs in = inputs_with_margin(m - 2.0, -2.0);
    return std::pair{loss_value(cfg, in), implicit_margin(in)};
  };
  double prev_slope = -2.0;
  for (double m = -1.0; m <= 1.0; m += 0.01) {
    const auto [v, margin] = loss_at(m);
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v == 0.0, margin >= cfg.gamma);
    EXPECT_NEAR(v, std::max(cfg.gamma - margin, 0.0), 1e-12);  // piecewise-linear form
    const double slope = (loss_at(m + 1e-3).first - v) / 1e-3;
    EXPECT_GE(slope, prev_slope - 1e-9);  // convexity: slopes non-decreasing
    prev_slope = slope;
  }
}

}  // namespace
}  // namespace prefopt
