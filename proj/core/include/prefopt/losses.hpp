// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string_view>

#include "prefopt/policy.hpp"

namespace prefopt {

/// Every supported pairwise preference objective.
///
/// Reference-free (policy-only) kinds: RePO, RePOpp, SimPO, SLiC, CPO.
/// Reference-based kinds: DPO, IPO, RDPO, RePOppOnDPO.
enum class LossKind { RePO, RePOpp, SimPO, DPO, SLiC, IPO, CPO, RDPO, RePOppOnDPO };

const char* loss_kind_name(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);
bool requires_reference(LossKind kind);

/// Tagged loss choice plus hyperparameters. Fields unused by a kind are
/// ignored by it.
struct LossConfig {
  LossKind kind = LossKind::RePO;
  double gamma = 0.0;   // target reward margin (RePO/RePOpp/SimPO/SLiC/RePOppOnDPO)
  double beta = 1.0;    // margin scale (SimPO/DPO/CPO/RDPO/RePOpp/RePOppOnDPO)
  double lambda = 0.0;  // SFT regularizer weight (SLiC/CPO)
  double tau = 1.0;     // IPO temperature
  double alpha = 0.0;   // length-penalty weight (RDPO)

  /// Throws InvalidInputError on out-of-range hyperparameters:
  /// gamma in [0, 1] for RePO/RePOpp, beta > 0 where used, tau > 0 for IPO.
  void validate() const;
};

/// Per-pair log-probability summary under the policy (and optionally the
/// reference). avg_* are length-normalized, sum_* raw sums; all <= 0.
struct MarginInputs {
  double avg_w = 0.0;
  double avg_l = 0.0;
  double sum_w = 0.0;
  double sum_l = 0.0;
  std::optional<double> ref_sum_w;
  std::optional<double> ref_sum_l;
  int len_w = 0;
  int len_l = 0;
};

/// Evaluates both responses under the policy (and reference when given).
MarginInputs margin_inputs(const PolicyParams& policy, const PolicyParams* ref,
                           const Prompt& prompt, const TokenSeq& y_w, const TokenSeq& y_l);

/// Implicit reward margin M = avg_w - avg_l (length-normalized).
double implicit_margin(const MarginInputs& in);

/// Reference-adjusted margin (sum_w - sum_l) - (ref_sum_w - ref_sum_l).
/// Throws InvalidInputError when the reference fields are absent.
double dpo_margin(const MarginInputs& in);

/**
 * Per-pair loss. With M the implicit margin, d the reference-adjusted
 * margin, and S = sum_w - sum_l:
 *
 *   RePO         ReLU(-(M - gamma))
 *   SimPO        -log sigma(beta (M - gamma))
 *   RePOpp       -log sigma(-ReLU(-beta (M - gamma)))
 *   DPO          -log sigma(beta d)
 *   SLiC         ReLU(-(S - gamma)) - lambda sum_w
 *   IPO          (d - 1/(2 tau))^2
 *   CPO          -log sigma(beta S) - lambda sum_w
 *   RDPO         -log sigma(beta d - alpha (len_w - len_l))
 *   RePOppOnDPO  -log sigma(-ReLU(-beta (d - gamma)))
 *
 * Log-sigmoid terms are evaluated as softplus of the negated argument, so
 * every value is finite for finite inputs.
 */
double loss_value(const LossConfig& config, const MarginInputs& in);

/**
 * Scalar gradient weight w such that the pair gradient is
 * -beta_eff * w * (gradient of the kind's margin), beta_eff being beta for
 * the sigmoid family and 1 for RePO/SLiC/IPO.
 *
 * The margin argument is the kind's own margin: M for RePO/RePOpp/SimPO,
 * d for DPO/RePOppOnDPO, S for SLiC/CPO, d for IPO, and for RDPO the
 * length-adjusted d - (alpha/beta)(len_w - len_l).
 *
 *   RePO          I(margin < gamma)   (strict; exactly 0 at margin = gamma)
 *   SimPO         sigma(beta (gamma - margin))
 *   RePOpp        sigma(beta (gamma - margin)) * I(margin < gamma)
 *   DPO/CPO/RDPO  sigma(-beta margin)        (gamma treated as 0)
 *   RePOppOnDPO   sigma(beta (gamma - margin)) * I(margin < gamma)
 *   SLiC          I(margin < gamma)
 *   IPO           2 (1/(2 tau) - margin)     (signed; the one non-[0,1] case)
 */
double grad_weight(const LossConfig& config, double margin);

/// Loss, weight, filtered flag (weight exactly 0 and no regularizer term),
/// and the exact parameter gradient of loss_value for one pair.
struct PairGradientReport {
  double loss = 0.0;
  double weight = 0.0;
  bool filtered = false;
  Gradient gradient;
};

/// Assembles the per-pair parameter gradient. ref must be non-null exactly
/// for reference-based kinds. filtered implies an all-zero gradient.
PairGradientReport pair_gradient(const PolicyParams& policy, const PolicyParams* ref,
                                 const Prompt& prompt, const TokenSeq& y_w, const TokenSeq& y_l,
                                 const LossConfig& config);

}  // namespace prefopt
