// SPDX-License-Identifier: Apache-2.0
#include "prefopt/losses.hpp"

#include <cmath>
#include <string>

#include "prefopt/errors.hpp"
#include "prefopt/numeric.hpp"

namespace prefopt {

namespace {

void require_refs(const MarginInputs& in) {
  if (!in.ref_sum_w || !in.ref_sum_l)
    throw InvalidInputError("reference log-probabilities required but absent");
}

double indicator_below(double margin, double gamma) { return margin < gamma ? 1.0 : 0.0; }

}  // namespace

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::RePO: return "repo";
    case LossKind::RePOpp: return "repopp";
    case LossKind::SimPO: return "simpo";
    case LossKind::DPO: return "dpo";
    case LossKind::SLiC: return "slic";
    case LossKind::IPO: return "ipo";
    case LossKind::CPO: return "cpo";
    case LossKind::RDPO: return "rdpo";
    case LossKind::RePOppOnDPO: return "repopp_dpo";
  }
  return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
  for (LossKind k : {LossKind::RePO, LossKind::RePOpp, LossKind::SimPO, LossKind::DPO,
                     LossKind::SLiC, LossKind::IPO, LossKind::CPO, LossKind::RDPO,
                     LossKind::RePOppOnDPO})
    if (name == loss_kind_name(k)) return k;
  return std::nullopt;
}

bool requires_reference(LossKind kind) {
  switch (kind) {
    case LossKind::DPO:
    case LossKind::IPO:
    case LossKind::RDPO:
    case LossKind::RePOppOnDPO: return true;
    default: return false;
  }
}

void LossConfig::validate() const {
  const bool uses_beta = kind == LossKind::SimPO || kind == LossKind::DPO ||
                         kind == LossKind::CPO || kind == LossKind::RDPO ||
                         kind == LossKind::RePOpp || kind == LossKind::RePOppOnDPO;
  if (uses_beta && !(beta > 0.0)) throw InvalidInputError("beta must be > 0");
  if ((kind == LossKind::RePO || kind == LossKind::RePOpp) && !(gamma >= 0.0 && gamma <= 1.0))
    throw InvalidInputError("gamma must be in [0, 1] for this loss");
  if (kind == LossKind::IPO && !(tau > 0.0)) throw InvalidInputError("tau must be > 0");
  if (!std::isfinite(gamma) || !std::isfinite(beta) || !std::isfinite(lambda) ||
      !std::isfinite(tau) || !std::isfinite(alpha))
    throw InvalidInputError("non-finite loss hyperparameter");
}

MarginInputs margin_inputs(const PolicyParams& policy, const PolicyParams* ref,
                           const Prompt& prompt, const TokenSeq& y_w, const TokenSeq& y_l) {
  MarginInputs in;
  in.sum_w = seq_logprob(policy, prompt, y_w, false);
  in.sum_l = seq_logprob(policy, prompt, y_l, false);
  in.len_w = static_cast<int>(y_w.tokens.size());
  in.len_l = static_cast<int>(y_l.tokens.size());
  in.avg_w = in.sum_w / in.len_w;
  in.avg_l = in.sum_l / in.len_l;
  if (ref != nullptr) {
    in.ref_sum_w = seq_logprob(*ref, prompt, y_w, false);
    in.ref_sum_l = seq_logprob(*ref, prompt, y_l, false);
  }
  return in;
}

double implicit_margin(const MarginInputs& in) { return in.avg_w - in.avg_l; }

double dpo_margin(const MarginInputs& in) {
  require_refs(in);
  return (in.sum_w - in.sum_l) - (*in.ref_sum_w - *in.ref_sum_l);
}

double loss_value(const LossConfig& config, const MarginInputs& in) {
  config.validate();
  switch (config.kind) {
    case LossKind::RePO: return relu(-(implicit_margin(in) - config.gamma));
    case LossKind::SimPO: return softplus(-config.beta * (implicit_margin(in) - config.gamma));
    case LossKind::RePOpp:
      return softplus(relu(-config.beta * (implicit_margin(in) - config.gamma)));
    case LossKind::DPO: return softplus(-config.beta * dpo_margin(in));
    case LossKind::SLiC:
      return relu(-(in.sum_w - in.sum_l - config.gamma)) - config.lambda * in.sum_w;
    case LossKind::IPO: {
      const double c = 1.0 / (2.0 * config.tau);
      const double d = dpo_margin(in);
      return (d - c) * (d - c);
    }
    case LossKind::CPO:
      return softplus(-config.beta * (in.sum_w - in.sum_l)) - config.lambda * in.sum_w;
    case LossKind::RDPO:
      return softplus(-(config.beta * dpo_margin(in) -
                        config.alpha * static_cast<double>(in.len_w - in.len_l)));
    case LossKind::RePOppOnDPO:
      return softplus(relu(-config.beta * (dpo_margin(in) - config.gamma)));
  }
  throw InvalidInputError("unknown loss kind");
}

double grad_weight(const LossConfig& config, double margin) {
  if (!std::isfinite(margin)) throw InvalidInputError("non-finite margin");
  switch (config.kind) {
    case LossKind::RePO: return indicator_below(margin, config.gamma);
    case LossKind::SimPO: return sigmoid(config.beta * (config.gamma - margin));
    case LossKind::RePOpp:
    case LossKind::RePOppOnDPO:
      return sigmoid(config.beta * (config.gamma - margin)) *
             indicator_below(margin, config.gamma);
    case LossKind::DPO:
    case LossKind::CPO:
    case LossKind::RDPO: return sigmoid(-config.beta * margin);
    case LossKind::SLiC: return indicator_below(margin, config.gamma);
    case LossKind::IPO: return 2.0 * (1.0 / (2.0 * config.tau) - margin);
  }
  throw InvalidInputError("unknown loss kind");
}

PairGradientReport pair_gradient(const PolicyParams& policy, const PolicyParams* ref,
                                 const Prompt& prompt, const TokenSeq& y_w, const TokenSeq& y_l,
                                 const LossConfig& config) {
  config.validate();
  if (requires_reference(config.kind) && ref == nullptr)
    throw InvalidInputError(std::string(loss_kind_name(config.kind)) +
                            " requires a reference policy");
  const MarginInputs in = margin_inputs(policy, ref, prompt, y_w, y_l);

  PairGradientReport report;
  report.loss = loss_value(config, in);

  const Gradient g_sum_w = grad_seq_logprob(policy, prompt, y_w, false);
  const Gradient g_sum_l = grad_seq_logprob(policy, prompt, y_l, false);
  report.gradient = Gradient::zeros_like(policy);

  // coef_diff multiplies (grad margin) where margin is avg-based or sum-based
  // per kind; coef_w adds a plain -lambda * grad sum_w regularizer pull.
  double coef_diff = 0.0;
  double coef_w = 0.0;
  bool avg_based = false;

  switch (config.kind) {
    case LossKind::RePO: {
      report.weight = grad_weight(config, implicit_margin(in));
      coef_diff = -report.weight;
      avg_based = true;
      break;
    }
    case LossKind::SimPO: {
      report.weight = grad_weight(config, implicit_margin(in));
      coef_diff = -config.beta * report.weight;
      avg_based = true;
      break;
    }
    case LossKind::RePOpp: {
      report.weight = grad_weight(config, implicit_margin(in));
      coef_diff = -config.beta * report.weight;
      avg_based = true;
      break;
    }
    case LossKind::DPO: {
      report.weight = grad_weight(config, dpo_margin(in));
      coef_diff = -config.beta * report.weight;
      break;
    }
    case LossKind::SLiC: {
      report.weight = grad_weight(config, in.sum_w - in.sum_l);
      coef_diff = -report.weight;
      coef_w = -config.lambda;
      break;
    }
    case LossKind::IPO: {
      report.weight = grad_weight(config, dpo_margin(in));
      coef_diff = -report.weight;
      break;
    }
    case LossKind::CPO: {
      report.weight = grad_weight(config, in.sum_w - in.sum_l);
      coef_diff = -config.beta * report.weight;
      coef_w = -config.lambda;
      break;
    }
    case LossKind::RDPO: {
      const double adjusted =
          dpo_margin(in) -
          (config.alpha / config.beta) * static_cast<double>(in.len_w - in.len_l);
      report.weight = grad_weight(config, adjusted);
      coef_diff = -config.beta * report.weight;
      break;
    }
    case LossKind::RePOppOnDPO: {
      report.weight = grad_weight(config, dpo_margin(in));
      coef_diff = -config.beta * report.weight;
      break;
    }
  }

  const double scale_w = avg_based ? 1.0 / static_cast<double>(in.len_w) : 1.0;
  const double scale_l = avg_based ? 1.0 / static_cast<double>(in.len_l) : 1.0;
  for (std::size_t i = 0; i < report.gradient.values.size(); ++i) {
    report.gradient.values[i] =
        coef_diff * (scale_w * g_sum_w.values[i] - scale_l * g_sum_l.values[i]) +
        coef_w * g_sum_w.values[i];
  }

  const bool has_regularizer =
      (config.kind == LossKind::SLiC || config.kind == LossKind::CPO) && config.lambda != 0.0;
  report.filtered = report.weight == 0.0 && !has_regularizer;
  return report;
}

}  // namespace prefopt
