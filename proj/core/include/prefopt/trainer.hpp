// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "prefopt/losses.hpp"

namespace prefopt {

enum class ScheduleMode { Constant, Linear };

/// Target-margin schedule, applied uniformly over the whole run.
struct GammaSchedule {
  ScheduleMode mode = ScheduleMode::Constant;
  double gamma_start = 0.0;
  double gamma_end = 0.0;

  void validate() const;
};

/// gamma at a given progress in [0, 1]. Constant schedules return
/// gamma_start; linear schedules interpolate to gamma_end.
double gamma_at(const GammaSchedule& schedule, double progress);

struct TrainConfig {
  LossConfig loss;
  double lr = 1e-2;
  int epochs = 1;
  int batch_size = 1;
  std::uint64_t seed = 0;
  GammaSchedule schedule;
  double warmup_frac = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int eval_every = 0;  // extra dataset-margin evals every k steps; 0 = epoch ends only

  void validate() const;
};

/// Adam first/second-moment accumulators, shaped like the parameter block.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  static AdamState zeros_like(const PolicyParams& params) {
    return AdamState{std::vector<double>(params.values.size(), 0.0),
                     std::vector<double>(params.values.size(), 0.0), 0};
  }
};

/// One bias-corrected Adam update, in place. Throws on shape mismatch.
void adam_step(PolicyParams& params, const Gradient& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Per-step diagnostics. m_dataset is present on epoch-boundary records
/// (and every eval_every steps when configured).
struct BatchStats {
  long step = 0;
  double mean_loss = 0.0;
  double m_batch = 0.0;
  double filter_frac = 0.0;
  double gamma = 0.0;
  double lr = 0.0;
  std::optional<double> m_dataset;
};

struct TrainResult {
  PolicyParams params;
  std::vector<BatchStats> stats;
};

/**
 * Minimizes the configured loss over the dataset with Adam.
 *
 * One pass per epoch over a seed-shuffled order; per step the batch pair
 * gradients are averaged, the learning rate follows linear warmup then
 * cosine decay, and gamma comes from the schedule at the current progress.
 * The shuffle stream is derived from config.seed and is independent of any
 * data-generation stream. Bit-deterministic given (config, dataset, init).
 */
TrainResult train(const TrainConfig& config, const std::vector<PreferenceTriple>& dataset,
                  const PolicyParams& init, const PolicyParams* ref);

/// Mean implicit margin over the whole dataset.
double dataset_margin(const PolicyParams& params, const std::vector<PreferenceTriple>& dataset);

/// Fraction of margins with M >= gamma (the zero-gradient share under the
/// strict-inequality update indicator).
double filter_fraction(const std::vector<double>& margins, double gamma);

/// Metrics log: one JSON object per line with fields step, mean_loss,
/// m_batch, filter_frac, gamma, lr and, when present, m_dataset.
void write_metrics(std::ostream& out, const std::vector<BatchStats>& stats);
std::vector<BatchStats> read_metrics(std::istream& in);

}  // namespace prefopt
