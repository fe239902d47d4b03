// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "prefopt/datagen.hpp"
#include "prefopt/trainer.hpp"

namespace prefopt {

/// Fitted constants of the over-optimization law R(d) = d (alpha - beta log d).
struct ScalingFit {
  double alpha = 0.0;
  double beta = 0.0;
  double rss = 0.0;  // residual sum of squares in R units
  int n_points = 0;
};

/// Closed-form least squares on the transformed pairs (log d, R/d), weighted
/// by d^2 so residuals are measured in original R units. Throws
/// InvalidInputError for d <= 0 and DegenerateFitError when all log d
/// coincide.
ScalingFit fit_scaling_law(const std::vector<std::pair<double, double>>& points);

/// d (alpha - beta log d); requires d > 0.
double predict_R(const ScalingFit& fit, double d);

/// The proxy d for one run: mean m_batch over the final 20% of steps
/// (rounded up, at least one step).
double margin_proxy(const std::vector<BatchStats>& stats);

struct WinRateReport {
  long wins = 0;
  long ties = 0;
  long total = 0;
  double win_rate = 0.0;  // (wins + ties/2) / total
};

/// Gold-reward pairwise evaluation: per prompt and repeat, one response is
/// sampled from each policy (independent derived streams) and the higher
/// gold reward wins; exact equality ties. mirror_streams swaps the two
/// per-comparison streams, which together with swapped policies yields the
/// exactly mirrored tournament.
WinRateReport win_rate(const PolicyParams& policy_a, const PolicyParams& policy_b,
                       const std::vector<Prompt>& prompts, const GoldRewardSpec& gold,
                       int samples_per_prompt, RngStream& rng, int max_len,
                       int end_token = kDatasetEndToken, bool mirror_streams = false);

/// One sweep entry for emit_summary.
struct RunRecord {
  std::string run_id;
  GammaSchedule schedule;
  double win_rate = 0.0;
  std::vector<BatchStats> stats;
};

/// Writes out_dir/summary.csv with columns
///   run_id,gamma_start,gamma_end,final_m_dataset,final_filter_frac,win_rate
/// plus one series_<run_id>_gamma<start>[-<end>].jsonl metrics file per run.
/// Byte-identical for identical inputs.
void emit_summary(const std::vector<RunRecord>& runs, const std::filesystem::path& out_dir);

}  // namespace prefopt
