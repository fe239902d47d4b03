// SPDX-License-Identifier: Apache-2.0
#include "prefopt/analysis.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "prefopt/errors.hpp"
#include "prefopt/serialize.hpp"

namespace prefopt {

namespace {

constexpr std::uint64_t kWinRateSalt = 0x57494e52ULL;  // "WINR"

std::string schedule_tag(const GammaSchedule& s) {
  std::string tag = "gamma" + format_double(s.gamma_start);
  if (s.mode == ScheduleMode::Linear && s.gamma_end != s.gamma_start)
    tag += "-" + format_double(s.gamma_end);
  return tag;
}

}  // namespace

ScalingFit fit_scaling_law(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw InvalidInputError("fit_scaling_law: need at least 2 points");
  // Weighted linear least squares on the transformed pairs (log d, R/d) with
  // weights d^2, i.e. ordinary least squares in original R units. Unweighted
  // transformed residuals blow additive R noise up by 1/d at small d.
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [d, r] : points) {
    if (!(d > 0.0)) throw InvalidInputError("fit_scaling_law: d must be > 0");
    const double w = d * d;
    const double x = std::log(d);
    const double y = r / d;
    sw += w;
    sx += w * x;
    sy += w * y;
    sxx += w * x * x;
    sxy += w * x * y;
  }
  const double det = sw * sxx - sx * sx;
  if (std::abs(det) <= 1e-12 * std::max(1.0, sw * std::max(1.0, sxx)))
    throw DegenerateFitError("fit_scaling_law: all log d coincide");

  const double slope = (sw * sxy - sx * sy) / det;
  const double intercept = (sy - slope * sx) / sw;

  ScalingFit fit;
  fit.alpha = intercept;
  fit.beta = -slope;
  fit.n_points = static_cast<int>(points.size());
  fit.rss = 0.0;
  for (const auto& [d, r] : points) {
    const double resid = r - predict_R(fit, d);
    fit.rss += resid * resid;
  }
  return fit;
}

double predict_R(const ScalingFit& fit, double d) {
  if (!(d > 0.0)) throw InvalidInputError("predict_R: d must be > 0");
  return d * (fit.alpha - fit.beta * std::log(d));
}

double margin_proxy(const std::vector<BatchStats>& stats) {
  if (stats.empty()) throw InvalidInputError("margin_proxy: empty stats");
  const std::size_t n = stats.size();
  const std::size_t tail = std::max<std::size_t>(1, (n + 4) / 5);  // ceil(n/5)
  double sum = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) sum += stats[i].m_batch;
  return sum / static_cast<double>(tail);
}

WinRateReport win_rate(const PolicyParams& policy_a, const PolicyParams& policy_b,
                       const std::vector<Prompt>& prompts, const GoldRewardSpec& gold,
                       int samples_per_prompt, RngStream& rng, int max_len, int end_token,
                       bool mirror_streams) {
  if (prompts.empty()) throw InvalidInputError("win_rate: no prompts");
  if (samples_per_prompt < 1) throw InvalidInputError("win_rate: samples_per_prompt must be >= 1");

  const std::uint64_t base = rng();  // one draw from the caller's stream seeds the tournament
  WinRateReport report;
  std::uint64_t comparison = 0;
  for (const auto& prompt : prompts) {
    for (int s = 0; s < samples_per_prompt; ++s, ++comparison) {
      RngStream stream_first = make_stream(base ^ kWinRateSalt, comparison, 0);
      RngStream stream_second = make_stream(base ^ kWinRateSalt, comparison, 1);
      RngStream& for_a = mirror_streams ? stream_second : stream_first;
      RngStream& for_b = mirror_streams ? stream_first : stream_second;
      const TokenSeq ya = sample(policy_a, prompt, max_len, for_a, end_token);
      const TokenSeq yb = sample(policy_b, prompt, max_len, for_b, end_token);
      const double ra = gold_reward(gold, prompt, ya);
      const double rb = gold_reward(gold, prompt, yb);
      if (ra > rb)
        ++report.wins;
      else if (ra == rb)
        ++report.ties;
      ++report.total;
    }
  }
  report.win_rate = (static_cast<double>(report.wins) + 0.5 * static_cast<double>(report.ties)) /
                    static_cast<double>(report.total);
  return report;
}

void emit_summary(const std::vector<RunRecord>& runs, const std::filesystem::path& out_dir) {
  if (runs.empty()) throw InvalidInputError("emit_summary: no runs");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::ofstream csv(out_dir / "summary.csv", std::ios::binary);
  if (!csv) throw IoError("cannot open summary.csv for write");
  csv << "run_id,gamma_start,gamma_end,final_m_dataset,final_filter_frac,win_rate\n";
  for (const auto& run : runs) {
    if (run.stats.empty()) throw InvalidInputError("emit_summary: run without stats");
    double final_m_dataset = 0.0;
    bool have_m = false;
    for (auto it = run.stats.rbegin(); it != run.stats.rend(); ++it) {
      if (it->m_dataset) {
        final_m_dataset = *it->m_dataset;
        have_m = true;
        break;
      }
    }
    if (!have_m) throw InvalidInputError("emit_summary: run lacks dataset-margin records");
    csv << run.run_id << ',' << format_double(run.schedule.gamma_start) << ','
        << format_double(run.schedule.gamma_end) << ',' << format_double(final_m_dataset) << ','
        << format_double(run.stats.back().filter_frac) << ',' << format_double(run.win_rate)
        << '\n';

    const auto series_path =
        out_dir / ("series_" + run.run_id + "_" + schedule_tag(run.schedule) + ".jsonl");
    std::ofstream series(series_path, std::ios::binary);
    if (!series) throw IoError("cannot open " + series_path.string() + " for write");
    write_metrics(series, run.stats);
    if (!series) throw IoError("write failed: " + series_path.string());
  }
  if (!csv) throw IoError("write failed: summary.csv");
}

}  // namespace prefopt
