// SPDX-License-Identifier: Apache-2.0
#include "prefopt/trainer.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "prefopt/errors.hpp"
#include "prefopt/rng.hpp"

namespace prefopt {

namespace {

using nlohmann::json;

constexpr std::uint64_t kShuffleSalt = 0x5348554646ULL;  // "SHUFF"
constexpr double kPi = 3.14159265358979323846;

bool uses_gamma(LossKind kind) {
  switch (kind) {
    case LossKind::RePO:
    case LossKind::RePOpp:
    case LossKind::SimPO:
    case LossKind::SLiC:
    case LossKind::RePOppOnDPO: return true;
    default: return false;
  }
}

// Linear warmup to lr over the first warmup steps, cosine decay after.
double lr_at(double lr, long step, long total_steps, double warmup_frac) {
  const long warmup = std::llround(warmup_frac * static_cast<double>(total_steps));
  if (step < warmup) return lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total_steps <= warmup) return lr;
  const double t = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return lr * 0.5 * (1.0 + std::cos(kPi * t));
}

void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(next_index(rng, static_cast<int>(i)));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

void GammaSchedule::validate() const {
  const bool in_range = gamma_start >= 0.0 && gamma_start <= 1.0 && gamma_end >= 0.0 &&
                        gamma_end <= 1.0;
  if (!in_range) throw InvalidInputError("gamma schedule endpoints must lie in [0, 1]");
  if (mode == ScheduleMode::Constant && gamma_start != gamma_end)
    throw InvalidInputError("constant schedule requires gamma_start == gamma_end");
}

double gamma_at(const GammaSchedule& schedule, double progress) {
  schedule.validate();
  if (!(progress >= 0.0 && progress <= 1.0))
    throw InvalidInputError("progress must be in [0, 1]");
  if (schedule.mode == ScheduleMode::Constant) return schedule.gamma_start;
  return schedule.gamma_start + progress * (schedule.gamma_end - schedule.gamma_start);
}

void TrainConfig::validate() const {
  loss.validate();
  schedule.validate();
  if (!(lr >= 0.0)) throw InvalidInputError("lr must be >= 0");
  if (epochs < 0) throw InvalidInputError("epochs must be >= 0");
  if (batch_size < 1) throw InvalidInputError("batch_size must be >= 1");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0))
    throw InvalidInputError("warmup_frac must be in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw InvalidInputError("adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw InvalidInputError("adam_eps must be > 0");
  if (eval_every < 0) throw InvalidInputError("eval_every must be >= 0");
}

void adam_step(PolicyParams& params, const Gradient& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  const std::size_t n = params.values.size();
  if (grad.values.size() != n || state.m.size() != n || state.v.size() != n)
    throw InvalidInputError("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad.values[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params.values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

TrainResult train(const TrainConfig& config, const std::vector<PreferenceTriple>& dataset,
                  const PolicyParams& init, const PolicyParams* ref) {
  config.validate();
  if (dataset.empty()) throw InvalidInputError("train: empty dataset");
  if (requires_reference(config.loss.kind) && ref == nullptr)
    throw InvalidInputError(std::string(loss_kind_name(config.loss.kind)) +
                            " requires a reference policy");

  const std::size_t n = dataset.size();
  const long steps_per_epoch =
      static_cast<long>((n + static_cast<std::size_t>(config.batch_size) - 1) /
                        static_cast<std::size_t>(config.batch_size));
  const long total_steps = steps_per_epoch * config.epochs;

  TrainResult result{init, {}};
  result.stats.reserve(static_cast<std::size_t>(total_steps));
  AdamState adam = AdamState::zeros_like(init);
  RngStream shuffle_rng = make_stream(config.seed, kShuffleSalt);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const double progress =
          total_steps > 1 ? static_cast<double>(step) / static_cast<double>(total_steps - 1) : 0.0;
      const double gamma = gamma_at(config.schedule, progress);

      LossConfig step_loss = config.loss;
      if (uses_gamma(step_loss.kind)) step_loss.gamma = gamma;

      Gradient mean_grad = Gradient::zeros_like(result.params);
      std::vector<double> margins;
      margins.reserve(stop - start);
      double loss_sum = 0.0;
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& t = dataset[order[i]];
        const auto report =
            pair_gradient(result.params, ref, t.prompt, t.y_w, t.y_l, step_loss);
        loss_sum += report.loss;
        margins.push_back(
            implicit_margin(margin_inputs(result.params, nullptr, t.prompt, t.y_w, t.y_l)));
        for (std::size_t k = 0; k < mean_grad.values.size(); ++k)
          mean_grad.values[k] += report.gradient.values[k] * inv_batch;
      }

      BatchStats stats;
      stats.step = step;
      stats.mean_loss = loss_sum * inv_batch;
      stats.m_batch =
          std::accumulate(margins.begin(), margins.end(), 0.0) / static_cast<double>(margins.size());
      stats.filter_frac = filter_fraction(margins, gamma);
      stats.gamma = gamma;
      stats.lr = lr_at(config.lr, step, total_steps, config.warmup_frac);

      adam_step(result.params, mean_grad, adam, stats.lr, config.adam_beta1, config.adam_beta2,
                config.adam_eps);

      const bool epoch_end = stop == n;
      const bool periodic_eval = config.eval_every > 0 && (step + 1) % config.eval_every == 0;
      if (epoch_end || periodic_eval) stats.m_dataset = dataset_margin(result.params, dataset);

      result.stats.push_back(std::move(stats));
      ++step;
    }
  }
  return result;
}

double dataset_margin(const PolicyParams& params, const std::vector<PreferenceTriple>& dataset) {
  if (dataset.empty()) throw InvalidInputError("dataset_margin: empty dataset");
  double total = 0.0;
  for (const auto& t : dataset)
    total += implicit_margin(margin_inputs(params, nullptr, t.prompt, t.y_w, t.y_l));
  return total / static_cast<double>(dataset.size());
}

double filter_fraction(const std::vector<double>& margins, double gamma) {
  if (margins.empty()) throw InvalidInputError("filter_fraction: empty margin list");
  std::size_t above = 0;
  for (double m : margins)
    if (m >= gamma) ++above;
  return static_cast<double>(above) / static_cast<double>(margins.size());
}

void write_metrics(std::ostream& out, const std::vector<BatchStats>& stats) {
  for (const auto& s : stats) {
    json rec{{"step", s.step},       {"mean_loss", s.mean_loss}, {"m_batch", s.m_batch},
             {"filter_frac", s.filter_frac}, {"gamma", s.gamma},  {"lr", s.lr}};
    if (s.m_dataset) rec["m_dataset"] = *s.m_dataset;
    out << rec.dump() << '\n';
  }
}

std::vector<BatchStats> read_metrics(std::istream& in) {
  std::vector<BatchStats> stats;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad metrics record: ") + e.what(), line_no);
    }
    BatchStats s;
    try {
      s.step = rec.at("step").get<long>();
      s.mean_loss = rec.at("mean_loss").get<double>();
      s.m_batch = rec.at("m_batch").get<double>();
      s.filter_frac = rec.at("filter_frac").get<double>();
      s.gamma = rec.at("gamma").get<double>();
      s.lr = rec.at("lr").get<double>();
      if (rec.contains("m_dataset")) s.m_dataset = rec.at("m_dataset").get<double>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad metrics record: ") + e.what(), line_no);
    }
    stats.push_back(s);
  }
  return stats;
}

}  // namespace prefopt
