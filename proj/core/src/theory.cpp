// SPDX-License-Identifier: Apache-2.0
#include "prefopt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "prefopt/errors.hpp"
#include "prefopt/numeric.hpp"

namespace prefopt {

namespace {

double cross(const std::pair<double, double>& a, const std::pair<double, double>& b,
             const std::pair<double, double>& c) {
  return (b.first - a.first) * (c.second - a.second) -
         (b.second - a.second) * (c.first - a.first);
}

// The margin a kink sits on, when the kind has one.
std::optional<double> kink_margin(const LossConfig& config, const MarginInputs& in) {
  switch (config.kind) {
    case LossKind::RePO:
    case LossKind::RePOpp: return implicit_margin(in);
    case LossKind::SLiC: return in.sum_w - in.sum_l;
    case LossKind::RePOppOnDPO: return dpo_margin(in);
    default: return std::nullopt;
  }
}

std::set<std::size_t> touched_coordinates(const PolicyParams& policy,
                                          const PreferenceTriple& triple) {
  std::set<std::size_t> touched;
  if (policy.kind == ModelKind::Mlp) {
    for (std::size_t i = 0; i < policy.values.size(); ++i) touched.insert(i);
    return touched;
  }
  const int v = policy.vocab_size;
  for (const TokenSeq* y : {&triple.y_w, &triple.y_l}) {
    int prev = policy.begin_index();
    for (int tok : y->tokens) {
      const std::size_t base = policy.bigram_offset(triple.prompt.class_id, prev, 0);
      for (int i = 0; i < v; ++i) touched.insert(base + static_cast<std::size_t>(i));
      prev = tok;
    }
  }
  return touched;
}

}  // namespace

double PiecewiseLinearFn::value_at(double x) const {
  const auto& bp = breakpoints;
  if (bp.empty()) throw InvalidInputError("empty piecewise-linear function");
  if (x <= bp.front().first) return bp.front().second;
  if (x >= bp.back().first) return bp.back().second;
  auto it = std::upper_bound(bp.begin(), bp.end(), x,
                             [](double v, const auto& p) { return v < p.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (x - lo.first) / (hi.first - lo.first);
  return lo.second + t * (hi.second - lo.second);
}

double zero_one_loss(double x) { return x < 0.0 ? 1.0 : 0.0; }

PiecewiseLinearFn lower_convex_envelope(std::vector<std::pair<double, double>> points) {
  if (points.size() < 2) throw InvalidInputError("need at least 2 points");
  std::sort(points.begin(), points.end());
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].first == points[i - 1].first)
      throw InvalidInputError("duplicate x in envelope input");

  PiecewiseLinearFn hull;
  auto& h = hull.breakpoints;
  for (const auto& p : points) {
    while (h.size() >= 2 && cross(h[h.size() - 2], h.back(), p) <= 0.0) h.pop_back();
    h.push_back(p);
  }
  return hull;
}

std::vector<double> theory_grid(double lo, double hi, double step) {
  if (!(hi > lo) || !(step > 0.0)) throw InvalidInputError("bad grid bounds");
  const auto n = static_cast<long>(std::llround((hi - lo) / step));
  if (n < 1) throw InvalidInputError("grid has fewer than 2 points");
  std::vector<double> grid(static_cast<std::size_t>(n) + 1);
  for (long k = 0; k <= n; ++k)
    grid[static_cast<std::size_t>(k)] =
        (lo * static_cast<double>(n - k) + hi * static_cast<double>(k)) / static_cast<double>(n);
  return grid;
}

TheoryReport envelope_check(double a, double b, double grid_step, double tolerance) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidInputError("envelope_check requires a, b > 0");
  if (!(grid_step <= std::min(a, b) / 10.0))
    throw InvalidInputError("grid_step too coarse for the domain");
  const auto grid = theory_grid(-a, b, grid_step);

  std::vector<std::pair<double, double>> samples;
  samples.reserve(grid.size());
  for (double x : grid) samples.emplace_back(x, zero_one_loss(x));
  const PiecewiseLinearFn hull = lower_convex_envelope(samples);

  double max_dev = 0.0;
  for (double x : grid) max_dev = std::max(max_dev, std::abs(hull.value_at(x) - relu(-x) / a));

  std::ostringstream desc;
  desc << "[-" << a << ", " << b << "] step " << grid_step << " (" << grid.size() << " points)";
  return TheoryReport{"envelope a=" + std::to_string(a) + " b=" + std::to_string(b), max_dev,
                      tolerance, max_dev <= tolerance, desc.str()};
}

TheoryReport underestimation_check(const std::vector<double>& xs) {
  if (xs.empty()) throw InvalidInputError("underestimation_check: empty grid");
  double min_margin = std::numeric_limits<double>::infinity();
  for (double x : xs) {
    if (!(x > 0.0)) throw InvalidInputError("underestimation_check requires x > 0");
    min_margin = std::min(min_margin, softplus(-x));  // -log sigmoid(x)
  }
  // Deviation is the amount by which the logistic loss fails to stay
  // strictly above zero; negative means the corollary holds with margin.
  const double deviation = -min_margin;
  std::ostringstream desc;
  desc << xs.size() << " points in (" << *std::min_element(xs.begin(), xs.end()) << ", "
       << *std::max_element(xs.begin(), xs.end()) << "], min margin " << min_margin;
  return TheoryReport{"logistic-underestimation", deviation, 0.0, deviation < 0.0, desc.str()};
}

TheoryReport argmin_check_on_grid(double a, const std::vector<double>& grid,
                                  const std::string& grid_desc) {
  if (!(a > 0.0)) throw InvalidInputError("argmin_check requires a > 0");
  if (grid.size() < 2) throw InvalidInputError("argmin grid too small");

  auto argmin_set = [](const std::vector<double>& values) {
    const double mn = *std::min_element(values.begin(), values.end());
    std::set<std::size_t> set;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] == mn) set.insert(i);
    return set;
  };

  std::vector<double> l01(grid.size());
  std::vector<double> env(grid.size());
  std::set<std::size_t> expected;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    l01[i] = zero_one_loss(grid[i]);
    env[i] = relu(-grid[i]) / a;
    if (grid[i] >= 0.0) expected.insert(i);
  }
  const auto set_a = argmin_set(l01);
  const auto set_b = argmin_set(env);

  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool in_a = set_a.count(i) > 0;
    const bool in_b = set_b.count(i) > 0;
    const bool in_e = expected.count(i) > 0;
    if (in_a != in_e || in_b != in_e) ++mismatches;
  }
  return TheoryReport{"argmin a=" + std::to_string(a), static_cast<double>(mismatches), 0.0,
                      mismatches == 0, grid_desc};
}

TheoryReport argmin_check(double a, double b, double grid_step) {
  if (!(b > 0.0)) throw InvalidInputError("argmin_check requires b > 0");
  if (!(grid_step <= std::min(a, b) / 10.0) && grid_step != b)
    throw InvalidInputError("grid_step too coarse for the domain");
  std::ostringstream desc;
  desc << "[-" << a << ", " << b << "] step " << grid_step;
  auto report = argmin_check_on_grid(a, theory_grid(-a, b, grid_step), desc.str());
  report.name = "argmin a=" + std::to_string(a) + " b=" + std::to_string(b);
  return report;
}

TheoryReport sigmoid_limit_check(double gamma, const std::vector<double>& betas,
                                 const std::vector<double>& margins, double exclusion,
                                 double tolerance) {
  if (betas.empty()) throw InvalidInputError("sigmoid_limit_check: no betas");
  if (!(exclusion > 0.0)) throw InvalidInputError("exclusion must be > 0");
  if (!std::is_sorted(betas.begin(), betas.end()))
    throw InvalidInputError("betas must be ascending");

  std::vector<double> deviations;
  deviations.reserve(betas.size());
  for (double beta : betas) {
    double dev = 0.0;
    for (double m : margins) {
      if (std::abs(m - gamma) < exclusion) continue;
      const double indicator = m < gamma ? 1.0 : 0.0;
      dev = std::max(dev, std::abs(sigmoid(beta * (gamma - m)) - indicator));
    }
    deviations.push_back(dev);
  }

  bool monotone = true;
  for (std::size_t i = 1; i < deviations.size(); ++i)
    if (deviations[i] > deviations[i - 1]) monotone = false;

  bool midpoint_half = true;
  for (double beta : betas)
    if (sigmoid(beta * (gamma - gamma)) != 0.5) midpoint_half = false;

  const double max_dev = deviations.back();
  std::ostringstream desc;
  desc << margins.size() << " margins, exclusion " << exclusion << ", betas " << betas.front()
       << ".." << betas.back() << (monotone ? ", monotone" : ", NOT monotone")
       << (midpoint_half ? ", sigma(0)=0.5" : ", sigma(0)!=0.5");
  return TheoryReport{"sigmoid-limit gamma=" + std::to_string(gamma), max_dev, tolerance,
                      max_dev <= tolerance && monotone && midpoint_half, desc.str()};
}

GradCheckResult finite_diff_gradcheck(const PolicyParams& policy, const PolicyParams* ref,
                                      const PreferenceTriple& triple, const LossConfig& config,
                                      double step) {
  if (!(step >= 1e-8 && step <= 1e-4))
    throw InvalidInputError("gradcheck step must lie in [1e-8, 1e-4]");

  const MarginInputs at_center = margin_inputs(policy, ref, triple.prompt, triple.y_w, triple.y_l);
  if (const auto km = kink_margin(config, at_center);
      km && std::abs(*km - config.gamma) < 2.0 * step)
    return GradCheckResult{0.0, true};

  const auto report =
      pair_gradient(policy, ref, triple.prompt, triple.y_w, triple.y_l, config);

  PolicyParams perturbed = policy;
  double max_abs_diff = 0.0;
  double scale = 0.0;  // infinity norm over both gradients on the touched set
  for (std::size_t i : touched_coordinates(policy, triple)) {
    const double saved = perturbed.values[i];
    perturbed.values[i] = saved + step;
    const double up = loss_value(
        config, margin_inputs(perturbed, ref, triple.prompt, triple.y_w, triple.y_l));
    perturbed.values[i] = saved - step;
    const double down = loss_value(
        config, margin_inputs(perturbed, ref, triple.prompt, triple.y_w, triple.y_l));
    perturbed.values[i] = saved;

    const double fd = (up - down) / (2.0 * step);
    const double an = report.gradient.values[i];
    max_abs_diff = std::max(max_abs_diff, std::abs(fd - an));
    scale = std::max({scale, std::abs(fd), std::abs(an)});
  }
  // Relative to the gradient scale; absolute once both sides vanish. A flat
  // per-coordinate denominator would score pure roundoff noise against
  // exactly-cancelling coordinates as error 1.
  const double max_err = scale < 1e-12 ? max_abs_diff : max_abs_diff / scale;
  return GradCheckResult{max_err, false};
}

GradCheckCase random_gradcheck_case(LossKind kind, RngStream& rng) {
  GradCheckCase c;
  const int vocab = 4 + next_index(rng, 5);   // 4..8
  const int classes = 1 + next_index(rng, 3); // 1..3
  const bool use_mlp = next_index(rng, 2) == 1;

  auto random_policy = [&](double scale) {
    PolicyParams p = use_mlp ? PolicyParams::mlp(vocab, classes, 3 + next_index(rng, 4))
                             : PolicyParams::bigram(vocab, classes);
    for (double& v : p.values) v = scale * next_gaussian(rng);
    return p;
  };
  c.policy = random_policy(use_mlp ? 0.25 : 0.6);
  if (requires_reference(kind)) c.ref = random_policy(use_mlp ? 0.25 : 0.6);

  c.triple.prompt.class_id = next_index(rng, classes);
  auto random_seq = [&] {
    TokenSeq y;
    const int len = 1 + next_index(rng, 5);
    for (int i = 0; i < len; ++i) y.tokens.push_back(next_index(rng, vocab));
    return y;
  };
  c.triple.y_w = random_seq();
  c.triple.y_l = random_seq();

  c.config.kind = kind;
  c.config.gamma = next_unit(rng);                    // [0, 1)
  c.config.beta = 0.5 + 4.5 * next_unit(rng);         // [0.5, 5)
  c.config.lambda = 0.1 + 0.9 * next_unit(rng);       // [0.1, 1)
  c.config.tau = 0.2 + 0.8 * next_unit(rng);          // [0.2, 1)
  c.config.alpha = 0.05 + 0.45 * next_unit(rng);      // [0.05, 0.5)
  if (kind == LossKind::DPO || kind == LossKind::IPO || kind == LossKind::RDPO)
    c.config.beta = 0.05 + 0.45 * next_unit(rng);     // paper-scale reference betas
  return c;
}

TheoryReport gradcheck_battery(LossKind kind, int n, std::uint64_t seed, double step,
                               double tolerance) {
  RngStream rng = make_stream(seed, static_cast<std::uint64_t>(kind) + 101);
  double worst = 0.0;
  int done = 0;
  int boundary_skips = 0;
  while (done < n) {
    const GradCheckCase c = random_gradcheck_case(kind, rng);
    const auto result = finite_diff_gradcheck(
        c.policy, c.ref ? &*c.ref : nullptr, c.triple, c.config, step);
    if (result.boundary) {
      ++boundary_skips;
      if (boundary_skips > 10 * n) throw NumericError("gradcheck: too many boundary draws");
      continue;
    }
    worst = std::max(worst, result.max_rel_error);
    ++done;
  }
  std::ostringstream desc;
  desc << n << " cases, step " << step << ", " << boundary_skips << " boundary redraws";
  return TheoryReport{std::string("gradcheck ") + loss_kind_name(kind), worst, tolerance,
                      worst <= tolerance, desc.str()};
}

}  // namespace prefopt
