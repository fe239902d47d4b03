// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "prefopt/losses.hpp"

namespace prefopt {

/// Convex piecewise-linear function given by its breakpoints
/// (x strictly increasing, slopes non-decreasing).
struct PiecewiseLinearFn {
  std::vector<std::pair<double, double>> breakpoints;

  /// Linear interpolation between breakpoints; clamps outside the range.
  double value_at(double x) const;
};

/// Outcome of one numeric certification. pass iff max_deviation <= tolerance.
struct TheoryReport {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string grid;
};

/// The misranking loss I(x < 0). Exactly 0 at x = 0.
double zero_one_loss(double x);

/// Lower convex hull of the given points via a monotone-chain scan over
/// x-sorted input. Collinear interior points are dropped. The hull is convex
/// and underestimates every input point. Duplicate x values are rejected.
PiecewiseLinearFn lower_convex_envelope(std::vector<std::pair<double, double>> points);

/// Endpoint-exact affine grid over [lo, hi]; hits 0 exactly whenever
/// lo * k == -hi * (n - k) has an integer solution (it does for every
/// domain used by the checks below).
std::vector<double> theory_grid(double lo, double hi, double step);

/// Certifies that the lower hull of the sampled 0-1 loss on [-a, b] matches
/// (1/a) ReLU(-x) at every grid point.
TheoryReport envelope_check(double a, double b, double grid_step, double tolerance = 1e-9);

/// Certifies -log sigmoid(x) > 0 = L01(x) for every x > 0 in the grid
/// (so the logistic loss fails the underestimation requirement there).
TheoryReport underestimation_check(const std::vector<double>& xs);

/// Certifies that the grid argmin sets of the 0-1 loss and of
/// (1/a) ReLU(-x) both equal the grid points in [0, b].
TheoryReport argmin_check(double a, double b, double grid_step);
TheoryReport argmin_check_on_grid(double a, const std::vector<double>& grid,
                                  const std::string& grid_desc);

/// For each beta (ascending), max over margins with |M - gamma| >= exclusion
/// of |sigma(beta (gamma - M)) - I(M < gamma)|. Passes iff the deviation at
/// the largest beta is within tolerance, deviations are non-increasing in
/// beta, and the weight at M = gamma is exactly 0.5.
TheoryReport sigmoid_limit_check(double gamma, const std::vector<double>& betas,
                                 const std::vector<double>& margins, double exclusion,
                                 double tolerance = 1e-6);

struct GradCheckResult {
  double max_rel_error = 0.0;
  bool boundary = false;  // |margin - gamma| < 2 step at a kink; check skipped
};

/**
 * Central-difference oracle for pair_gradient.
 *
 * Perturbs every policy coordinate touched by the triple (visited bigram
 * rows; all MLP parameters), re-evaluates the loss, and compares against the
 * analytic gradient. Per-coordinate error is relative to max(|fd|, |grad|),
 * falling back to absolute below 1e-12 magnitudes. Instances within 2 * step
 * of a kink (RePO/RePOpp/SLiC/RePOppOnDPO at margin == gamma) are flagged
 * boundary and not scored. step must lie in [1e-8, 1e-4].
 */
GradCheckResult finite_diff_gradcheck(const PolicyParams& policy, const PolicyParams* ref,
                                      const PreferenceTriple& triple, const LossConfig& config,
                                      double step);

/// One randomly drawn gradcheck instance (policy, optional reference,
/// triple, config) for the given loss kind. Alternates model kinds.
struct GradCheckCase {
  PolicyParams policy;
  std::optional<PolicyParams> ref;
  PreferenceTriple triple;
  LossConfig config;
};
GradCheckCase random_gradcheck_case(LossKind kind, RngStream& rng);

/// Runs n non-boundary random cases for the kind; reports the worst
/// relative error. Boundary draws are redrawn.
TheoryReport gradcheck_battery(LossKind kind, int n, std::uint64_t seed, double step,
                               double tolerance = 1e-6);

}  // namespace prefopt
