// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

namespace prefopt {

/// Logistic function, exact 0.5 at z = 0, no overflow for any finite z.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// softplus(z) = log(1 + exp(z)) = -log(sigmoid(-z)), overflow-safe.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace prefopt
