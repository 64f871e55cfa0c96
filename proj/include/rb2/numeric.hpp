#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace rb2 {

// Probabilities are kept strictly inside (0,1) so log-likelihoods and
// priority exponents stay finite.
inline constexpr double kProbEpsilon = 1e-15;

/// Numerically stable logistic: 0.5*(1+tanh(x/2)) saturates without
/// overflow, then clamped to the open interval.
inline double stable_sigmoid(double x) {
  double p = 0.5 * (1.0 + std::tanh(0.5 * x));
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

/// Softmax with max-subtraction. Empty input yields an empty vector.
inline std::vector<double> stable_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

/// Argmax with ties broken toward the lowest index.
inline int argmax_index(std::span<const double> values) {
  int best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace rb2
