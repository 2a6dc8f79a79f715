#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ice/simplex.hpp"

namespace ice {

/// The two argmax-preserving confidence transforms. Both map the simplex to
/// itself, leave the prediction untouched at confidence 1, and collapse it
/// to the uniform vector at confidence 0.
enum class TemperKind { linear, power };

/// Linear interpolation with the uniform vector:
/// q_i = c * p_i + (1 - c) / K.
ProbVec temper_linear(const ProbVec& p, double confidence);

/// Power transform q_i = p_i^c / sum_j p_j^c, evaluated in log space.
/// Entries with p_i = 0 stay 0 for c > 0; c = 0 yields the uniform vector.
ProbVec temper_power(const ProbVec& p, double confidence);

/// Power transform straight from logits: softmax(c * z). Identical to
/// temper_power(softmax(z), c) up to rounding; the confidence acts as a
/// reciprocal temperature on the logits.
ProbVec temper_power_logits(std::span<const double> logits, double confidence);

/// d/dc log q_i for the linear transform:
/// (p_i - 1/K) / (c * p_i + (1 - c) / K).
/// Sign boundary at p_i = 1/K. Returns +-infinity in the degenerate
/// c = 1, p_i = 0 case.
double grad_confidence_linear(const ProbVec& p, double confidence,
                              std::size_t index);

/// d/dc log q_i for the power transform, exact form:
/// log p_i - sum_j q_j log p_j  with q = temper_power(p, c).
/// Zero exactly where p_i = exp(-H(q, p)). Requires p strictly positive.
double grad_confidence_power(const ProbVec& p, double confidence,
                             std::size_t index);

struct LinearBackward {
  std::vector<double> wrt_p;  // upstream * dq/dp
  double wrt_confidence;      // upstream * dq/dc
};

/// Chain rule through the linear transform: dq_i/dp_j = c * delta_ij,
/// dq_i/dc = p_i - 1/K.
LinearBackward backprop_linear(const ProbVec& p, double confidence,
                               std::span<const double> upstream);

struct PowerBackward {
  std::vector<double> wrt_logits;  // upstream * dq/dz
  double wrt_confidence;           // upstream * dq/dc
};

/// Chain rule through softmax(c * z): dq/dz = c * (diag(q) - q q^T),
/// dq_i/dc = q_i * (z_i - sum_j q_j z_j).
PowerBackward backprop_power_logits(std::span<const double> logits,
                                    double confidence,
                                    std::span<const double> upstream);

}  // namespace ice
