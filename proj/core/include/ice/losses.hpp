#pragma once

#include <cstddef>
#include <span>

#include "ice/noise.hpp"
#include "ice/simplex.hpp"

namespace ice {

// Baseline losses, all in nats on the predicted class-posterior p.
// Zero-weight target terms are skipped, so the boundary identities
// (smoothing eps = 0, bootstrap beta = 1, forward T = I) reproduce the
// categorical cross-entropy bit-for-bit on a shared forward pass.

/// -log p_y. Returns +infinity when p_y = 0.
double loss_cce(const ProbVec& p, std::size_t y);

/// Cross-entropy against the smoothed target (1-eps) * onehot(y) + eps * u.
double loss_label_smoothing(const ProbVec& p, std::size_t y, double eps);

/// -[beta log p_y + (1-beta) log p_yhat], yhat = argmax p. When the
/// predicted and observed labels coincide this is exactly loss_cce.
double loss_bootstrap_hard(const ProbVec& p, std::size_t y, double beta);

/// Cross-entropy against beta * onehot(y) + (1-beta) * p (target fixed).
double loss_bootstrap_soft(const ProbVec& p, std::size_t y, double beta);

/// Generalized cross-entropy (1 - p_y^q) / q, q in (0, 1]. Approaches
/// loss_cce as q -> 0 and the mean-absolute-error form 1 - p_y at q = 1.
double loss_gce(const ProbVec& p, std::size_t y, double q_exp);

/// Cross-entropy after pushing p through the transition matrix:
/// -log (sum_i p_i T_iy). T is supplied, not estimated.
double loss_forward(const ProbVec& p, std::size_t y_tilde,
                    const TransitionMatrix& t);

namespace detail {

// Span cores shared with the batched training path. `p` must already be a
// softmax output (strictly positive up to underflow).
double cce_core(std::span<const double> p, std::size_t y);
double label_smoothing_core(std::span<const double> p, std::size_t y, double eps);
double bootstrap_hard_core(std::span<const double> p, std::size_t y, double beta);
double bootstrap_soft_core(std::span<const double> p, std::size_t y, double beta);
double gce_core(std::span<const double> p, std::size_t y, double q_exp);
double forward_core(std::span<const double> p, std::size_t y,
                    const TransitionMatrix& t);

}  // namespace detail

}  // namespace ice
