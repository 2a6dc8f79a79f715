#include "ice/losses.hpp"

#include <cmath>
#include <limits>

#include "ice/error.hpp"

namespace ice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_label(std::size_t k, std::size_t y, const char* op) {
  if (y >= k) throw InvalidInput(std::string(op) + ": label out of range");
}

double nll(double py) { return py == 0.0 ? kInf : -std::log(py); }

}  // namespace

namespace detail {

double cce_core(std::span<const double> p, std::size_t y) { return nll(p[y]); }

double label_smoothing_core(std::span<const double> p, std::size_t y,
                            double eps) {
  const std::size_t k = p.size();
  const double off = eps / static_cast<double>(k);  // mass on every class
  const double on = (1.0 - eps) + off;              // mass on the label
  double loss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = i == y ? on : off;
    if (t == 0.0) continue;
    if (p[i] == 0.0) return kInf;
    loss -= t * std::log(p[i]);
  }
  return loss;
}

double bootstrap_hard_core(std::span<const double> p, std::size_t y,
                           double beta) {
  const std::size_t yhat = argmax(p);
  if (yhat == y || beta == 1.0) return nll(p[y]);
  if (p[y] == 0.0 || p[yhat] == 0.0) return kInf;
  return -(beta * std::log(p[y]) + (1.0 - beta) * std::log(p[yhat]));
}

double bootstrap_soft_core(std::span<const double> p, std::size_t y,
                           double beta) {
  const std::size_t k = p.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = (i == y ? beta : 0.0) + (1.0 - beta) * p[i];
    if (t == 0.0) continue;
    if (p[i] == 0.0) return kInf;
    loss -= t * std::log(p[i]);
  }
  return loss;
}

double gce_core(std::span<const double> p, std::size_t y, double q_exp) {
  return (1.0 - std::pow(p[y], q_exp)) / q_exp;
}

double forward_core(std::span<const double> p, std::size_t y,
                    const TransitionMatrix& t) {
  double qy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) qy += p[i] * t(i, y);
  return nll(qy);
}

}  // namespace detail

double loss_cce(const ProbVec& p, std::size_t y) {
  check_label(p.size(), y, "loss_cce");
  return detail::cce_core(p.span(), y);
}

double loss_label_smoothing(const ProbVec& p, std::size_t y, double eps) {
  check_label(p.size(), y, "loss_label_smoothing");
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw InvalidInput("loss_label_smoothing: eps must be in [0, 1]");
  }
  return detail::label_smoothing_core(p.span(), y, eps);
}

double loss_bootstrap_hard(const ProbVec& p, std::size_t y, double beta) {
  check_label(p.size(), y, "loss_bootstrap_hard");
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw InvalidInput("loss_bootstrap_hard: beta must be in [0, 1]");
  }
  return detail::bootstrap_hard_core(p.span(), y, beta);
}

double loss_bootstrap_soft(const ProbVec& p, std::size_t y, double beta) {
  check_label(p.size(), y, "loss_bootstrap_soft");
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw InvalidInput("loss_bootstrap_soft: beta must be in [0, 1]");
  }
  return detail::bootstrap_soft_core(p.span(), y, beta);
}

double loss_gce(const ProbVec& p, std::size_t y, double q_exp) {
  check_label(p.size(), y, "loss_gce");
  if (!(q_exp > 0.0 && q_exp <= 1.0)) {
    throw InvalidInput("loss_gce: q_exp must be in (0, 1]");
  }
  return detail::gce_core(p.span(), y, q_exp);
}

double loss_forward(const ProbVec& p, std::size_t y_tilde,
                    const TransitionMatrix& t) {
  check_label(p.size(), y_tilde, "loss_forward");
  if (p.size() != t.num_classes()) {
    throw InvalidInput("loss_forward: dimension mismatch");
  }
  return detail::forward_core(p.span(), y_tilde, t);
}

}  // namespace ice
