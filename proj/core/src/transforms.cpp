#include "ice/transforms.hpp"

#include <cmath>
#include <limits>

#include "ice/error.hpp"

namespace ice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_confidence(double c) {
  if (!(c >= 0.0 && c <= 1.0)) {
    throw InvalidInput("confidence must be in [0, 1]");
  }
}

}  // namespace

ProbVec temper_linear(const ProbVec& p, double confidence) {
  check_confidence(confidence);
  if (confidence == 1.0) return p;
  const double k = static_cast<double>(p.size());
  const double base = (1.0 - confidence) / k;
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = confidence * p[i] + base;
  return ProbVec(std::move(q));
}

ProbVec temper_power(const ProbVec& p, double confidence) {
  check_confidence(confidence);
  if (confidence == 1.0) return p;
  if (confidence == 0.0) return ProbVec::uniform(p.size());
  // log(0) = -inf is intentional: those entries come out of the softmax
  // as exact zeros, matching lim p_i^c for c > 0.
  std::vector<double> scaled(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    scaled[i] = confidence * std::log(p[i]);
  }
  softmax_inplace(scaled);
  return ProbVec(std::move(scaled));
}

ProbVec temper_power_logits(std::span<const double> logits, double confidence) {
  check_confidence(confidence);
  if (logits.size() < 2) throw InvalidInput("temper_power_logits: K must be >= 2");
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw InvalidInput("temper_power_logits: non-finite logit");
    }
  }
  std::vector<double> scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = confidence * logits[i];
  softmax_inplace(scaled);
  return ProbVec(std::move(scaled));
}

double grad_confidence_linear(const ProbVec& p, double confidence,
                              std::size_t index) {
  check_confidence(confidence);
  if (index >= p.size()) throw InvalidInput("grad_confidence_linear: bad index");
  const double u = 1.0 / static_cast<double>(p.size());
  const double numer = p[index] - u;
  const double denom = confidence * p[index] + (1.0 - confidence) * u;
  if (denom == 0.0) return numer < 0.0 ? -kInf : kInf;
  return numer / denom;
}

double grad_confidence_power(const ProbVec& p, double confidence,
                             std::size_t index) {
  check_confidence(confidence);
  if (index >= p.size()) throw InvalidInput("grad_confidence_power: bad index");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) {
      throw InvalidInput("grad_confidence_power: p must be strictly positive");
    }
  }
  const ProbVec q = temper_power(p, confidence);
  double mean_log = 0.0;  // sum_j q_j log p_j = -H(q, p)
  for (std::size_t j = 0; j < p.size(); ++j) mean_log += q[j] * std::log(p[j]);
  return std::log(p[index]) - mean_log;
}

LinearBackward backprop_linear(const ProbVec& p, double confidence,
                               std::span<const double> upstream) {
  check_confidence(confidence);
  if (upstream.size() != p.size()) {
    throw InvalidInput("backprop_linear: upstream size mismatch");
  }
  LinearBackward out;
  out.wrt_p.resize(p.size());
  const double u = 1.0 / static_cast<double>(p.size());
  double dc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.wrt_p[i] = confidence * upstream[i];
    dc += upstream[i] * (p[i] - u);
  }
  out.wrt_confidence = dc;
  return out;
}

PowerBackward backprop_power_logits(std::span<const double> logits,
                                    double confidence,
                                    std::span<const double> upstream) {
  if (upstream.size() != logits.size()) {
    throw InvalidInput("backprop_power_logits: upstream size mismatch");
  }
  const ProbVec q = temper_power_logits(logits, confidence);
  const std::size_t k = logits.size();
  double mean_upstream = 0.0;  // sum_j upstream_j q_j
  double mean_logit = 0.0;     // sum_j q_j z_j
  for (std::size_t j = 0; j < k; ++j) {
    mean_upstream += upstream[j] * q[j];
    mean_logit += q[j] * logits[j];
  }
  PowerBackward out;
  out.wrt_logits.resize(k);
  double dc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out.wrt_logits[i] = confidence * q[i] * (upstream[i] - mean_upstream);
    dc += upstream[i] * q[i] * (logits[i] - mean_logit);
  }
  out.wrt_confidence = dc;
  return out;
}

}  // namespace ice
