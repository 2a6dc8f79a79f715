#include "ice/optim.hpp"

#include <cmath>

#include "ice/error.hpp"

namespace ice {

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("optimizer: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("optimizer: momentum must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer: weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer: adam betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
}

void ScheduleConfig::validate() const {
  if (total_iters == 0) throw ConfigError("schedule: total_iters must be >= 1");
  if (!(lr_start > 0.0)) throw ConfigError("schedule: lr_start must be > 0");
  if (kind == ScheduleKind::exponential && !(lr_end > 0.0)) {
    throw ConfigError("schedule: lr_end must be > 0");
  }
  if (kind == ScheduleKind::warmup_linear && warmup_iters >= total_iters) {
    throw ConfigError("schedule: warmup_iters must be < total_iters");
  }
}

double schedule_lr(const ScheduleConfig& schedule, std::size_t iter) {
  if (iter >= schedule.total_iters) {
    throw InvalidInput("schedule_lr: iter out of range");
  }
  switch (schedule.kind) {
    case ScheduleKind::constant:
      return schedule.lr_start;
    case ScheduleKind::exponential: {
      if (schedule.total_iters == 1) return schedule.lr_start;
      const double frac = static_cast<double>(iter) /
                          static_cast<double>(schedule.total_iters - 1);
      return schedule.lr_start *
             std::pow(schedule.lr_end / schedule.lr_start, frac);
    }
    case ScheduleKind::warmup_linear: {
      const double peak = schedule.lr_start;
      if (iter <= schedule.warmup_iters) {
        if (schedule.warmup_iters == 0) return peak;
        return peak * static_cast<double>(iter) /
               static_cast<double>(schedule.warmup_iters);
      }
      const double span =
          static_cast<double>(schedule.total_iters - schedule.warmup_iters);
      return peak * static_cast<double>(schedule.total_iters - iter) / span;
    }
  }
  throw InvalidInput("schedule_lr: unknown schedule kind");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  config_.validate();
}

std::size_t Optimizer::add_group(std::size_t size, bool decay) {
  Group g;
  g.decay = decay;
  g.m.assign(size, 0.0);
  if (config_.kind == OptimizerKind::adam) g.v.assign(size, 0.0);
  groups_.push_back(std::move(g));
  return groups_.size() - 1;
}

std::size_t Optimizer::add_sparse_group(std::size_t size) {
  Group g;
  g.sparse = true;
  g.m.assign(size, 0.0);
  if (config_.kind == OptimizerKind::adam) {
    g.v.assign(size, 0.0);
    g.steps.assign(size, 0);
  }
  groups_.push_back(std::move(g));
  return groups_.size() - 1;
}

void Optimizer::step_dense(std::size_t group, std::span<double> params,
                           std::span<const double> grads, double lr) {
  if (group >= groups_.size()) throw InvalidInput("optimizer: bad group id");
  Group& g = groups_[group];
  if (g.sparse) throw InvalidInput("optimizer: dense step on sparse group");
  if (params.size() != g.m.size() || grads.size() != g.m.size()) {
    throw InvalidInput("optimizer: parameter/gradient shape mismatch");
  }
  const double wd = g.decay ? config_.weight_decay : 0.0;
  if (config_.kind == OptimizerKind::sgd_momentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double grad = grads[i] + wd * params[i];
      g.m[i] = config_.momentum * g.m[i] + grad;
      params[i] -= lr * g.m[i];
    }
  } else {
    ++g.step;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(g.step));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(g.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double grad = grads[i] + wd * params[i];
      g.m[i] = config_.beta1 * g.m[i] + (1.0 - config_.beta1) * grad;
      g.v[i] = config_.beta2 * g.v[i] + (1.0 - config_.beta2) * grad * grad;
      const double mhat = g.m[i] / c1;
      const double vhat = g.v[i] / c2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Optimizer::step_sparse(std::size_t group, std::vector<double>& params,
                            std::span<const std::pair<std::size_t, double>> grads,
                            double lr) {
  if (group >= groups_.size()) throw InvalidInput("optimizer: bad group id");
  Group& g = groups_[group];
  if (!g.sparse) throw InvalidInput("optimizer: sparse step on dense group");
  if (params.size() != g.m.size()) {
    throw InvalidInput("optimizer: sparse parameter size mismatch");
  }
  // No weight decay here: decay would drag every confidence toward 0.5
  // and break the semantics of absent entries staying untouched.
  if (config_.kind == OptimizerKind::sgd_momentum) {
    for (const auto& [i, grad] : grads) {
      if (i >= params.size()) throw InvalidInput("optimizer: sparse index out of range");
      g.m[i] = config_.momentum * g.m[i] + grad;
      params[i] -= lr * g.m[i];
    }
  } else {
    for (const auto& [i, grad] : grads) {
      if (i >= params.size()) throw InvalidInput("optimizer: sparse index out of range");
      const auto t = static_cast<double>(++g.steps[i]);
      g.m[i] = config_.beta1 * g.m[i] + (1.0 - config_.beta1) * grad;
      g.v[i] = config_.beta2 * g.v[i] + (1.0 - config_.beta2) * grad * grad;
      const double mhat = g.m[i] / (1.0 - std::pow(config_.beta1, t));
      const double vhat = g.v[i] / (1.0 - std::pow(config_.beta2, t));
      params[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace ice
