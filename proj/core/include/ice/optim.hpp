#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ice {

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;          // base rate; a schedule may override per step
  double momentum = 0.9;     // sgd_momentum only
  double weight_decay = 0.0; // applied to decay-enabled groups only
  double beta1 = 0.9;        // adam
  double beta2 = 0.999;      // adam
  double eps = 1e-8;         // adam

  void validate() const;
};

enum class ScheduleKind { constant, exponential, warmup_linear };

/// Learning-rate schedules over a fixed horizon of total_iters steps.
///  constant:      lr_start everywhere.
///  exponential:   lr_start * (lr_end / lr_start)^(iter / (total - 1)).
///  warmup_linear: 0 -> lr_start over warmup_iters, then linearly back to 0
///                 at total_iters (lr_start is the peak).
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::constant;
  double lr_start = 1e-3;
  double lr_end = 1e-4;            // exponential only
  std::size_t warmup_iters = 0;    // warmup_linear only
  std::size_t total_iters = 1;

  void validate() const;
};

/// Rate for iteration `iter`; iter must be < total_iters.
double schedule_lr(const ScheduleConfig& schedule, std::size_t iter);

/// First-order optimizer over registered parameter groups.
///
/// sgd_momentum: v <- m v + g (+ wd w on decayed groups); w <- w - lr v.
/// adam:         standard bias-corrected moments; decay (if any) is folded
///               into the gradient (classic L2 style).
///
/// The confidence table registers as a sparse group: only slots that
/// appear in a step's gradient list are touched, so absent entries stay
/// bit-identical. Sparse Adam keeps a per-element step count.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Registers a dense group of `size` parameters. Order of registration
  /// is the group id.
  std::size_t add_group(std::size_t size, bool decay);

  /// Registers the sparse (confidence-table) group.
  std::size_t add_sparse_group(std::size_t size);

  void step_dense(std::size_t group, std::span<double> params,
                  std::span<const double> grads, double lr);

  void step_sparse(std::size_t group, std::vector<double>& params,
                   std::span<const std::pair<std::size_t, double>> grads,
                   double lr);

  const OptimizerConfig& config() const { return config_; }

 private:
  struct Group {
    bool sparse = false;
    bool decay = false;
    std::vector<double> m;         // momentum / first moment
    std::vector<double> v;         // second moment (adam)
    std::uint64_t step = 0;        // dense adam step count
    std::vector<std::uint64_t> steps;  // sparse adam per-element counts
  };

  OptimizerConfig config_;
  std::vector<Group> groups_;
};

}  // namespace ice
