#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ice {

/// Absolute tolerance for simplex membership on 64-bit floats.
inline constexpr double kSimplexTol = 1e-9;

/// A point on the (K-1)-simplex: K >= 2 non-negative entries summing to 1
/// within kSimplexTol. Validated on construction; immutable afterwards.
class ProbVec {
 public:
  ProbVec() = default;

  /// Throws InvalidInput if the values do not form a probability vector.
  explicit ProbVec(std::vector<double> values);

  static ProbVec uniform(std::size_t k);
  static ProbVec one_hot(std::size_t k, std::size_t index);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

  bool operator==(const ProbVec& other) const = default;

 private:
  std::vector<double> values_;
};

/// Validates a raw buffer against the simplex invariants without copying.
/// Throws InvalidInput on violation.
void check_simplex(std::span<const double> values);

/// Numerically safe softmax (max-subtraction). Throws InvalidInput on
/// non-finite logits or K < 2. Preserves the argmax.
ProbVec softmax(std::span<const double> logits);

/// In-place softmax over a raw buffer; shared by the batched training path
/// so that single-sample and batched results are bitwise identical.
/// Tolerates -inf entries (they map to probability 0); +inf/NaN are not
/// checked here.
void softmax_inplace(std::span<double> values);

/// KL(a || b) in nats. Terms with a_i = 0 contribute 0. Returns +infinity
/// when a_i > 0 meets b_i = 0 (support violation is a signal, not a crash).
double kl_divergence(const ProbVec& a, const ProbVec& b);

/// Cross-entropy H(a, b) = -sum_i a_i log b_i in nats. Same support
/// conventions as kl_divergence.
double cross_entropy(const ProbVec& a, const ProbVec& b);

/// Shannon entropy H(p) in nats.
double entropy(const ProbVec& p);

/// Index of the largest entry; ties break to the lowest index.
std::size_t argmax(std::span<const double> values);
std::size_t argmax(const ProbVec& p);

}  // namespace ice
