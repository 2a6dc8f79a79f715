#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ice/matrix.hpp"
#include "ice/simplex.hpp"

namespace ice {

/// Row-stochastic K x K matrix; entry (i, j) is the probability of
/// observing noisy class j given true class i.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;

  /// `entries` is row-major K*K. Each row must be a valid ProbVec.
  TransitionMatrix(std::size_t k, std::vector<double> entries);

  static TransitionMatrix identity(std::size_t k);

  /// Diagonal 1-rho, off-diagonal rho/(K-1). rho is the total flip mass.
  static TransitionMatrix uniform_flip(std::size_t k, double rho);

  std::size_t num_classes() const { return k_; }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_[i * k_ + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * k_, k_};
  }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t k_ = 0;
  std::vector<double> entries_;
};

/// q_j = sum_i p_i * T_ij: the class-posterior seen through the noise.
ProbVec noisy_posterior(const ProbVec& p, const TransitionMatrix& t);

/// A labeled dataset with (possibly) corrupted labels. The instance index
/// is the row position: stable identifiers 0..N-1.
struct NoisyDataset {
  Mat features;                         // N x D
  std::vector<int> noisy_labels;        // size N
  std::vector<int> clean_labels;        // size N or empty when unknown
  std::vector<std::uint8_t> flip_mask;  // size N or empty; 1 = label changed
  std::size_t num_classes = 0;

  std::size_t size() const { return noisy_labels.size(); }
  bool has_clean() const { return !clean_labels.empty(); }
  bool has_mask() const { return !flip_mask.empty(); }

  /// Checks label ranges, size agreement, and that flip_mask matches
  /// noisy vs clean labels whenever both are present.
  void validate() const;
};

struct CorruptionResult {
  std::vector<int> noisy_labels;
  std::vector<std::uint8_t> flip_mask;
};

/// Class-conditional corruption: noisy label i drawn from row labels[i]
/// of T. The per-instance stream is keyed by (seed, index), so output is
/// independent of traversal order and identical across platforms.
CorruptionResult corrupt_class_conditional(std::span<const int> labels,
                                           const TransitionMatrix& t,
                                           std::uint64_t seed);

/// Instance-dependent corruption: matrix_fn(index, features_row) supplies
/// the transition matrix per instance. With a constant matrix_fn the
/// output is identical to corrupt_class_conditional at the same seed.
using InstanceMatrixFn =
    std::function<TransitionMatrix(std::size_t, std::span<const double>)>;
CorruptionResult corrupt_instance_dependent(const Mat& features,
                                            std::span<const int> labels,
                                            const InstanceMatrixFn& matrix_fn,
                                            std::uint64_t seed);

}  // namespace ice
