#include "ice/noise.hpp"

#include <string>

#include "ice/error.hpp"
#include "ice/rng.hpp"

namespace ice {

TransitionMatrix::TransitionMatrix(std::size_t k, std::vector<double> entries)
    : k_(k), entries_(std::move(entries)) {
  if (k_ < 2) throw InvalidInput("TransitionMatrix: K must be >= 2");
  if (entries_.size() != k_ * k_) {
    throw InvalidInput("TransitionMatrix: expected K*K entries");
  }
  for (std::size_t i = 0; i < k_; ++i) check_simplex(row(i));
}

TransitionMatrix TransitionMatrix::identity(std::size_t k) {
  std::vector<double> e(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) e[i * k + i] = 1.0;
  return TransitionMatrix(k, std::move(e));
}

TransitionMatrix TransitionMatrix::uniform_flip(std::size_t k, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw InvalidInput("uniform_flip: rho must be in [0, 1]");
  }
  const double off = rho / static_cast<double>(k - 1);
  std::vector<double> e(k * k, off);
  for (std::size_t i = 0; i < k; ++i) e[i * k + i] = 1.0 - rho;
  return TransitionMatrix(k, std::move(e));
}

ProbVec noisy_posterior(const ProbVec& p, const TransitionMatrix& t) {
  if (p.size() != t.num_classes()) {
    throw InvalidInput("noisy_posterior: dimension mismatch");
  }
  const std::size_t k = p.size();
  std::vector<double> q(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double pi = p[i];
    const auto row = t.row(i);
    for (std::size_t j = 0; j < k; ++j) q[j] += pi * row[j];
  }
  return ProbVec(std::move(q));
}

void NoisyDataset::validate() const {
  const std::size_t n = noisy_labels.size();
  if (num_classes < 2) throw InvalidInput("NoisyDataset: K must be >= 2");
  if (features.rows != n) {
    throw InvalidInput("NoisyDataset: features/labels size mismatch");
  }
  if (!clean_labels.empty() && clean_labels.size() != n) {
    throw InvalidInput("NoisyDataset: clean label count mismatch");
  }
  if (!flip_mask.empty() && flip_mask.size() != n) {
    throw InvalidInput("NoisyDataset: flip mask size mismatch");
  }
  const int k = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    if (noisy_labels[i] < 0 || noisy_labels[i] >= k) {
      throw InvalidInput("NoisyDataset: noisy label out of range at row " +
                         std::to_string(i));
    }
    if (!clean_labels.empty() && (clean_labels[i] < 0 || clean_labels[i] >= k)) {
      throw InvalidInput("NoisyDataset: clean label out of range at row " +
                         std::to_string(i));
    }
    if (!clean_labels.empty() && !flip_mask.empty()) {
      const bool flipped = noisy_labels[i] != clean_labels[i];
      if (flipped != (flip_mask[i] != 0)) {
        throw InvalidInput("NoisyDataset: flip mask disagrees with labels at row " +
                           std::to_string(i));
      }
    }
  }
}

namespace {

/// Draws one class from a row of T using a single uniform variate.
int sample_row(std::span<const double> row, double u) {
  double acc = 0.0;
  const std::size_t k = row.size();
  for (std::size_t j = 0; j + 1 < k; ++j) {
    acc += row[j];
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(k - 1);
}

int draw_noisy_label(const TransitionMatrix& t, int label, std::uint64_t seed,
                     std::size_t index) {
  if (label < 0 || static_cast<std::size_t>(label) >= t.num_classes()) {
    throw InvalidInput("corrupt: label out of range at row " +
                       std::to_string(index));
  }
  Rng rng(derive_seed(seed, derive_seed(stream::kCorrupt, index)));
  return sample_row(t.row(static_cast<std::size_t>(label)), rng.uniform());
}

}  // namespace

CorruptionResult corrupt_class_conditional(std::span<const int> labels,
                                           const TransitionMatrix& t,
                                           std::uint64_t seed) {
  CorruptionResult out;
  out.noisy_labels.resize(labels.size());
  out.flip_mask.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int noisy = draw_noisy_label(t, labels[i], seed, i);
    out.noisy_labels[i] = noisy;
    out.flip_mask[i] = noisy != labels[i] ? 1 : 0;
  }
  return out;
}

CorruptionResult corrupt_instance_dependent(const Mat& features,
                                            std::span<const int> labels,
                                            const InstanceMatrixFn& matrix_fn,
                                            std::uint64_t seed) {
  if (features.rows != labels.size()) {
    throw InvalidInput("corrupt_instance_dependent: features/labels mismatch");
  }
  CorruptionResult out;
  out.noisy_labels.resize(labels.size());
  out.flip_mask.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const TransitionMatrix t = matrix_fn(i, features.row_span(i));
    const int noisy = draw_noisy_label(t, labels[i], seed, i);
    out.noisy_labels[i] = noisy;
    out.flip_mask[i] = noisy != labels[i] ? 1 : 0;
  }
  return out;
}

}  // namespace ice
