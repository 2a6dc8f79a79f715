#include "ice/simplex.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ice/error.hpp"

namespace ice {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ProbVec::ProbVec(std::vector<double> values) : values_(std::move(values)) {
  check_simplex(values_);
}

ProbVec ProbVec::uniform(std::size_t k) {
  if (k < 2) throw InvalidInput("ProbVec: K must be >= 2");
  return ProbVec(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

ProbVec ProbVec::one_hot(std::size_t k, std::size_t index) {
  if (k < 2) throw InvalidInput("ProbVec: K must be >= 2");
  if (index >= k) throw InvalidInput("ProbVec::one_hot: index out of range");
  std::vector<double> v(k, 0.0);
  v[index] = 1.0;
  return ProbVec(std::move(v));
}

void check_simplex(std::span<const double> values) {
  if (values.size() < 2) throw InvalidInput("ProbVec: K must be >= 2");
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput("ProbVec: entries must be finite and >= 0");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) {
    throw InvalidInput("ProbVec: entries sum to " + std::to_string(sum) +
                       ", expected 1 within 1e-9");
  }
}

void softmax_inplace(std::span<double> values) {
  double max = -kInf;
  for (double v : values) max = v > max ? v : max;
  double sum = 0.0;
  for (double& v : values) {
    v = std::exp(v - max);
    sum += v;
  }
  const double inv = 1.0 / sum;
  for (double& v : values) v *= inv;
}

ProbVec softmax(std::span<const double> logits) {
  if (logits.size() < 2) throw InvalidInput("softmax: K must be >= 2");
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidInput("softmax: non-finite logit");
  }
  std::vector<double> out(logits.begin(), logits.end());
  softmax_inplace(out);
  return ProbVec(std::move(out));
}

double kl_divergence(const ProbVec& a, const ProbVec& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("kl_divergence: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (b[i] == 0.0) return kInf;
    sum += a[i] * std::log(a[i] / b[i]);
  }
  // Rounding can leave a tiny negative residue when a ~= b.
  return sum < 0.0 ? 0.0 : sum;
}

double cross_entropy(const ProbVec& a, const ProbVec& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("cross_entropy: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (b[i] == 0.0) return kInf;
    sum -= a[i] * std::log(b[i]);
  }
  return sum;
}

double entropy(const ProbVec& p) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    sum -= p[i] * std::log(p[i]);
  }
  return sum < 0.0 ? 0.0 : sum;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t argmax(const ProbVec& p) { return argmax(p.span()); }

}  // namespace ice
