#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ice/matrix.hpp"
#include "ice/simplex.hpp"
#include "ice/transforms.hpp"

namespace ice {

/// Numerically stable logistic function.
double sigmoid(double x);

/// Inverse of sigmoid; requires p in (0, 1).
double logit(double p);

/// Fully connected network with rectifier hidden layers and linear output.
/// Weights are stored input-major (in x out) so a batch forward is one
/// matmul per layer. 64-bit parameters throughout.
class Mlp {
 public:
  struct Layer {
    Mat w;                  // in x out
    std::vector<double> b;  // out
  };

  struct Grads {
    std::vector<Mat> w;
    std::vector<std::vector<double>> b;
  };

  /// Per-layer post-activation values kept for the backward pass.
  /// act[0] is the input batch; act[l] the rectified output of layer l-1.
  struct Cache {
    std::vector<Mat> act;
  };

  Mlp() = default;

  /// dims = {input, hidden..., output}, at least {input, output}.
  /// Weights are drawn uniformly from +-1/sqrt(fan_in); biases start at 0.
  Mlp(std::vector<std::size_t> dims, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Batch forward: x is (B x input_dim), result (B x output_dim) logits.
  /// Throws Error naming the layer index if an activation goes non-finite.
  Mat forward(const Mat& x, Cache* cache = nullptr) const;

  /// Single-sample convenience wrapper.
  std::vector<double> forward_one(std::span<const double> x) const;

  /// Backward from dL/dlogits; cache must come from the matching forward.
  Grads backward(const Cache& cache, const Mat& dlogits) const;

  Grads zero_grads() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<Layer> layers_;
};

/// One trainable raw scalar per training instance, addressed by the
/// instance's position in the training split; the confidence is the
/// sigmoid of the raw value.
class ConfidenceTable {
 public:
  ConfidenceTable() = default;
  ConfidenceTable(std::size_t n, double init_confidence);

  std::size_t size() const { return raw_.size(); }
  double confidence_of(std::size_t index) const;

  std::vector<double>& raw() { return raw_; }
  const std::vector<double>& raw() const { return raw_; }

  /// Sigmoid of every raw entry, in index order.
  std::vector<double> confidences() const;

 private:
  std::vector<double> raw_;
};

/// Network approximation of the instance-to-confidence map: a scalar-output
/// Mlp squashed by a sigmoid. The output bias starts at logit(init), so
/// training begins near the same confidence as a fresh table.
struct ConfidenceHead {
  Mlp net;

  ConfidenceHead() = default;
  ConfidenceHead(std::vector<std::size_t> dims, double init_confidence,
                 std::uint64_t seed);

  double confidence_of(std::span<const double> x) const;
};

/// Result of running the composite model on one instance.
struct IceForward {
  std::vector<double> logits;
  ProbVec p;          // softmax(logits)
  ProbVec q;          // tempered posterior actually trained on
  double confidence;  // the C that produced q
};

IceForward ice_forward(const Mlp& classifier, const ConfidenceTable& table,
                       std::span<const double> x, std::size_t index,
                       TemperKind kind);
IceForward ice_forward(const Mlp& classifier, const ConfidenceHead& head,
                       std::span<const double> x, TemperKind kind);

/// Negative log-likelihood of the noisy label under q. Returns +infinity
/// when q[label] is 0.
double ice_loss(const ProbVec& q, int label);

/// A minibatch of training instances. `slots` are positions in the
/// training split and double as confidence-table indices; they must be
/// distinct within one batch.
struct IceBatch {
  Mat x;                          // B x D
  std::vector<int> labels;        // noisy labels
  std::vector<std::size_t> slots; // table slots, used by table source only
};

/// Gradients of the mean batch loss. Table gradients are sparse: only
/// slots present in the batch appear, sorted by slot.
struct IceGrads {
  Mlp::Grads classifier;
  std::vector<std::pair<std::size_t, double>> table_raw;
  std::optional<Mlp::Grads> head;
};

struct IceBatchResult {
  double mean_loss = 0.0;
  IceGrads grads;
};

/// Mean loss and analytic gradients for the composite objective. Exactly
/// one of `table` / `head` must be non-null. The raw-table gradient chains
/// d loss/dC through the sigmoid factor C(1-C).
IceBatchResult ice_batch_backward(const Mlp& classifier,
                                  const ConfidenceTable* table,
                                  const ConfidenceHead* head,
                                  const IceBatch& batch, TemperKind kind);

/// Pure loss evaluation on the same path; the finite-difference oracle in
/// the tests drives this.
double ice_batch_loss(const Mlp& classifier, const ConfidenceTable* table,
                      const ConfidenceHead* head, const IceBatch& batch,
                      TemperKind kind);

/// Everything needed to restore a trained model. Round-trips through the
/// checkpoint file bit-exactly.
struct Checkpoint {
  std::uint64_t seed = 0;
  Mlp classifier;
  std::optional<std::vector<double>> table_raw;
  std::optional<Mlp> head;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ice
