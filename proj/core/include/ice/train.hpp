#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ice/model.hpp"
#include "ice/noise.hpp"
#include "ice/optim.hpp"

namespace ice {

enum class Method {
  cce,
  label_smoothing,
  bootstrap_hard,
  bootstrap_soft,
  gce,
  forward,
  ice_lin,
  ice_pow,
  ice_nn_lin,
  ice_nn_pow,
};

std::string to_string(Method method);
Method method_from_string(const std::string& name);

/// True for the four instance-confidence methods.
bool is_ice(Method method);
/// True for the network-approximated confidence variants.
bool uses_head(Method method);
/// Transform kind for an ice method; throws for non-ice methods.
TemperKind temper_kind_of(Method method);

struct TrainConfig {
  Method method = Method::cce;

  // Baseline knobs (standard defaults; unused fields are ignored).
  double smoothing_eps = 0.1;
  double bootstrap_beta = 0.8;
  double gce_q = 0.7;
  TransitionMatrix forward_matrix;  // required by Method::forward

  std::vector<std::size_t> hidden = {256, 256};
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  std::size_t batch_size = 512;
  std::size_t total_iters = 2000;
  std::uint64_t seed = 1;
  double val_fraction = 0.2;
  double init_confidence = 0.9;

  void validate() const;
};

/// One evaluation record, written at every epoch boundary and once more
/// after a trailing partial epoch. For ice methods `confidence` is the
/// full per-slot confidence snapshot.
struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t iters_done = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  std::vector<double> confidence;
};

struct RunHistory {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_indices;  // slot -> dataset row
  std::vector<std::size_t> val_indices;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
};

void save_history_json(const std::filesystem::path& path, const RunHistory& h);
RunHistory load_history_json(const std::filesystem::path& path);

struct TrainResult {
  Mlp classifier;                        // best-validation-accuracy state
  std::optional<ConfidenceTable> table;  // matching table state
  std::optional<ConfidenceHead> head;
  RunHistory history;

  Checkpoint checkpoint() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on `data` per `config`. The validation split is the tail of a
/// seeded shuffle; every random stream (split, batch order, init) derives
/// from config.seed, so identical inputs give identical results.
/// Throws TrainingFault when a batch loss goes non-finite.
TrainResult train_run(const NoisyDataset& data, const TrainConfig& config,
                      const EpochCallback& on_epoch = nullptr);

/// Fraction of rows whose argmax prediction matches `labels`.
double accuracy(const Mlp& classifier, const Mat& features,
                std::span<const int> labels);

}  // namespace ice
