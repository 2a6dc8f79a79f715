#include "ice/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ice/error.hpp"
#include "ice/losses.hpp"
#include "ice/rng.hpp"

namespace ice {

using nlohmann::json;

std::string to_string(Method method) {
  switch (method) {
    case Method::cce: return "cce";
    case Method::label_smoothing: return "label_smoothing";
    case Method::bootstrap_hard: return "bootstrap_hard";
    case Method::bootstrap_soft: return "bootstrap_soft";
    case Method::gce: return "gce";
    case Method::forward: return "forward";
    case Method::ice_lin: return "ice_lin";
    case Method::ice_pow: return "ice_pow";
    case Method::ice_nn_lin: return "ice_nn_lin";
    case Method::ice_nn_pow: return "ice_nn_pow";
  }
  throw InvalidInput("to_string: unknown method");
}

Method method_from_string(const std::string& name) {
  static const std::vector<Method> all = {
      Method::cce,        Method::label_smoothing, Method::bootstrap_hard,
      Method::bootstrap_soft, Method::gce,         Method::forward,
      Method::ice_lin,    Method::ice_pow,         Method::ice_nn_lin,
      Method::ice_nn_pow};
  for (Method m : all) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool is_ice(Method method) {
  return method == Method::ice_lin || method == Method::ice_pow ||
         method == Method::ice_nn_lin || method == Method::ice_nn_pow;
}

bool uses_head(Method method) {
  return method == Method::ice_nn_lin || method == Method::ice_nn_pow;
}

TemperKind temper_kind_of(Method method) {
  switch (method) {
    case Method::ice_lin:
    case Method::ice_nn_lin: return TemperKind::linear;
    case Method::ice_pow:
    case Method::ice_nn_pow: return TemperKind::power;
    default:
      throw InvalidInput("temper_kind_of: not an ice method");
  }
}

void TrainConfig::validate() const {
  if (!(smoothing_eps >= 0.0 && smoothing_eps <= 1.0)) {
    throw ConfigError("train: smoothing_eps must be in [0, 1]");
  }
  if (!(bootstrap_beta >= 0.0 && bootstrap_beta <= 1.0)) {
    throw ConfigError("train: bootstrap_beta must be in [0, 1]");
  }
  if (!(gce_q > 0.0 && gce_q <= 1.0)) {
    throw ConfigError("train: gce_q must be in (0, 1]");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (total_iters < 1) throw ConfigError("train: total_iters must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("train: val_fraction must be in [0, 1)");
  }
  if (!(init_confidence > 0.0 && init_confidence < 1.0)) {
    throw ConfigError("train: init_confidence must be in (0, 1)");
  }
  if (method == Method::forward && forward_matrix.num_classes() == 0) {
    throw ConfigError("train: method 'forward' requires a transition matrix");
  }
  optimizer.validate();
  schedule.validate();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Per-sample loss and dL/dlogits for the baseline (non-ice) methods.
/// Targets are treated as constants, so every method reduces to
/// dz = w * (p - t) for a method-specific target t and scale w.
double baseline_loss_grad(const TrainConfig& cfg, std::span<const double> p,
                          std::size_t y, std::span<double> dz) {
  const std::size_t k = p.size();
  switch (cfg.method) {
    case Method::cce: {
      for (std::size_t j = 0; j < k; ++j) dz[j] = p[j];
      dz[y] -= 1.0;
      return detail::cce_core(p, y);
    }
    case Method::label_smoothing: {
      const double off = cfg.smoothing_eps / static_cast<double>(k);
      const double on = (1.0 - cfg.smoothing_eps) + off;
      for (std::size_t j = 0; j < k; ++j) dz[j] = p[j] - off;
      dz[y] = p[y] - on;
      return detail::label_smoothing_core(p, y, cfg.smoothing_eps);
    }
    case Method::bootstrap_hard: {
      const std::size_t yhat = argmax(p);
      for (std::size_t j = 0; j < k; ++j) dz[j] = p[j];
      if (yhat == y || cfg.bootstrap_beta == 1.0) {
        dz[y] -= 1.0;
      } else {
        dz[y] -= cfg.bootstrap_beta;
        dz[yhat] -= 1.0 - cfg.bootstrap_beta;
      }
      return detail::bootstrap_hard_core(p, y, cfg.bootstrap_beta);
    }
    case Method::bootstrap_soft: {
      const double beta = cfg.bootstrap_beta;
      for (std::size_t j = 0; j < k; ++j) {
        dz[j] = p[j] - (1.0 - beta) * p[j];
      }
      dz[y] -= beta;
      return detail::bootstrap_soft_core(p, y, beta);
    }
    case Method::gce: {
      const double w = std::pow(p[y], cfg.gce_q);
      for (std::size_t j = 0; j < k; ++j) dz[j] = w * p[j];
      dz[y] -= w;
      return detail::gce_core(p, y, cfg.gce_q);
    }
    case Method::forward: {
      const TransitionMatrix& t = cfg.forward_matrix;
      double qy = 0.0;
      for (std::size_t i = 0; i < k; ++i) qy += p[i] * t(i, y);
      if (qy == 0.0) {
        for (std::size_t j = 0; j < k; ++j) dz[j] = 0.0;
        return kInf;
      }
      for (std::size_t j = 0; j < k; ++j) {
        dz[j] = p[j] * (1.0 - t(j, y) / qy);
      }
      return -std::log(qy);
    }
    default:
      throw InvalidInput("baseline_loss_grad: ice method routed here");
  }
}

struct EvalMetrics {
  double loss = 0.0;  // mean cce against the provided labels
  double acc = 0.0;
};

/// Chunked forward over a row subset; loss/accuracy against labels[rows].
EvalMetrics evaluate(const Mlp& model, const Mat& features,
                     std::span<const int> labels,
                     std::span<const std::size_t> rows) {
  EvalMetrics out;
  if (rows.empty()) {
    out.loss = std::numeric_limits<double>::quiet_NaN();
    out.acc = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const std::size_t chunk = 1024;
  const std::size_t d = features.cols;
  const std::size_t k = model.output_dim();
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<double> p(k);
  Mat x;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::size_t n = std::min(chunk, rows.size() - start);
    x.rows = n;
    x.cols = d;
    x.data.resize(n * d);
    for (std::size_t b = 0; b < n; ++b) {
      const double* src = features.row(rows[start + b]);
      std::copy(src, src + d, x.row(b));
    }
    const Mat logits = model.forward(x);
    for (std::size_t b = 0; b < n; ++b) {
      const double* z = logits.row(b);
      for (std::size_t j = 0; j < k; ++j) p[j] = z[j];
      softmax_inplace(p);
      const auto y = static_cast<std::size_t>(labels[rows[start + b]]);
      loss += detail::cce_core(p, y);
      if (argmax(std::span<const double>(p)) == y) ++correct;
    }
  }
  out.loss = loss / static_cast<double>(rows.size());
  out.acc = static_cast<double>(correct) / static_cast<double>(rows.size());
  return out;
}

std::string describe_batch(std::span<const std::size_t> slots) {
  std::ostringstream os;
  os << "[";
  const std::size_t show = std::min<std::size_t>(slots.size(), 8);
  for (std::size_t i = 0; i < show; ++i) {
    if (i) os << ", ";
    os << slots[i];
  }
  if (slots.size() > show) os << ", ...";
  os << "]";
  return os.str();
}

}  // namespace

double accuracy(const Mlp& classifier, const Mat& features,
                std::span<const int> labels) {
  if (features.rows != labels.size()) {
    throw InvalidInput("accuracy: feature/label count mismatch");
  }
  std::vector<std::size_t> rows(features.rows);
  std::iota(rows.begin(), rows.end(), 0);
  return evaluate(classifier, features, labels, rows).acc;
}

TrainResult train_run(const NoisyDataset& data, const TrainConfig& config,
                      const EpochCallback& on_epoch) {
  config.validate();
  data.validate();
  const std::size_t n = data.size();
  const std::size_t d = data.features.cols;
  const std::size_t k = data.num_classes;
  if (config.method == Method::forward &&
      config.forward_matrix.num_classes() != k) {
    throw ConfigError("train: forward matrix size does not match K");
  }

  // Split: tail of a seeded shuffle goes to validation.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.seed, stream::kSplit));
  split_rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(
      config.val_fraction * static_cast<double>(n));
  const std::size_t n_train = n - n_val;
  if (n_train == 0) throw ConfigError("train: empty training split");
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> val_rows(order.begin() + n_train, order.end());

  // Model and confidence source.
  std::vector<std::size_t> dims;
  dims.push_back(d);
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(k);
  Mlp classifier(dims, derive_seed(config.seed, stream::kInitClassifier));

  const bool ice_method = is_ice(config.method);
  const bool head_method = uses_head(config.method);
  std::optional<ConfidenceTable> table;
  std::optional<ConfidenceHead> head;
  if (ice_method && !head_method) {
    table.emplace(n_train, config.init_confidence);
  } else if (head_method) {
    std::vector<std::size_t> head_dims = dims;
    head_dims.back() = 1;
    head.emplace(head_dims, config.init_confidence,
                 derive_seed(config.seed, stream::kInitHead));
  }

  // Optimizer groups: one per parameter tensor (weights then bias, layer by
  // layer, classifier before head), then the sparse table. The step code
  // below walks tensors in the same order.
  Optimizer optimizer(config.optimizer);
  std::vector<std::size_t> dense_group_ids;
  auto register_net = [&](Mlp& net) {
    for (auto& layer : net.layers()) {
      dense_group_ids.push_back(optimizer.add_group(layer.w.data.size(), true));
      dense_group_ids.push_back(optimizer.add_group(layer.b.size(), true));
    }
  };
  register_net(classifier);
  if (head) register_net(head->net);
  std::size_t table_group = 0;
  if (table) table_group = optimizer.add_sparse_group(table->size());

  // Batch machinery.
  const std::size_t batch = std::min(config.batch_size, n_train);
  const std::size_t iters_per_epoch = std::max<std::size_t>(1, n_train / batch);
  IceBatch step_batch;
  step_batch.x = Mat(batch, d);
  step_batch.labels.resize(batch);
  step_batch.slots.resize(batch);

  TrainResult result;
  result.history.method = to_string(config.method);
  result.history.seed = config.seed;
  result.history.train_indices = train_rows;
  result.history.val_indices = val_rows;

  // Best-checkpoint tracking (first epoch reaching the maximum wins).
  double best_acc = -1.0;
  std::size_t best_epoch = 0;
  Mlp best_classifier = classifier;
  std::optional<ConfidenceTable> best_table = table;
  std::optional<ConfidenceHead> best_head = head;

  std::vector<std::size_t> epoch_order(n_train);
  std::iota(epoch_order.begin(), epoch_order.end(), 0);
  double loss_accum = 0.0;
  std::size_t loss_count = 0;
  std::size_t epoch = 0;
  std::size_t cursor = iters_per_epoch;  // force a shuffle on entry

  const TemperKind kind =
      ice_method ? temper_kind_of(config.method) : TemperKind::linear;

  Mat dlogits(batch, k);
  std::vector<double> p(k);

  auto record_epoch = [&](std::size_t iters_done) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.iters_done = iters_done;
    rec.train_loss =
        loss_count ? loss_accum / static_cast<double>(loss_count) : 0.0;
    const EvalMetrics metrics =
        evaluate(classifier, data.features, data.noisy_labels, val_rows);
    rec.val_loss = metrics.loss;
    rec.val_acc = metrics.acc;
    if (table) rec.confidence = table->confidences();
    if (head) {
      rec.confidence.resize(n_train);
      const std::size_t chunk = 1024;
      Mat x;
      for (std::size_t start = 0; start < n_train; start += chunk) {
        const std::size_t m = std::min(chunk, n_train - start);
        x.rows = m;
        x.cols = d;
        x.data.resize(m * d);
        for (std::size_t b = 0; b < m; ++b) {
          const double* src = data.features.row(train_rows[start + b]);
          std::copy(src, src + d, x.row(b));
        }
        const Mat s = head->net.forward(x);
        for (std::size_t b = 0; b < m; ++b) {
          rec.confidence[start + b] = sigmoid(s.at(b, 0));
        }
      }
    }
    loss_accum = 0.0;
    loss_count = 0;
    // Without a validation split, "best" degrades to the final state.
    const bool improved =
        val_rows.empty() ? true : (best_acc < rec.val_acc);
    if (improved) {
      best_acc = val_rows.empty() ? 0.0 : rec.val_acc;
      best_epoch = epoch;
      best_classifier = classifier;
      best_table = table;
      best_head = head;
    }
    result.history.epochs.push_back(std::move(rec));
    if (on_epoch) on_epoch(result.history.epochs.back());
    ++epoch;
  };

  for (std::size_t iter = 0; iter < config.total_iters; ++iter) {
    if (cursor >= iters_per_epoch) {
      Rng shuffle_rng(
          derive_seed(config.seed, derive_seed(stream::kShuffle, epoch)));
      shuffle_rng.shuffle(epoch_order);
      cursor = 0;
    }

    // Gather the batch.
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t slot = epoch_order[cursor * batch + b];
      step_batch.slots[b] = slot;
      const std::size_t row = train_rows[slot];
      const double* src = data.features.row(row);
      std::copy(src, src + d, step_batch.x.row(b));
      step_batch.labels[b] = data.noisy_labels[row];
    }
    ++cursor;

    const double lr = schedule_lr(config.schedule, iter);
    double mean_loss;
    Mlp::Grads classifier_grads;
    IceGrads ice_grads;

    if (ice_method) {
      IceBatchResult res =
          ice_batch_backward(classifier, table ? &*table : nullptr,
                             head ? &*head : nullptr, step_batch, kind);
      mean_loss = res.mean_loss;
      ice_grads = std::move(res.grads);
    } else {
      Mlp::Cache cache;
      const Mat logits = classifier.forward(step_batch.x, &cache);
      const double inv_b = 1.0 / static_cast<double>(batch);
      double total = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* z = logits.row(b);
        for (std::size_t j = 0; j < k; ++j) p[j] = z[j];
        softmax_inplace(p);
        total += baseline_loss_grad(
            config, p, static_cast<std::size_t>(step_batch.labels[b]),
            dlogits.row_span(b));
        for (std::size_t j = 0; j < k; ++j) dlogits.at(b, j) *= inv_b;
      }
      mean_loss = total * inv_b;
      classifier_grads = classifier.backward(cache, dlogits);
    }

    if (!std::isfinite(mean_loss)) {
      throw TrainingFault(
          "training aborted: non-finite loss at iteration " +
              std::to_string(iter) + ", batch slots " +
              describe_batch(step_batch.slots),
          iter, step_batch.slots);
    }

    const Mlp::Grads& cgrads =
        ice_method ? ice_grads.classifier : classifier_grads;
    std::size_t group_idx = 0;
    for (std::size_t l = 0; l < classifier.num_layers(); ++l) {
      auto& layer = classifier.layers()[l];
      optimizer.step_dense(dense_group_ids[group_idx++], layer.w.data,
                           cgrads.w[l].data, lr);
      optimizer.step_dense(dense_group_ids[group_idx++], layer.b, cgrads.b[l],
                           lr);
    }
    if (head && ice_grads.head) {
      for (std::size_t l = 0; l < head->net.num_layers(); ++l) {
        auto& layer = head->net.layers()[l];
        optimizer.step_dense(dense_group_ids[group_idx++], layer.w.data,
                             ice_grads.head->w[l].data, lr);
        optimizer.step_dense(dense_group_ids[group_idx++], layer.b,
                             ice_grads.head->b[l], lr);
      }
    }
    if (table && !ice_grads.table_raw.empty()) {
      optimizer.step_sparse(table_group, table->raw(), ice_grads.table_raw, lr);
    }

    loss_accum += mean_loss;
    ++loss_count;

    if (cursor >= iters_per_epoch || iter + 1 == config.total_iters) {
      record_epoch(iter + 1);
    }
  }

  result.history.best_epoch = best_epoch;
  result.history.best_val_acc = best_acc < 0.0 ? 0.0 : best_acc;
  result.classifier = std::move(best_classifier);
  result.table = std::move(best_table);
  result.head = std::move(best_head);
  return result;
}

Checkpoint TrainResult::checkpoint() const {
  Checkpoint ckpt;
  ckpt.seed = history.seed;
  ckpt.classifier = classifier;
  if (table) ckpt.table_raw = table->raw();
  if (head) ckpt.head = head;
  return ckpt;
}

void save_history_json(const std::filesystem::path& path, const RunHistory& h) {
  json epochs = json::array();
  for (const EpochRecord& rec : h.epochs) {
    json e{{"epoch", rec.epoch},
           {"iters_done", rec.iters_done},
           {"train_loss", rec.train_loss},
           {"val_loss", rec.val_loss},
           {"val_acc", rec.val_acc}};
    if (!rec.confidence.empty()) e["confidence"] = rec.confidence;
    epochs.push_back(std::move(e));
  }
  const json doc{{"schema", "ice.history.v1"},
                 {"method", h.method},
                 {"seed", h.seed},
                 {"train_indices", h.train_indices},
                 {"val_indices", h.val_indices},
                 {"best_epoch", h.best_epoch},
                 {"best_val_acc", h.best_val_acc},
                 {"epochs", epochs}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("history: cannot open " + path.string() + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("history: write failed for " + path.string());
}

RunHistory load_history_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("history: cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("history: parse error in " + path.string() + ": " + e.what());
  }
  RunHistory h;
  try {
    h.method = doc.at("method").get<std::string>();
    h.seed = doc.at("seed").get<std::uint64_t>();
    h.train_indices = doc.at("train_indices").get<std::vector<std::size_t>>();
    h.val_indices = doc.at("val_indices").get<std::vector<std::size_t>>();
    h.best_epoch = doc.at("best_epoch").get<std::size_t>();
    h.best_val_acc = doc.at("best_val_acc").get<double>();
    for (const json& e : doc.at("epochs")) {
      EpochRecord rec;
      rec.epoch = e.at("epoch").get<std::size_t>();
      rec.iters_done = e.at("iters_done").get<std::size_t>();
      // NaN/inf metrics serialize as null; map them back.
      auto metric = [&](const char* key) {
        const json& v = e.at(key);
        return v.is_number() ? v.get<double>()
                             : std::numeric_limits<double>::quiet_NaN();
      };
      rec.train_loss = metric("train_loss");
      rec.val_loss = metric("val_loss");
      rec.val_acc = metric("val_acc");
      if (e.contains("confidence")) {
        rec.confidence = e.at("confidence").get<std::vector<double>>();
      }
      h.epochs.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw IoError("history: missing field in " + path.string() + ": " + e.what());
  }
  return h;
}

}  // namespace ice
