#include "ice/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <string>

#include "ice/error.hpp"
#include "ice/rng.hpp"

namespace ice {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("logit: p must be in (0, 1)");
  return std::log(p / (1.0 - p));
}

Mlp::Mlp(std::vector<std::size_t> dims, std::uint64_t seed)
    : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw InvalidInput("Mlp: need input and output dims");
  for (std::size_t d : dims_) {
    if (d == 0) throw InvalidInput("Mlp: zero-width layer");
  }
  layers_.resize(dims_.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t fan_in = dims_[l];
    const std::size_t fan_out = dims_[l + 1];
    Layer& layer = layers_[l];
    layer.w = Mat(fan_in, fan_out);
    layer.b.assign(fan_out, 0.0);
    Rng rng(derive_seed(seed, l));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& w : layer.w.data) w = rng.uniform(-bound, bound);
  }
}

std::size_t Mlp::input_dim() const { return dims_.front(); }
std::size_t Mlp::output_dim() const { return dims_.back(); }

Mat Mlp::forward(const Mat& x, Cache* cache) const {
  if (x.cols != input_dim()) throw InvalidInput("Mlp::forward: input dim mismatch");
  if (cache) {
    cache->act.clear();
    cache->act.push_back(x);
  }
  Mat cur = x;
  Mat next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    matmul(cur, layer.w, next);
    const bool hidden = l + 1 < layers_.size();
    for (std::size_t i = 0; i < next.rows; ++i) {
      double* row = next.row(i);
      for (std::size_t j = 0; j < next.cols; ++j) {
        double v = row[j] + layer.b[j];
        if (hidden && v < 0.0) v = 0.0;
        if (!std::isfinite(v)) {
          throw Error("Mlp::forward: non-finite activation in layer " +
                      std::to_string(l));
        }
        row[j] = v;
      }
    }
    if (hidden && cache) cache->act.push_back(next);
    cur.data.swap(next.data);
    std::swap(cur.rows, next.rows);
    std::swap(cur.cols, next.cols);
  }
  return cur;
}

std::vector<double> Mlp::forward_one(std::span<const double> x) const {
  Mat m(1, x.size());
  std::memcpy(m.data.data(), x.data(), x.size() * sizeof(double));
  const Mat out = forward(m);
  return out.data;
}

Mlp::Grads Mlp::zero_grads() const {
  Grads g;
  g.w.reserve(layers_.size());
  g.b.reserve(layers_.size());
  for (const Layer& layer : layers_) {
    g.w.emplace_back(layer.w.rows, layer.w.cols);
    g.b.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

Mlp::Grads Mlp::backward(const Cache& cache, const Mat& dlogits) const {
  if (cache.act.size() != layers_.size()) {
    throw InvalidInput("Mlp::backward: cache does not match forward");
  }
  Grads grads = zero_grads();
  Mat dcur = dlogits;
  Mat dprev;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Mat& input = cache.act[l];
    matmul_tn(input, dcur, grads.w[l]);
    std::vector<double>& db = grads.b[l];
    for (std::size_t i = 0; i < dcur.rows; ++i) {
      const double* row = dcur.row(i);
      for (std::size_t j = 0; j < dcur.cols; ++j) db[j] += row[j];
    }
    if (l > 0) {
      matmul_nt(dcur, layers_[l].w, dprev);
      // Rectifier gate: the cached post-activation is zero exactly where
      // the unit was clamped.
      for (std::size_t i = 0; i < dprev.rows; ++i) {
        double* drow = dprev.row(i);
        const double* arow = input.row(i);
        for (std::size_t j = 0; j < dprev.cols; ++j) {
          if (arow[j] <= 0.0) drow[j] = 0.0;
        }
      }
      dcur.data.swap(dprev.data);
      std::swap(dcur.rows, dprev.rows);
      std::swap(dcur.cols, dprev.cols);
    }
  }
  return grads;
}

ConfidenceTable::ConfidenceTable(std::size_t n, double init_confidence)
    : raw_(n, logit(init_confidence)) {}

double ConfidenceTable::confidence_of(std::size_t index) const {
  if (index >= raw_.size()) {
    throw InvalidInput("ConfidenceTable: index " + std::to_string(index) +
                       " out of range (N = " + std::to_string(raw_.size()) + ")");
  }
  return sigmoid(raw_[index]);
}

std::vector<double> ConfidenceTable::confidences() const {
  std::vector<double> out(raw_.size());
  for (std::size_t i = 0; i < raw_.size(); ++i) out[i] = sigmoid(raw_[i]);
  return out;
}

ConfidenceHead::ConfidenceHead(std::vector<std::size_t> dims,
                               double init_confidence, std::uint64_t seed)
    : net(std::move(dims), seed) {
  if (net.output_dim() != 1) {
    throw InvalidInput("ConfidenceHead: output width must be 1");
  }
  net.layers().back().b[0] = logit(init_confidence);
}

double ConfidenceHead::confidence_of(std::span<const double> x) const {
  return sigmoid(net.forward_one(x)[0]);
}

namespace {

IceForward ice_forward_impl(const Mlp& classifier, std::span<const double> x,
                            double confidence, TemperKind kind) {
  IceForward out;
  out.logits = classifier.forward_one(x);
  out.p = softmax(out.logits);
  out.confidence = confidence;
  out.q = kind == TemperKind::linear
              ? temper_linear(out.p, confidence)
              : temper_power_logits(out.logits, confidence);
  return out;
}

}  // namespace

IceForward ice_forward(const Mlp& classifier, const ConfidenceTable& table,
                       std::span<const double> x, std::size_t index,
                       TemperKind kind) {
  return ice_forward_impl(classifier, x, table.confidence_of(index), kind);
}

IceForward ice_forward(const Mlp& classifier, const ConfidenceHead& head,
                       std::span<const double> x, TemperKind kind) {
  return ice_forward_impl(classifier, x, head.confidence_of(x), kind);
}

double ice_loss(const ProbVec& q, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= q.size()) {
    throw InvalidInput("ice_loss: label out of range");
  }
  const double qy = q[static_cast<std::size_t>(label)];
  if (qy == 0.0) return kInf;
  return -std::log(qy);
}

namespace {

void check_ice_batch(const Mlp& classifier, const ConfidenceTable* table,
                     const ConfidenceHead* head, const IceBatch& batch) {
  if ((table == nullptr) == (head == nullptr)) {
    throw InvalidInput("ice batch: exactly one confidence source required");
  }
  if (batch.x.rows != batch.labels.size()) {
    throw InvalidInput("ice batch: feature/label count mismatch");
  }
  if (table && batch.slots.size() != batch.labels.size()) {
    throw InvalidInput("ice batch: slot count mismatch");
  }
  const int k = static_cast<int>(classifier.output_dim());
  for (int y : batch.labels) {
    if (y < 0 || y >= k) throw InvalidInput("ice batch: label out of range");
  }
}

/// Per-sample confidences for the batch, plus the head forward cache when
/// the head is the source.
struct ConfidencePass {
  std::vector<double> c;
  Mlp::Cache head_cache;
  Mat head_logits;  // B x 1
};

ConfidencePass batch_confidences(const ConfidenceTable* table,
                                 const ConfidenceHead* head,
                                 const IceBatch& batch, bool want_cache) {
  ConfidencePass out;
  const std::size_t n = batch.labels.size();
  out.c.resize(n);
  if (table) {
    for (std::size_t b = 0; b < n; ++b) {
      out.c[b] = table->confidence_of(batch.slots[b]);
    }
  } else {
    out.head_logits =
        head->net.forward(batch.x, want_cache ? &out.head_cache : nullptr);
    for (std::size_t b = 0; b < n; ++b) {
      out.c[b] = sigmoid(out.head_logits.at(b, 0));
    }
  }
  return out;
}

}  // namespace

double ice_batch_loss(const Mlp& classifier, const ConfidenceTable* table,
                      const ConfidenceHead* head, const IceBatch& batch,
                      TemperKind kind) {
  check_ice_batch(classifier, table, head, batch);
  const Mat logits = classifier.forward(batch.x);
  const ConfidencePass conf = batch_confidences(table, head, batch, false);
  const std::size_t n = batch.labels.size();
  const std::size_t k = classifier.output_dim();
  double total = 0.0;
  std::vector<double> q(k);
  for (std::size_t b = 0; b < n; ++b) {
    const double* z = logits.row(b);
    const double c = conf.c[b];
    if (kind == TemperKind::linear) {
      for (std::size_t j = 0; j < k; ++j) q[j] = z[j];
      softmax_inplace(q);
      const double base = (1.0 - c) / static_cast<double>(k);
      for (std::size_t j = 0; j < k; ++j) q[j] = c * q[j] + base;
    } else {
      for (std::size_t j = 0; j < k; ++j) q[j] = c * z[j];
      softmax_inplace(q);
    }
    const double qy = q[static_cast<std::size_t>(batch.labels[b])];
    total += qy == 0.0 ? kInf : -std::log(qy);
  }
  return total / static_cast<double>(n);
}

IceBatchResult ice_batch_backward(const Mlp& classifier,
                                  const ConfidenceTable* table,
                                  const ConfidenceHead* head,
                                  const IceBatch& batch, TemperKind kind) {
  check_ice_batch(classifier, table, head, batch);
  const std::size_t n = batch.labels.size();
  const std::size_t k = classifier.output_dim();
  const double inv_n = 1.0 / static_cast<double>(n);

  Mlp::Cache cache;
  const Mat logits = classifier.forward(batch.x, &cache);
  ConfidencePass conf = batch_confidences(table, head, batch, true);

  Mat dlogits(n, k);
  std::vector<double> dc(n, 0.0);  // d(mean loss)/dC per sample
  double total = 0.0;
  std::vector<double> p(k), q(k);

  for (std::size_t b = 0; b < n; ++b) {
    const double* z = logits.row(b);
    const double c = conf.c[b];
    const auto y = static_cast<std::size_t>(batch.labels[b]);
    double* dz = dlogits.row(b);

    if (kind == TemperKind::linear) {
      for (std::size_t j = 0; j < k; ++j) p[j] = z[j];
      softmax_inplace(p);
      const double base = (1.0 - c) / static_cast<double>(k);
      const double qy = c * p[y] + base;
      total += qy == 0.0 ? kInf : -std::log(qy);
      // d(-log qy)/dz_j = (c * p_y / qy) * (p_j - delta_jy)
      const double scale = c * p[y] / qy * inv_n;
      for (std::size_t j = 0; j < k; ++j) dz[j] = scale * p[j];
      dz[y] -= scale;
      // d(-log qy)/dc = -(p_y - 1/K) / qy
      dc[b] = -(p[y] - 1.0 / static_cast<double>(k)) / qy * inv_n;
    } else {
      for (std::size_t j = 0; j < k; ++j) q[j] = c * z[j];
      softmax_inplace(q);
      const double qy = q[y];
      total += qy == 0.0 ? kInf : -std::log(qy);
      // d(-log qy)/dz_j = c * (q_j - delta_jy)
      for (std::size_t j = 0; j < k; ++j) dz[j] = c * q[j] * inv_n;
      dz[y] -= c * inv_n;
      // d(-log qy)/dc = -(z_y - sum_j q_j z_j)
      double mean_logit = 0.0;
      for (std::size_t j = 0; j < k; ++j) mean_logit += q[j] * z[j];
      dc[b] = -(z[y] - mean_logit) * inv_n;
    }
  }

  IceBatchResult out;
  out.mean_loss = total * inv_n;
  out.grads.classifier = classifier.backward(cache, dlogits);

  if (table) {
    // Chain through the sigmoid: d raw = dC * C(1-C). Duplicate slots are
    // merged; emission is sorted by slot for deterministic consumption.
    std::map<std::size_t, double> sparse;
    for (std::size_t b = 0; b < n; ++b) {
      const double c = conf.c[b];
      sparse[batch.slots[b]] += dc[b] * c * (1.0 - c);
    }
    out.grads.table_raw.assign(sparse.begin(), sparse.end());
  } else {
    Mat dhead(n, 1);
    for (std::size_t b = 0; b < n; ++b) {
      const double c = conf.c[b];
      dhead.at(b, 0) = dc[b] * c * (1.0 - c);
    }
    out.grads.head = head->net.backward(conf.head_cache, dhead);
  }
  return out;
}

namespace {

// Checkpoint container: little-endian binary, doubles stored raw so the
// round trip is bit-exact.
constexpr char kMagic[8] = {'I', 'C', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

void put_doubles(std::ofstream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
  }
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  const auto offset = in.tellg();
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw IoError("checkpoint: truncated read at offset " +
                  std::to_string(offset) + " in " + path);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  const auto offset = in.tellg();
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw IoError("checkpoint: truncated read at offset " +
                  std::to_string(offset) + " in " + path);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::vector<double> get_doubles(std::ifstream& in, const std::string& path) {
  const std::uint64_t n = get_u64(in, path);
  std::vector<double> v(n);
  for (auto& d : v) {
    const std::uint64_t bits = get_u64(in, path);
    std::memcpy(&d, &bits, 8);
  }
  return v;
}

void put_mlp(std::ofstream& out, const Mlp& mlp) {
  put_u64(out, mlp.dims().size());
  for (std::size_t d : mlp.dims()) put_u64(out, d);
  for (const auto& layer : mlp.layers()) {
    put_doubles(out, layer.w.data);
    put_doubles(out, layer.b);
  }
}

Mlp get_mlp(std::ifstream& in, const std::string& path) {
  const std::uint64_t ndims = get_u64(in, path);
  if (ndims < 2 || ndims > 64) throw IoError("checkpoint: bad layer count in " + path);
  std::vector<std::size_t> dims(ndims);
  for (auto& d : dims) d = get_u64(in, path);
  Mlp mlp(dims, 0);
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    auto w = get_doubles(in, path);
    auto b = get_doubles(in, path);
    Mlp::Layer& layer = mlp.layers()[l];
    if (w.size() != layer.w.data.size() || b.size() != layer.b.size()) {
      throw IoError("checkpoint: parameter size mismatch in layer " +
                    std::to_string(l) + " of " + path);
    }
    layer.w.data = std::move(w);
    layer.b = std::move(b);
  }
  return mlp;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u64(out, ckpt.seed);
  put_mlp(out, ckpt.classifier);
  put_u32(out, ckpt.table_raw ? 1 : 0);
  if (ckpt.table_raw) put_doubles(out, *ckpt.table_raw);
  put_u32(out, ckpt.head ? 1 : 0);
  if (ckpt.head) put_mlp(out, ckpt.head->net);
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("checkpoint: bad magic at offset 0 in " + path.string());
  }
  const std::uint32_t version = get_u32(in, path.string());
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version) +
                  " in " + path.string());
  }
  Checkpoint ckpt;
  ckpt.seed = get_u64(in, path.string());
  ckpt.classifier = get_mlp(in, path.string());
  if (get_u32(in, path.string()) != 0) {
    ckpt.table_raw = get_doubles(in, path.string());
  }
  if (get_u32(in, path.string()) != 0) {
    ConfidenceHead head;
    head.net = get_mlp(in, path.string());
    ckpt.head = std::move(head);
  }
  return ckpt;
}

}  // namespace ice
