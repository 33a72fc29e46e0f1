// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

namespace sparsehop {
namespace {

// Fisher-Yates with raw engine output, so the permutation does not depend on
// the standard library's distribution implementation.
void shuffle_in_place(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng() % i]);
  }
}

// Integer sizes summing to `total`, each the floor or ceiling of its share.
std::vector<std::size_t> largest_remainder(std::size_t total, std::span<const double> f) {
  std::vector<std::size_t> out(f.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t s = 0; s < f.size(); ++s) {
    const double ideal = static_cast<double>(total) * f[s];
    // Guard against 0.7 * 100 = 69.99999999999999.
    const double base = std::floor(ideal + 1e-9);
    out[s] = static_cast<std::size_t>(base);
    used += out[s];
    rem.emplace_back(ideal - base, s);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++out[rem[i % rem.size()].second];
  return out;
}

// Tiny max-flow by repeated DFS; the graphs here have a handful of nodes.
class FlowGraph {
 public:
  explicit FlowGraph(std::size_t n) : cap_(n, std::vector<long>(n, 0)) {}
  void add(std::size_t a, std::size_t b, long c) { cap_[a][b] += c; }
  long flow(std::size_t s, std::size_t t) {
    long total = 0;
    for (;;) {
      std::vector<bool> seen(cap_.size(), false);
      const long f = push(s, t, 1L << 40, seen);
      if (f == 0) return total;
      total += f;
    }
  }
  long residual(std::size_t a, std::size_t b) const { return cap_[a][b]; }

 private:
  long push(std::size_t u, std::size_t t, long limit, std::vector<bool>& seen) {
    if (u == t) return limit;
    seen[u] = true;
    for (std::size_t v = 0; v < cap_.size(); ++v) {
      if (seen[v] || cap_[u][v] <= 0) continue;
      const long f = push(v, t, std::min(limit, cap_[u][v]), seen);
      if (f > 0) {
        cap_[u][v] -= f;
        cap_[v][u] += f;
        return f;
      }
    }
    return 0;
  }
  std::vector<std::vector<long>> cap_;
};

// counts[c][s]: rows of class c assigned to part s. Every entry is the floor
// or ceiling of n_c * f_s, rows sum to n_c, columns to `sizes`.
std::vector<std::vector<std::size_t>> stratified_counts(const std::vector<std::size_t>& per_class,
                                                        std::span<const double> f,
                                                        const std::vector<std::size_t>& sizes) {
  const std::size_t nc = per_class.size(), ns = f.size();
  std::vector<std::vector<std::size_t>> counts(nc, std::vector<std::size_t>(ns));
  const std::size_t source = 0, sink = nc + ns + 1;
  FlowGraph g(nc + ns + 2);
  std::vector<long> col_floor(ns, 0);
  long need = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    long row_floor = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      const double ideal = static_cast<double>(per_class[c]) * f[s];
      const double base = std::floor(ideal + 1e-9);
      counts[c][s] = static_cast<std::size_t>(base);
      row_floor += static_cast<long>(base);
      col_floor[s] += static_cast<long>(base);
      if (ideal - base > 1e-9) g.add(1 + c, 1 + nc + s, 1);
    }
    const long deficit = static_cast<long>(per_class[c]) - row_floor;
    g.add(source, 1 + c, deficit);
    need += deficit;
  }
  for (std::size_t s = 0; s < ns; ++s) {
    g.add(1 + nc + s, sink, static_cast<long>(sizes[s]) - col_floor[s]);
  }
  if (g.flow(source, sink) != need) {
    throw std::logic_error("split: stratified rounding failed");
  }
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t s = 0; s < ns; ++s) {
      // A saturated unit edge carried one extra row.
      if (g.residual(1 + nc + s, 1 + c) > 0) ++counts[c][s];
    }
  }
  return counts;
}

std::size_t argmax_row(std::span<const double> p, std::size_t r, std::size_t k) {
  const double* row = p.data() + r * k;
  return static_cast<std::size_t>(std::max_element(row, row + k) - row);
}

// Logits [rows, outputs] without recording history.
Tensor logits_of(const BishopNetwork& net, const EncodedBatch& rows, std::size_t chunk) {
  const std::size_t k = net.config().outputs;
  std::vector<double> out;
  out.reserve(rows.rows * k);
  NoGradGuard no_grad;
  for (std::size_t begin = 0; begin < rows.rows; begin += chunk) {
    std::vector<std::size_t> idx(std::min(chunk, rows.rows - begin));
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor logits = net.forward(rows.select(idx));
    out.insert(out.end(), logits.data().begin(), logits.data().end());
  }
  return Tensor({rows.rows, k}, std::move(out));
}

std::vector<double> softmax_rows(std::span<const double> z, std::size_t k) {
  std::vector<double> p(z.size());
  for (std::size_t r = 0; r * k < z.size(); ++r) {
    const double* row = z.data() + r * k;
    const double top = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += std::exp(row[c] - top);
    for (std::size_t c = 0; c < k; ++c) p[r * k + c] = std::exp(row[c] - top) / total;
  }
  return p;
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "cross-entropy" || name == "cross_entropy" || name == "ce" ||
      name == "classification") {
    return LossKind::kCrossEntropy;
  }
  if (name == "squared-error" || name == "squared_error" || name == "mse" ||
      name == "regression") {
    return LossKind::kSquaredError;
  }
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

std::string loss_kind_name(LossKind kind) {
  return kind == LossKind::kCrossEntropy ? "cross-entropy" : "squared-error";
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(adam_eps > 0.0) || !(factor > 0.0 && factor < 1.0) ||
      !(plateau_eps >= 0.0)) {
    throw std::invalid_argument("train: rates must be positive and factor inside (0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  }
  if (max_epochs == 0 || patience == 0 || batch_size == 0 || micro_batch == 0) {
    throw std::invalid_argument("train: epochs, patience and batch sizes must be positive");
  }
  if (patience > max_epochs) throw std::invalid_argument("train: patience exceeds max epochs");
}

// ---- splitting -------------------------------------------------------------

Split split_rows(std::size_t rows, std::span<const double> fractions, std::uint64_t seed,
                 std::span<const int> labels) {
  if (fractions.size() != 3) throw std::invalid_argument("split: need three fractions");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("split: negative fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");
  if (!labels.empty() && labels.size() != rows) {
    throw std::invalid_argument("split: label count does not match rows");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, rng);
  const auto sizes = largest_remainder(rows, fractions);

  std::vector<std::vector<std::size_t>> parts(3);
  if (labels.empty()) {
    std::size_t at = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      parts[s].assign(order.begin() + at, order.begin() + at + sizes[s]);
      at += sizes[s];
    }
  } else {
    std::map<int, std::vector<std::size_t>> by_class;  // positions in `order`
    for (std::size_t pos = 0; pos < rows; ++pos) by_class[labels[order[pos]]].push_back(pos);
    std::vector<std::size_t> per_class;
    for (const auto& [label, pos] : by_class) per_class.push_back(pos.size());
    const auto counts = stratified_counts(per_class, fractions, sizes);
    std::vector<std::vector<std::size_t>> positions(3);
    std::size_t c = 0;
    for (const auto& [label, pos] : by_class) {
      std::size_t at = 0;
      for (std::size_t s = 0; s < 3; ++s) {
        positions[s].insert(positions[s].end(), pos.begin() + at,
                            pos.begin() + at + counts[c][s]);
        at += counts[c][s];
      }
      ++c;
    }
    for (std::size_t s = 0; s < 3; ++s) {
      std::sort(positions[s].begin(), positions[s].end());
      for (std::size_t pos : positions[s]) parts[s].push_back(order[pos]);
    }
  }
  static const char* kNames[] = {"train", "validation", "test"};
  for (std::size_t s = 0; s < 3; ++s) {
    if (fractions[s] > 0.0 && parts[s].empty()) {
      throw std::invalid_argument(std::string("split: empty ") + kNames[s] + " part");
    }
  }
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

// ---- optimizer -------------------------------------------------------------

void zero_grads(const ParamList& params) {
  for (const auto& [name, p] : params) Tensor(p).zero_grad();
}

void adam_step(const ParamList& params, AdamState& state, double lr, const TrainConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam: state does not match the parameter list");
  }
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("adam: non-finite gradient in parameter '" + name + "'");
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].second;
    auto values = p.mutable_data();
    const bool has = p.has_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = has ? p.grad()[j] : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      values[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

// ---- schedule --------------------------------------------------------------

PlateauScheduler::PlateauScheduler(double lr, double factor, double eps, std::size_t patience)
    : lr_(lr), factor_(factor), eps_(eps), patience_(patience) {}

bool PlateauScheduler::step(double val_loss) {
  if (!best_ || val_loss < *best_ - eps_) {
    best_ = val_loss;
    bad_ = 0;
    return false;
  }
  if (++bad_ > patience_) {
    lr_ *= factor_;
    bad_ = 0;
    return true;
  }
  return false;
}

bool EarlyStopping::update(double val_loss) {
  improved_ = !best_ || val_loss < *best_;
  if (improved_) {
    best_ = val_loss;
    bad_ = 0;
    return false;
  }
  return ++bad_ >= patience_;
}

// ---- metrics ---------------------------------------------------------------

std::optional<double> binary_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw std::invalid_argument("auc: size mismatch");
  std::vector<std::size_t> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericalError("auc: non-finite score");
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) {
        pos_rank_sum += rank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double np = static_cast<double>(pos), nn = static_cast<double>(neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::optional<double> multiclass_auc(std::span<const int> labels,
                                     std::span<const double> probabilities, std::size_t classes) {
  if (probabilities.size() != labels.size() * classes) {
    throw std::invalid_argument("auc: probabilities do not match labels");
  }
  std::vector<double> scores(labels.size());
  std::vector<int> binary(labels.size());
  if (classes == 2) {
    for (std::size_t r = 0; r < labels.size(); ++r) scores[r] = probabilities[r * 2 + 1];
    return binary_auc(labels, scores);
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t r = 0; r < labels.size(); ++r) {
      scores[r] = probabilities[r * classes + k];
      binary[r] = labels[r] == static_cast<int>(k) ? 1 : 0;
    }
    if (const auto auc = binary_auc(binary, scores)) {
      total += *auc;
      ++counted;
    }
  }
  if (counted == 0) return std::nullopt;
  return total / static_cast<double>(counted);
}

double accuracy(std::span<const int> labels, std::span<const double> probabilities,
                std::size_t classes) {
  if (labels.empty()) throw std::invalid_argument("accuracy: no rows");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    hits += argmax_row(probabilities, r, classes) == static_cast<std::size_t>(labels[r]);
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double r2_score(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size() || targets.empty()) {
    throw std::invalid_argument("r2: size mismatch or no rows");
  }
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
  }
  // Constant targets: only an exact fit explains anything.
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

Targets Targets::select(std::span<const std::size_t> rows) const {
  Targets out;
  for (std::size_t r : rows) {
    if (!classes.empty()) out.classes.push_back(classes.at(r));
    if (!values.empty()) out.values.push_back(values.at(r));
  }
  return out;
}

Tensor predict(const BishopNetwork& net, const EncodedBatch& rows, LossKind loss,
               std::size_t chunk) {
  if (chunk == 0) throw std::invalid_argument("predict: chunk must be positive");
  Tensor logits = logits_of(net, rows, chunk);
  if (loss == LossKind::kSquaredError) return logits;
  return Tensor(logits.shape(), softmax_rows(logits.data(), net.config().outputs));
}

Metrics evaluate(const BishopNetwork& net, const EncodedBatch& rows, const Targets& targets,
                 LossKind loss, std::size_t chunk) {
  if (rows.rows == 0) throw std::invalid_argument("evaluate: no rows");
  if (targets.size() != rows.rows) throw std::invalid_argument("evaluate: target count mismatch");
  const std::size_t k = net.config().outputs;
  const Tensor logits = logits_of(net, rows, chunk);
  const auto z = logits.data();
  Metrics m;
  if (loss == LossKind::kCrossEntropy) {
    if (targets.classes.empty()) throw std::invalid_argument("evaluate: missing class labels");
    double total = 0.0;
    for (std::size_t r = 0; r < rows.rows; ++r) {
      const double* row = z.data() + r * k;
      const double top = *std::max_element(row, row + k);
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(row[c] - top);
      total += top + std::log(s) - row[targets.classes[r]];
    }
    m.loss = total / static_cast<double>(rows.rows);
    const auto p = softmax_rows(z, k);
    m.accuracy = accuracy(targets.classes, p, k);
    m.auc = multiclass_auc(targets.classes, p, k);
  } else {
    if (targets.values.empty()) throw std::invalid_argument("evaluate: missing targets");
    double total = 0.0;
    std::vector<double> pred(rows.rows);
    for (std::size_t r = 0; r < rows.rows; ++r) {
      pred[r] = z[r * k];
      total += (pred[r] - targets.values[r]) * (pred[r] - targets.values[r]);
    }
    m.loss = total / static_cast<double>(rows.rows);
    m.r2 = r2_score(targets.values, pred);
  }
  return m;
}

double headline(const Metrics& m) {
  if (m.r2) return *m.r2;
  if (m.auc) return *m.auc;
  return m.accuracy.value_or(0.0);
}

// ---- loop ------------------------------------------------------------------

std::vector<EpochRecord> run_epochs(
    const TrainConfig& cfg, const std::function<EpochRecord(std::size_t, double)>& run_epoch,
    const std::function<void(const EpochRecord&, bool)>& after_epoch,
    const std::function<bool(const EpochRecord&)>& stop) {
  cfg.validate();
  PlateauScheduler scheduler(cfg.lr, cfg.factor, cfg.plateau_eps, cfg.scheduler_patience);
  EarlyStopping early(cfg.patience);
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = scheduler.lr();
    EpochRecord rec = run_epoch(epoch, lr);
    rec.epoch = epoch;
    rec.lr = lr;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                           ": non-finite loss");
    }
    const bool halt = early.update(rec.val_loss);
    scheduler.step(rec.val_loss);
    history.push_back(rec);
    if (after_epoch) after_epoch(rec, early.improved());
    if (halt || (stop && stop(rec))) break;
  }
  return history;
}

Snapshot snapshot(const ParamList& params) {
  Snapshot out;
  for (const auto& [name, p] : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void restore(const ParamList& params, const Snapshot& values) {
  if (values.size() != params.size()) throw std::invalid_argument("restore: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].second;
    auto dst = p.mutable_data();
    if (dst.size() != values[i].size()) throw std::invalid_argument("restore: shape mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

TrainResult train(BishopNetwork& net, const EncodedBatch& train_rows, const Targets& train_y,
                  const EncodedBatch& val_rows, const Targets& val_y, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_rows.rows == 0 || val_rows.rows == 0) {
    throw std::invalid_argument("train: empty training or validation rows");
  }
  if (train_y.size() != train_rows.rows || val_y.size() != val_rows.rows) {
    throw std::invalid_argument("train: target count mismatch");
  }
  const ParamList params = net.parameters();
  AdamState adam;
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;

  auto epoch_fn = [&](std::size_t, double lr) {
    std::vector<std::size_t> order(train_rows.rows);
    std::iota(order.begin(), order.end(), 0);
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t batch = std::min(cfg.batch_size, order.size() - b);
      zero_grads(params);
      for (std::size_t m = 0; m < batch; m += cfg.micro_batch) {
        const std::size_t n = std::min(cfg.micro_batch, batch - m);
        const std::span<const std::size_t> idx(order.data() + b + m, n);
        const EncodedBatch rows = train_rows.select(idx);
        const Targets y = train_y.select(idx);
        ForwardContext ctx;
        ctx.training = true;
        ctx.rng = &rng;
        const Tensor logits = net.forward(rows, ctx);
        const Tensor loss = cfg.loss == LossKind::kCrossEntropy
                                ? softmax_cross_entropy(logits, y.classes)
                                : mse_loss(logits, y.values);
        if (!std::isfinite(loss.item())) {
          return EpochRecord{0, loss.item(), 0.0, lr, 0.0};
        }
        loss_sum += loss.item() * static_cast<double>(n);
        // Weighted so the accumulated gradient is that of the batch mean.
        backward(scale(loss, static_cast<double>(n) / static_cast<double>(batch)));
      }
      adam_step(params, adam, lr, cfg);
    }
    const Metrics val = evaluate(net, val_rows, val_y, cfg.loss);
    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(train_rows.rows);
    rec.val_loss = val.loss;
    rec.val_metric = headline(val);
    return rec;
  };
  auto after = [&](const EpochRecord& rec, bool improved) {
    if (improved || result.best.empty()) {
      result.best = snapshot(params);
      result.best_epoch = rec.epoch;
    }
    if (hooks.log) hooks.log(rec);
  };
  std::function<bool(const EpochRecord&)> stop;
  if (hooks.stop) stop = [&](const EpochRecord& rec) { return hooks.stop(rec, net); };
  result.history = run_epochs(cfg, epoch_fn, after, stop);
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,lr,val_metric\n";
  char line[256];
  for (const EpochRecord& r : history) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.val_loss, r.lr, r.val_metric);
    out += line;
  }
  return out;
}

}  // namespace sparsehop
