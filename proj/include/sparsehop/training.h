// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Optimization and evaluation: stratified splitting, Adam, the plateau
// scheduler, patience-based early stopping, and AUC / accuracy / R².

#ifndef SPARSEHOP_TRAINING_H_
#define SPARSEHOP_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparsehop/embedding.h"
#include "sparsehop/network.h"
#include "sparsehop/nn.h"

namespace sparsehop {

enum class LossKind { kCrossEntropy, kSquaredError };

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);

struct TrainConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  // Keeps the unit-gradient first step at -lr to 1e-12.
  double adam_eps = 1e-13;
  double factor = 0.1;       // plateau multiplier
  double plateau_eps = 1e-6; // minimum validation improvement
  std::size_t patience = 20;
  std::size_t scheduler_patience = 10;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 64;
  // Rows per forward/backward pass inside a batch. Gradients accumulate, so
  // this changes memory use, not the update.
  std::size_t micro_batch = 8;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kCrossEntropy;

  void validate() const;
};

// ---- splitting -------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train, validation, test;
};

// Seeded shuffle, then contiguous train/validation/test blocks. With labels
// the split is stratified: every class lands in each part within one row of
// its global share, and the part sizes are the same as without labels.
Split split_rows(std::size_t rows, std::span<const double> fractions, std::uint64_t seed,
                 std::span<const int> labels = {});

// ---- optimizer -------------------------------------------------------------

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of every parameter from its accumulated
// gradient. A parameter with no gradient counts as zero gradient. Throws
// NumericalError naming the first parameter with a non-finite gradient,
// before anything is modified.
void adam_step(const ParamList& params, AdamState& state, double lr, const TrainConfig& cfg);

void zero_grads(const ParamList& params);

// ---- schedule --------------------------------------------------------------

// Multiplies the learning rate by `factor` once validation loss has failed to
// beat its best by more than `eps` for more than `patience` epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, double eps, std::size_t patience);
  // Returns true when this epoch reduced the rate.
  bool step(double val_loss);
  double lr() const { return lr_; }

 private:
  double lr_, factor_, eps_;
  std::size_t patience_, bad_ = 0;
  std::optional<double> best_;
};

// Stops once validation loss has not decreased for `patience` epochs in a row.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Records one epoch; returns true when training should stop now.
  bool update(double val_loss);
  bool improved() const { return improved_; }
  std::size_t bad_epochs() const { return bad_; }

 private:
  std::size_t patience_, bad_ = 0;
  bool improved_ = false;
  std::optional<double> best_;
};

// ---- metrics ---------------------------------------------------------------

struct Metrics {
  double loss = 0.0;
  std::optional<double> auc;       // classification; absent when a class is missing
  std::optional<double> accuracy;  // classification
  std::optional<double> r2;        // regression
};

// Tie-aware Mann-Whitney statistic. Absent unless both classes occur.
std::optional<double> binary_auc(std::span<const int> labels, std::span<const double> scores);
// Macro one-vs-rest over classes that occur with at least one other class.
// `probabilities` is [rows, classes].
std::optional<double> multiclass_auc(std::span<const int> labels,
                                     std::span<const double> probabilities, std::size_t classes);
double accuracy(std::span<const int> labels, std::span<const double> probabilities,
                std::size_t classes);
double r2_score(std::span<const double> targets, std::span<const double> predictions);

struct Targets {
  std::vector<int> classes;    // cross-entropy
  std::vector<double> values;  // squared error

  std::size_t size() const { return classes.empty() ? values.size() : classes.size(); }
  Targets select(std::span<const std::size_t> rows) const;
};

// Class probabilities [rows, classes] for cross-entropy models, raw
// predictions [rows, 1] otherwise. Inference mode, no graph.
Tensor predict(const BishopNetwork& net, const EncodedBatch& rows, LossKind loss,
               std::size_t chunk = 16);

Metrics evaluate(const BishopNetwork& net, const EncodedBatch& rows, const Targets& targets,
                 LossKind loss, std::size_t chunk = 16);

// Headline validation number: AUC (or accuracy when AUC is absent) for
// classification, R² for regression.
double headline(const Metrics& m);

// ---- loop ------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double val_metric = 0.0;
};

// Generic epoch driver: `run_epoch(epoch, lr)` trains one epoch and returns
// its record with train/val losses filled in. Applies the scheduler and early
// stopping, and stops early when `stop` (if set) says so after an epoch.
// Throws NumericalError naming the epoch on a non-finite loss.
std::vector<EpochRecord> run_epochs(
    const TrainConfig& cfg, const std::function<EpochRecord(std::size_t, double)>& run_epoch,
    const std::function<void(const EpochRecord&, bool improved)>& after_epoch = {},
    const std::function<bool(const EpochRecord&)>& stop = {});

using Snapshot = std::vector<std::vector<double>>;
Snapshot snapshot(const ParamList& params);
void restore(const ParamList& params, const Snapshot& values);

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  Snapshot best;  // parameters at the lowest validation loss
  // The network itself is left at the last checkpoint.
};

struct TrainHooks {
  // Called after every epoch with the network in its current state; return
  // true to stop.
  std::function<bool(const EpochRecord&, const BishopNetwork&)> stop;
  std::function<void(const EpochRecord&)> log;
};

TrainResult train(BishopNetwork& net, const EncodedBatch& train_rows, const Targets& train_y,
                  const EncodedBatch& val_rows, const Targets& val_y, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// CSV: epoch,train_loss,val_loss,lr,val_metric
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace sparsehop

#endif  // SPARSEHOP_TRAINING_H_
