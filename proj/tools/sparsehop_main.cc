// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// sparsehop: fit / predict / entmax / memory / experiment / synth.
//
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsehop/entmax.h"
#include "sparsehop/experiments.h"
#include "sparsehop/hopfield.h"
#include "sparsehop/io.h"
#include "sparsehop/runtime.h"
#include "sparsehop/synthetic.h"
#include "sparsehop/training.h"

namespace sh = sparsehop;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || item.empty() || !std::isfinite(v)) {
      throw sh::InputError(std::string(what) + ": cannot parse '" + item + "' as a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw sh::InputError(std::string(what) + ": empty list");
  return out;
}

// Flag, then SPARSEHOP_SEED, then `fallback`.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback = 0) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SPARSEHOP_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw sh::InputError("SPARSEHOP_SEED is not an integer");
    return v;
  }
  return fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sh::InputError("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sh::InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- fit ---------------------------------------------------------------------

struct FitArgs {
  std::string data, schema, label, task = "classification", config, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, alpha, dropout;
  std::optional<std::size_t> epochs, batch_size, micro_batch;
  std::string alpha_mode;
  std::size_t repeats = 1;
  bool quiet = false;
};

int run_fit(const FitArgs& a) {
  sh::RunConfig rc;
  if (!a.config.empty()) sh::apply_config_json(read_text(a.config), rc);
  const std::uint64_t seed = resolve_seed(a.seed, rc.train.seed);
  if (a.lr) rc.train.lr = *a.lr;
  if (a.epochs) {
    rc.train.max_epochs = *a.epochs;
    rc.train.patience = std::min(rc.train.patience, *a.epochs);
  }
  if (a.batch_size) rc.train.batch_size = *a.batch_size;
  if (a.micro_batch) rc.train.micro_batch = *a.micro_batch;
  if (a.alpha) rc.network.alpha = *a.alpha;
  if (a.dropout) rc.network.dropout = *a.dropout;
  if (!a.alpha_mode.empty()) rc.network.alpha_mode = sh::parse_alpha_mode(a.alpha_mode);
  if (a.repeats == 0) throw sh::InputError("--repeats must be at least 1");

  sh::LabelInfo label;
  label.column = a.label;
  label.task = sh::parse_task_kind(a.task);
  const auto columns = sh::read_schema(a.schema);
  const sh::CsvTable table = sh::read_csv(a.data);
  const sh::Dataset ds = sh::table_to_dataset(table, columns, &label);
  const sh::LossKind loss = sh::loss_for(label.task);
  rc.train.loss = loss;
  rc.network.outputs =
      label.task == sh::TaskKind::kClassification ? label.classes.size() : 1;
  if (label.task == sh::TaskKind::kClassification && label.classes.size() < 2) {
    throw sh::InputError("label column '" + label.column + "' has fewer than two classes");
  }
  try {
    rc.network.validate();
    rc.train.validate();
  } catch (const std::invalid_argument& e) {
    throw sh::InputError(std::string("config: ") + e.what());
  }

  const std::vector<double> fractions{0.7, 0.1, 0.2};
  const sh::Split split =
      loss == sh::LossKind::kCrossEntropy
          ? sh::split_rows(ds.features.rows(), fractions, seed, ds.targets.classes)
          : sh::split_rows(ds.features.rows(), fractions, seed);
  const sh::TabularData train_data = ds.features.select(split.train);
  const sh::TabularSchema schema = sh::fit_schema(train_data);
  const sh::QuantileBins bins = sh::fit_bins(train_data, rc.network.embedding.g);
  const sh::EncodedBatch all = sh::encode(ds.features, schema);
  const sh::EncodedBatch train_rows = all.select(split.train);
  const sh::EncodedBatch val_rows = all.select(split.validation);
  const sh::EncodedBatch test_rows = all.select(split.test);
  const sh::Targets train_y = ds.targets.select(split.train);
  const sh::Targets val_y = ds.targets.select(split.validation);
  const sh::Targets test_y = ds.targets.select(split.test);

  fs::create_directories(a.out);
  json runs = json::array();
  double headline_sum = 0.0, accuracy_sum = 0.0;
  std::size_t headline_count = 0;
  for (std::size_t k = 0; k < a.repeats; ++k) {
    const std::uint64_t run_seed = seed + k;
    std::mt19937_64 init(sh::trial_seed(run_seed, 0));
    sh::BishopNetwork net(rc.network, schema, bins, init);
    sh::TrainConfig tc = rc.train;
    tc.seed = sh::trial_seed(run_seed, 1);
    sh::TrainHooks hooks;
    if (!a.quiet) {
      hooks.log = [&](const sh::EpochRecord& r) {
        std::fprintf(stderr, "run %zu epoch %zu train %.6f val %.6f lr %.3g metric %.6f\n", k + 1,
                     r.epoch, r.train_loss, r.val_loss, r.lr, r.val_metric);
      };
    }
    const sh::TrainResult result = sh::train(net, train_rows, train_y, val_rows, val_y, tc, hooks);
    const sh::Metrics test = sh::evaluate(net, test_rows, test_y, loss);

    const std::string suffix = a.repeats == 1 ? "" : "." + std::to_string(k + 1);
    sh::save_model((fs::path(a.out) / ("model" + suffix + ".sph")).string(), net, schema, label,
                   run_seed);
    {
      // Best-validation checkpoint, kept for comparison.
      const sh::ParamList params = net.parameters();
      const sh::Snapshot last = sh::snapshot(params);
      sh::restore(params, result.best);
      sh::save_model((fs::path(a.out) / ("model" + suffix + ".best.sph")).string(), net, schema,
                     label, run_seed);
      sh::restore(params, last);
    }
    write_text(fs::path(a.out) / ("history" + suffix + ".csv"), sh::history_csv(result.history));

    json run;
    run["seed"] = run_seed;
    run["epochs"] = result.history.size();
    run["best_epoch"] = result.best_epoch;
    run["test_loss"] = test.loss;
    if (loss == sh::LossKind::kCrossEntropy) {
      run["auc"] = optional_number(test.auc);
      run["accuracy"] = optional_number(test.accuracy);
      if (test.auc) {
        headline_sum += *test.auc;
        ++headline_count;
      }
      accuracy_sum += test.accuracy.value_or(0.0);
    } else {
      run["r2"] = optional_number(test.r2);
      headline_sum += *test.r2;
      ++headline_count;
    }
    std::vector<json> alphas;
    for (const auto& [name, value] : net.alphas()) alphas.push_back({{"layer", name}, {"alpha", value}});
    run["alphas"] = alphas;
    runs.push_back(run);
  }

  json metrics;
  metrics["task"] = sh::task_kind_name(label.task);
  metrics["label"] = label.column;
  metrics["seed"] = seed;
  metrics["rows"] = {{"train", split.train.size()},
                     {"validation", split.validation.size()},
                     {"test", split.test.size()}};
  metrics["repeats"] = a.repeats;
  metrics["epochs"] = runs[0]["epochs"];
  const std::string key = loss == sh::LossKind::kCrossEntropy ? "auc" : "r2";
  metrics[key] = headline_count ? json(headline_sum / static_cast<double>(headline_count))
                                : json(nullptr);
  if (loss == sh::LossKind::kCrossEntropy) {
    metrics["accuracy"] = accuracy_sum / static_cast<double>(a.repeats);
  }
  metrics["runs"] = runs;
  write_text(fs::path(a.out) / "metrics.json", metrics.dump(2) + "\n");
  std::cout << metrics.dump(2) << "\n";
  return kOk;
}

// ---- predict -----------------------------------------------------------------

int run_predict(const std::string& model_path, const std::string& data, const std::string& out) {
  const sh::SavedModel m = sh::load_model(model_path);
  const sh::CsvTable table = sh::read_csv(data);
  const sh::Dataset ds = sh::table_to_dataset(table, m.schema.columns, nullptr);
  const sh::EncodedBatch rows = sh::encode(ds.features, m.schema);
  const sh::LossKind loss = sh::loss_for(m.label.task);
  const sh::Tensor p = sh::predict(m.model, rows, loss);
  std::vector<std::string> header;
  if (loss == sh::LossKind::kCrossEntropy) {
    for (const std::string& c : m.label.classes) header.push_back("p_" + c);
  }
  header.push_back("prediction");
  std::string text = sh::csv_line(header) + "\n";
  const std::size_t k = m.network.outputs;
  char buf[64];
  for (std::size_t r = 0; r < rows.rows; ++r) {
    std::vector<std::string> fields;
    if (loss == sh::LossKind::kCrossEntropy) {
      std::size_t best = 0;
      for (std::size_t c = 0; c < k; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", p[r * k + c]);
        fields.emplace_back(buf);
        if (p[r * k + c] > p[r * k + best]) best = c;
      }
      fields.push_back(m.label.classes[best]);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", p[r]);
      fields.emplace_back(buf);
    }
    text += sh::csv_line(fields) + "\n";
  }
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  return kOk;
}

// ---- entmax / memory / experiment ------------------------------------------------

int run_entmax(double alpha, const std::string& logits) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw sh::InputError("--alpha must be >= 1");
  const std::vector<double> z = parse_list(logits, "--logits");
  const sh::EntmaxResult r = sh::entmax(z, alpha);
  // 1-based positions of the nonzero coordinates.
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < r.p.size(); ++i) {
    if (r.p[i] > 0.0) support.push_back(i + 1);
  }
  json j;
  j["alpha"] = alpha;
  j["p"] = r.p;
  j["tau"] = r.tau;
  j["support"] = support;
  std::cout << j.dump() << "\n";
  return kOk;
}

int run_memory(const std::string& patterns, const std::string& query, double alpha, double beta,
               int max_iters, double tol) {
  // Patterns are ';'-separated rows of ','-separated coordinates.
  std::vector<std::vector<double>> rows;
  std::stringstream ss(patterns);
  std::string row;
  while (std::getline(ss, row, ';')) rows.push_back(parse_list(row, "--patterns"));
  if (rows.empty()) throw sh::InputError("--patterns: no patterns");
  const std::size_t d = rows[0].size();
  Eigen::MatrixXd xi(d, rows.size());
  for (std::size_t mu = 0; mu < rows.size(); ++mu) {
    if (rows[mu].size() != d) throw sh::InputError("--patterns: rows differ in length");
    for (std::size_t i = 0; i < d; ++i) xi(i, mu) = rows[mu][i];
  }
  const std::vector<double> q = parse_list(query, "--query");
  if (q.size() != d) throw sh::InputError("--query: expected " + std::to_string(d) + " values");
  sh::RetrievalConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.max_iters = max_iters;
  cfg.tol = tol;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw sh::InputError(e.what());
  }
  const sh::MemoryBank bank(xi);
  const sh::RetrievalTrace trace =
      sh::retrieve(bank, Eigen::Map<const Eigen::VectorXd>(q.data(), d), cfg);
  const Eigen::VectorXd& x = trace.final_state();
  json j;
  j["state"] = std::vector<double>(x.data(), x.data() + x.size());
  j["energies"] = trace.energies;
  j["iterations"] = trace.iterations;
  j["converged"] = trace.converged;
  std::cout << j.dump() << "\n";
  return kOk;
}

int run_experiment_cmd(const std::string& kind, std::size_t d, std::size_t m, double beta,
                       const std::string& alphas, const std::string& noise, std::size_t trials,
                       std::optional<std::uint64_t> seed, const std::string& out) {
  sh::ExperimentSpec spec;
  try {
    spec.kind = sh::parse_experiment_kind(kind);
  } catch (const std::invalid_argument& e) {
    throw sh::InputError(e.what());
  }
  spec.dim = d;
  spec.memories = m;
  spec.beta = beta;
  spec.alphas = parse_list(alphas, "--alphas");
  if (!noise.empty()) spec.noise_levels = parse_list(noise, "--noise-levels");
  spec.trials = trials;
  spec.seed = resolve_seed(seed);
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw sh::InputError(e.what());
  }
  const sh::ExperimentResult r = sh::run_experiment(spec);
  if (out.empty() || out == "-") {
    std::cout << r.rows_csv();
  } else {
    write_text(out + ".csv", r.rows_csv());
    write_text(out + ".json", r.summary_json() + "\n");
  }
  std::cerr << r.summary_json() << "\n";
  return kOk;
}

// ---- synth ---------------------------------------------------------------------

int run_synth(const std::string& kind, std::size_t rows, std::uint64_t seed,
              const std::string& out) {
  sh::LabeledTable t;
  if (kind == "rule") {
    t = sh::rule_dataset(rows, 8, 2, seed);
  } else if (kind == "sparse-signal") {
    t = sh::sparse_signal_dataset(rows, 16, 0.1, seed);
  } else {
    throw sh::InputError("unknown synthetic kind '" + kind + "' (rule | sparse-signal)");
  }
  fs::create_directories(out);
  std::vector<std::string> header;
  json schema = json::array();
  for (const auto& c : t.data.columns) {
    header.push_back(c.name);
    schema.push_back({{"name", c.name}, {"kind", sh::column_kind_name(c.kind)}});
  }
  header.push_back("label");
  std::string text = sh::csv_line(header) + "\n";
  char buf[64];
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::string> fields;
    std::size_t num = 0, cat = 0;
    for (const auto& c : t.data.columns) {
      if (c.kind == sh::ColumnKind::kNumerical) {
        std::snprintf(buf, sizeof buf, "%.6f", t.data.numerical[num++][r]);
        fields.emplace_back(buf);
      } else {
        fields.push_back(t.data.categorical[cat++][r]);
      }
    }
    fields.push_back(t.targets.classes[r] ? "yes" : "no");
    text += sh::csv_line(fields) + "\n";
  }
  write_text(fs::path(out) / "data.csv", text);
  write_text(fs::path(out) / "schema.json", json{{"columns", schema}}.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  sh::configure_allocator();
  CLI::App app{"Sparse modern Hopfield tools: tabular training and associative-memory probes"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Split, fit embeddings, train, save model and metrics");
  fit_cmd->add_option("--data", fit.data, "CSV with header")->required();
  fit_cmd->add_option("--schema", fit.schema, "JSON list of {name, kind}")->required();
  fit_cmd->add_option("--label", fit.label, "Label column")->required();
  fit_cmd->add_option("--task", fit.task, "classification | regression");
  fit_cmd->add_option("--config", fit.config, "JSON hyperparameters; flags override");
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->add_option("--seed", fit.seed, "Seed (else SPARSEHOP_SEED, else config)");
  fit_cmd->add_option("--lr", fit.lr, "Learning rate");
  fit_cmd->add_option("--epochs", fit.epochs, "Maximum epochs");
  fit_cmd->add_option("--batch-size", fit.batch_size, "Rows per optimizer step");
  fit_cmd->add_option("--micro-batch", fit.micro_batch, "Rows per forward pass");
  fit_cmd->add_option("--alpha-mode", fit.alpha_mode, "fixed | learnable");
  fit_cmd->add_option("--alpha", fit.alpha, "Fixed alpha or starting alpha");
  fit_cmd->add_option("--dropout", fit.dropout, "Dropout rate");
  fit_cmd->add_option("--repeats", fit.repeats, "Independent runs; test metrics are averaged");
  fit_cmd->add_flag("--quiet", fit.quiet, "No per-epoch log");

  std::string model, pred_data, pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "Score rows with a saved model");
  predict_cmd->add_option("--model", model, "Model file")->required();
  predict_cmd->add_option("--data", pred_data, "CSV with the schema columns")->required();
  predict_cmd->add_option("--out", pred_out, "Predictions CSV (default stdout)");

  double ent_alpha = 1.5;
  std::string logits;
  auto* entmax_cmd = app.add_subcommand("entmax", "Print alpha-entmax of a logit vector");
  entmax_cmd->add_option("--alpha", ent_alpha, "alpha >= 1")->required();
  entmax_cmd->add_option("--logits", logits, "Comma-separated logits")->required();

  std::string patterns, query;
  double mem_alpha = 2.0, mem_beta = 1.0, mem_tol = 1e-8;
  int mem_iters = 100;
  auto* memory_cmd = app.add_subcommand("memory", "Run retrieval dynamics from a query");
  memory_cmd->add_option("--patterns", patterns, "Stored patterns 'a,b;c,d;...'")->required();
  memory_cmd->add_option("--query", query, "Query 'x1,x2,...'")->required();
  memory_cmd->add_option("--alpha", mem_alpha, "Entmax alpha");
  memory_cmd->add_option("--beta", mem_beta, "Inverse temperature");
  memory_cmd->add_option("--max-iters", mem_iters, "Iteration cap");
  memory_cmd->add_option("--tol", mem_tol, "Step-size tolerance");

  std::string exp_kind, exp_alphas = "1,2", exp_noise, exp_out;
  std::size_t exp_d = 8, exp_m = 16, exp_trials = 100;
  double exp_beta = 4.0;
  std::optional<std::uint64_t> exp_seed;
  auto* exp_cmd = app.add_subcommand("experiment", "Sparse-vs-dense retrieval experiments");
  exp_cmd->add_option("kind", exp_kind, "retrieval-error | noise | convergence")->required();
  exp_cmd->add_option("--d", exp_d, "Pattern dimension");
  exp_cmd->add_option("--M", exp_m, "Stored patterns");
  exp_cmd->add_option("--beta", exp_beta, "Inverse temperature");
  exp_cmd->add_option("--alphas", exp_alphas, "Comma-separated alphas");
  exp_cmd->add_option("--noise-levels", exp_noise, "Comma-separated sigmas (noise only)");
  exp_cmd->add_option("--trials", exp_trials, "Trials");
  exp_cmd->add_option("--seed", exp_seed, "Master seed (else SPARSEHOP_SEED, else 0)");
  exp_cmd->add_option("--out", exp_out, "Prefix for <out>.csv and <out>.json (default stdout)");

  std::string synth_kind = "rule", synth_out;
  std::size_t synth_rows = 200;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset and schema");
  synth_cmd->add_option("--kind", synth_kind, "rule | sparse-signal");
  synth_cmd->add_option("--rows", synth_rows, "Rows");
  synth_cmd->add_option("--seed", synth_seed, "Seed");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*predict_cmd) return run_predict(model, pred_data, pred_out);
    if (*entmax_cmd) return run_entmax(ent_alpha, logits);
    if (*memory_cmd) return run_memory(patterns, query, mem_alpha, mem_beta, mem_iters, mem_tol);
    if (*exp_cmd) {
      return run_experiment_cmd(exp_kind, exp_d, exp_m, exp_beta, exp_alphas, exp_noise,
                                exp_trials, exp_seed, exp_out);
    }
    if (*synth_cmd) return run_synth(synth_kind, synth_rows, synth_seed, synth_out);
  } catch (const sh::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const sh::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
