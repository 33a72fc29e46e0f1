// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Files the command-line tool reads and writes: CSV tables, the column
// schema, run configuration, and the binary model container.
//
// Model container layout (all integers little-endian):
//   8 bytes  magic "SPHOPMDL"
//   u32      format version
//   u64      header length n, then n bytes of JSON
//   for every tensor listed in the header, in order:
//     u64 value count, then that many IEEE-754 f64 values

#ifndef SPARSEHOP_IO_H_
#define SPARSEHOP_IO_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsehop/embedding.h"
#include "sparsehop/network.h"
#include "sparsehop/training.h"

namespace sparsehop {

// Malformed or inconsistent user input (bad CSV, schema, config, model file).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

// ---- CSV -------------------------------------------------------------------

struct CsvTable {
  std::string source;  // file name for error messages
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Comma-separated, header first, double-quote escaping ("" inside quotes).
// Errors name the offending line.
CsvTable parse_csv(std::istream& in, const std::string& source = "<input>");
CsvTable read_csv(const std::string& path);

// Joins fields, quoting those that need it.
std::string csv_line(const std::vector<std::string>& fields);

// ---- schema and dataset ----------------------------------------------------

enum class TaskKind { kClassification, kRegression };
TaskKind parse_task_kind(const std::string& name);
std::string task_kind_name(TaskKind kind);
LossKind loss_for(TaskKind task);

// Accepts `[{"name": .., "kind": ..}, ...]` or `{"columns": [...]}`.
std::vector<ColumnSpec> parse_schema_json(const std::string& text);
std::vector<ColumnSpec> read_schema(const std::string& path);

struct LabelInfo {
  std::string column;
  TaskKind task = TaskKind::kClassification;
  std::vector<std::string> classes;  // sorted; class index = position
};

struct Dataset {
  TabularData features;
  Targets targets;  // empty when the table carries no label column
};

// Pulls the schema columns (and the label, when `label` is set) out of a
// table. Classification labels map through `label->classes`; when that list
// is empty it is filled from the table.
Dataset table_to_dataset(const CsvTable& table, const std::vector<ColumnSpec>& columns,
                         LabelInfo* label);

// ---- configuration ---------------------------------------------------------

struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
};

// Flat JSON object. Keys: G, G_shared, L, C, H, r, S, D_model, D_ff, heads,
// dropout, alpha_mode ("fixed" | "learnable"), alpha, beta, lr, beta1, beta2,
// adam_eps, factor, plateau_eps, patience, scheduler_patience, max_epochs,
// batch_size, micro_batch, seed. Unknown keys are rejected.
void apply_config_json(const std::string& text, RunConfig& config);

AlphaMode parse_alpha_mode(const std::string& name);
std::string alpha_mode_name(AlphaMode mode);

// ---- model container -------------------------------------------------------

struct SavedModel {
  NetworkConfig network;
  TabularSchema schema;
  LabelInfo label;
  BishopNetwork model;
  std::uint64_t seed = 0;
};

void write_model(std::ostream& out, const BishopNetwork& net, const TabularSchema& schema,
                 const LabelInfo& label, std::uint64_t seed);
void save_model(const std::string& path, const BishopNetwork& net, const TabularSchema& schema,
                const LabelInfo& label, std::uint64_t seed);
SavedModel read_model(std::istream& in);
SavedModel load_model(const std::string& path);

}  // namespace sparsehop

#endif  // SPARSEHOP_IO_H_
