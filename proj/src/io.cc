// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/io.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sparsehop {
namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'S', 'P', 'H', 'O', 'P', 'M', 'D', 'L'};

static_assert(std::endian::native == std::endian::little,
              "the model container is written with native little-endian stores");

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

std::optional<double> parse_double(const std::string& text) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
  if (begin < end && *begin == '+') ++begin;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw InputError(std::string("model file truncated while reading ") + what);
  return value;
}

void put_values(std::ostream& out, std::span<const double> values) {
  put<std::uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> get_values(std::istream& in, std::size_t expected, const std::string& name) {
  const auto n = get<std::uint64_t>(in, "a tensor length");
  if (n != expected) {
    throw InputError("model file: tensor '" + name + "' holds " + std::to_string(n) +
                     " values, expected " + std::to_string(expected));
  }
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw InputError("model file truncated inside tensor '" + name + "'");
  return values;
}

json network_json(const NetworkConfig& c) {
  json j;
  j["G"] = c.embedding.g;
  j["G_shared"] = c.embedding.g_shared;
  j["L"] = c.embedding.patch;
  j["D_model"] = c.embedding.d_model;
  j["C"] = c.pooling;
  j["H"] = c.levels;
  j["r"] = c.merge;
  j["S"] = c.decoded;
  j["D_ff"] = c.d_ff;
  j["heads"] = c.heads;
  j["dropout"] = c.dropout;
  j["alpha_mode"] = alpha_mode_name(c.alpha_mode);
  j["alpha"] = c.alpha;
  j["beta"] = c.beta ? json(*c.beta) : json(nullptr);
  j["outputs"] = c.outputs;
  return j;
}

// Applies the keys it knows; returns false for a key it does not.
bool apply_network_key(const std::string& key, const json& v, NetworkConfig& c) {
  if (key == "G") c.embedding.g = v.get<std::size_t>();
  else if (key == "G_shared") c.embedding.g_shared = v.get<std::size_t>();
  else if (key == "L") c.embedding.patch = v.get<std::size_t>();
  else if (key == "D_model") c.embedding.d_model = v.get<std::size_t>();
  else if (key == "C") c.pooling = v.get<std::size_t>();
  else if (key == "H") c.levels = v.get<std::size_t>();
  else if (key == "r") c.merge = v.get<std::size_t>();
  else if (key == "S") c.decoded = v.get<std::size_t>();
  else if (key == "D_ff") c.d_ff = v.get<std::size_t>();
  else if (key == "heads") c.heads = v.get<std::size_t>();
  else if (key == "dropout") c.dropout = v.get<double>();
  else if (key == "alpha_mode") c.alpha_mode = parse_alpha_mode(v.get<std::string>());
  else if (key == "alpha") c.alpha = v.get<double>();
  else if (key == "beta") c.beta = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  else if (key == "outputs") c.outputs = v.get<std::size_t>();
  else return false;
  return true;
}

bool apply_train_key(const std::string& key, const json& v, TrainConfig& t) {
  if (key == "lr") t.lr = v.get<double>();
  else if (key == "beta1") t.beta1 = v.get<double>();
  else if (key == "beta2") t.beta2 = v.get<double>();
  else if (key == "adam_eps") t.adam_eps = v.get<double>();
  else if (key == "factor") t.factor = v.get<double>();
  else if (key == "plateau_eps") t.plateau_eps = v.get<double>();
  else if (key == "patience") t.patience = v.get<std::size_t>();
  else if (key == "scheduler_patience") t.scheduler_patience = v.get<std::size_t>();
  else if (key == "max_epochs") t.max_epochs = v.get<std::size_t>();
  else if (key == "batch_size") t.batch_size = v.get<std::size_t>();
  else if (key == "micro_batch") t.micro_batch = v.get<std::size_t>();
  else if (key == "seed") t.seed = v.get<std::uint64_t>();
  else return false;
  return true;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- CSV -------------------------------------------------------------------

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  table.source = source;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t start_line = line_no;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0;; ++i) {
      if (i == line.size()) {
        if (!quoted) break;
        // A quoted field continues on the next physical line.
        std::string next;
        if (!std::getline(in, next)) fail_at(source, start_line, "unterminated quoted field");
        ++line_no;
        field += '\n';
        line = std::move(next);
        i = static_cast<std::size_t>(-1);
        continue;
      }
      const char ch = line[i];
      if (quoted) {
        if (ch == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += ch;
        }
      } else if (ch == '"') {
        if (!field.empty() || was_quoted) fail_at(source, line_no, "stray quote inside a field");
        quoted = was_quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (ch == '\r' && i + 1 == line.size()) {
        // Tolerate CRLF line endings.
      } else {
        if (was_quoted) fail_at(source, line_no, "text after a closing quote");
        field += ch;
      }
    }
    fields.push_back(std::move(field));
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      fail_at(source, start_line,
              "expected " + std::to_string(table.header.size()) + " fields, got " +
                  std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(start_line);
  }
  if (!have_header) throw InputError(source + ": missing header row");
  std::set<std::string> seen;
  for (const std::string& h : table.header) {
    if (!seen.insert(h).second) fail_at(source, 1, "duplicate column '" + h + "'");
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      out += f;
      continue;
    }
    out += '"';
    for (char ch : f) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += '"';
  }
  return out;
}

// ---- schema and dataset ----------------------------------------------------

TaskKind parse_task_kind(const std::string& name) {
  if (name == "classification") return TaskKind::kClassification;
  if (name == "regression") return TaskKind::kRegression;
  throw InputError("unknown task '" + name + "' (expected classification or regression)");
}

std::string task_kind_name(TaskKind kind) {
  return kind == TaskKind::kClassification ? "classification" : "regression";
}

LossKind loss_for(TaskKind task) {
  return task == TaskKind::kClassification ? LossKind::kCrossEntropy : LossKind::kSquaredError;
}

std::vector<ColumnSpec> parse_schema_json(const std::string& text) {
  json j = parse_json(text, "schema");
  if (j.is_object() && j.contains("columns")) j = j["columns"];
  if (!j.is_array()) throw InputError("schema: expected an array of {name, kind}");
  std::vector<ColumnSpec> columns;
  std::set<std::string> seen;
  for (const json& c : j) {
    if (!c.is_object() || !c.contains("name") || !c.contains("kind") || !c["name"].is_string() ||
        !c["kind"].is_string()) {
      throw InputError("schema: every entry needs string 'name' and 'kind'");
    }
    ColumnSpec spec;
    spec.name = c["name"].get<std::string>();
    try {
      spec.kind = parse_column_kind(c["kind"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw InputError("schema: column '" + spec.name + "': " + e.what());
    }
    if (!seen.insert(spec.name).second) throw InputError("schema: duplicate column '" + spec.name + "'");
    columns.push_back(std::move(spec));
  }
  if (columns.empty()) throw InputError("schema: no columns");
  return columns;
}

std::vector<ColumnSpec> read_schema(const std::string& path) {
  return parse_schema_json(slurp(path));
}

Dataset table_to_dataset(const CsvTable& table, const std::vector<ColumnSpec>& columns,
                         LabelInfo* label) {
  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (table.header[i] == name) return i;
    }
    return std::nullopt;
  };
  Dataset ds;
  ds.features.columns = columns;
  std::vector<std::pair<std::size_t, ColumnSpec>> located;
  for (const ColumnSpec& c : columns) {
    const auto at = find(c.name);
    if (!at) throw InputError(table.source + ": column '" + c.name + "' not found in header");
    if (label && c.name == label->column) {
      throw InputError("label column '" + c.name + "' is also listed as a feature");
    }
    located.emplace_back(*at, c);
  }
  for (const auto& [at, c] : located) {
    if (c.kind == ColumnKind::kNumerical) {
      auto& col = ds.features.numerical.emplace_back();
      col.reserve(table.rows.size());
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto v = parse_double(table.rows[r][at]);
        if (!v) {
          fail_at(table.source, table.line_numbers[r],
                  "column '" + c.name + "': '" + table.rows[r][at] + "' is not a finite number");
        }
        col.push_back(*v);
      }
    } else {
      auto& col = ds.features.categorical.emplace_back();
      col.reserve(table.rows.size());
      for (const auto& row : table.rows) col.push_back(row[at]);
    }
  }
  if (!label) return ds;
  const auto at = find(label->column);
  if (!at) {
    throw InputError(table.source + ": label column '" + label->column + "' not found in header");
  }
  if (label->task == TaskKind::kRegression) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto v = parse_double(table.rows[r][*at]);
      if (!v) {
        fail_at(table.source, table.line_numbers[r],
                "label '" + table.rows[r][*at] + "' is not a finite number");
      }
      ds.targets.values.push_back(*v);
    }
    return ds;
  }
  if (label->classes.empty()) {
    std::set<std::string> values;
    for (const auto& row : table.rows) values.insert(row[*at]);
    label->classes.assign(values.begin(), values.end());
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& classes = label->classes;
    const auto it = std::find(classes.begin(), classes.end(), table.rows[r][*at]);
    if (it == classes.end()) {
      fail_at(table.source, table.line_numbers[r],
              "label '" + table.rows[r][*at] + "' is not a known class");
    }
    ds.targets.classes.push_back(static_cast<int>(it - classes.begin()));
  }
  return ds;
}

// ---- configuration ---------------------------------------------------------

AlphaMode parse_alpha_mode(const std::string& name) {
  if (name == "fixed") return AlphaMode::kFixed;
  if (name == "learnable") return AlphaMode::kLearnable;
  throw InputError("unknown alpha mode '" + name + "' (expected fixed or learnable)");
}

std::string alpha_mode_name(AlphaMode mode) {
  return mode == AlphaMode::kFixed ? "fixed" : "learnable";
}

void apply_config_json(const std::string& text, RunConfig& config) {
  const json j = parse_json(text, "config");
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "outputs") throw InputError("config: 'outputs' is derived from the label");
      if (!apply_network_key(key, value, config.network) &&
          !apply_train_key(key, value, config.train)) {
        throw InputError("config: unknown key '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw InputError("config: key '" + key + "': " + e.what());
    }
  }
}

// ---- model container -------------------------------------------------------

void write_model(std::ostream& out, const BishopNetwork& net, const TabularSchema& schema,
                 const LabelInfo& label, std::uint64_t seed) {
  json header;
  header["format"] = "sparsehop-model";
  header["version"] = kModelFormatVersion;
  header["network"] = network_json(net.config());
  json cols = json::array();
  for (const ColumnSpec& c : schema.columns) {
    cols.push_back({{"name", c.name}, {"kind", column_kind_name(c.kind)}});
  }
  header["schema"]["columns"] = cols;
  json vocabs = json::array();
  for (const auto& vocab : schema.vocabularies) {
    std::vector<std::string> ordered(vocab.size());
    for (const auto& [value, index] : vocab) ordered.at(index - 1) = value;
    vocabs.push_back(ordered);
  }
  header["schema"]["vocabularies"] = vocabs;
  header["label"] = {{"column", label.column},
                     {"task", task_kind_name(label.task)},
                     {"classes", label.classes}};
  header["seed"] = seed;
  const QuantileBins& bins = net.embedding.bins();
  header["bins"] = {{"g", bins.g}, {"features", bins.boundaries.size()}};
  json tensors = json::array();
  const ParamList params = net.parameters();
  for (const auto& [name, p] : params) tensors.push_back({{"name", name}, {"shape", p.shape()}});
  header["tensors"] = tensors;

  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : bins.boundaries) put_values(out, b);
  for (const auto& [name, p] : params) put_values(out, p.data());
  if (!out) throw InputError("model file: write failed");
}

void save_model(const std::string& path, const BishopNetwork& net, const TabularSchema& schema,
                const LabelInfo& label, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_model(out, net, schema, label, seed);
}

SavedModel read_model(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw InputError("not a sparsehop model file");
  }
  const auto version = get<std::uint32_t>(in, "the version");
  if (version != kModelFormatVersion) {
    throw InputError("unsupported model format version " + std::to_string(version) +
                     " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto length = get<std::uint64_t>(in, "the header length");
  if (length > (1u << 30)) throw InputError("model file: implausible header length");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw InputError("model file truncated inside the header");
  const json header = parse_json(text, "model header");

  SavedModel m;
  try {
    for (const auto& [key, value] : header["network"].items()) {
      if (!apply_network_key(key, value, m.network)) {
        throw InputError("model header: unknown network key '" + key + "'");
      }
    }
    for (const json& c : header["schema"]["columns"]) {
      m.schema.columns.push_back(
          {c["name"].get<std::string>(), parse_column_kind(c["kind"].get<std::string>())});
    }
    for (const ColumnSpec& c : m.schema.columns) {
      (c.kind == ColumnKind::kNumerical ? m.schema.numerical_names : m.schema.categorical_names)
          .push_back(c.name);
    }
    for (const json& vocab : header["schema"]["vocabularies"]) {
      auto& dst = m.schema.vocabularies.emplace_back();
      std::size_t next = 1;
      for (const json& value : vocab) dst[value.get<std::string>()] = next++;
    }
    if (m.schema.vocabularies.size() != m.schema.n_cat()) {
      throw InputError("model header: vocabulary count does not match the schema");
    }
    m.label.column = header["label"]["column"].get<std::string>();
    m.label.task = parse_task_kind(header["label"]["task"].get<std::string>());
    m.label.classes = header["label"]["classes"].get<std::vector<std::string>>();
    m.seed = header["seed"].get<std::uint64_t>();

    QuantileBins bins;
    bins.g = header["bins"]["g"].get<std::size_t>();
    const auto features = header["bins"]["features"].get<std::size_t>();
    for (std::size_t j = 0; j < features; ++j) {
      bins.boundaries.push_back(get_values(in, bins.g + 1, "bins." + std::to_string(j)));
    }
    std::mt19937_64 rng(0);
    m.model = BishopNetwork(m.network, m.schema, std::move(bins), rng);
    const ParamList params = m.model.parameters();
    const json& tensors = header["tensors"];
    if (tensors.size() != params.size()) {
      throw InputError("model file lists " + std::to_string(tensors.size()) +
                       " tensors, the configured network has " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& [name, p] = params[i];
      if (tensors[i]["name"].get<std::string>() != name ||
          tensors[i]["shape"].get<Shape>() != p.shape()) {
        throw InputError("model file: tensor " + std::to_string(i) + " ('" +
                         tensors[i]["name"].get<std::string>() +
                         "') does not match the configured network ('" + name + "' " +
                         to_string(p.shape()) + ")");
      }
      const auto values = get_values(in, p.size(), name);
      Tensor target = p;
      std::copy(values.begin(), values.end(), target.mutable_data().begin());
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
  return m;
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_model(in);
}

}  // namespace sparsehop
