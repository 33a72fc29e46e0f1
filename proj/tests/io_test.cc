// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sparsehop/io.h"

#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "sparsehop/synthetic.h"

namespace sparsehop {
namespace {

CsvTable csv(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "t.csv");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

TEST(Csv, QuotingBlankLinesAndCrlf) {
  const CsvTable t = csv("a,b,c\r\n1,\"x,y\",\"say \"\"hi\"\"\"\r\n\n2,,\"multi\nline\"\n");
  ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][1], "x,y");
  EXPECT_EQ(t.rows[0][2], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_EQ(t.rows[1][2], "multi\nline");
  EXPECT_EQ(t.line_numbers, (std::vector<std::size_t>{2, 4}));
}

TEST(Csv, ErrorsNameTheLine) {
  EXPECT_NE(error_of([] { csv("a,b\n1,2\n3\n"); }).find("t.csv:3"), std::string::npos);
  EXPECT_NE(error_of([] { csv("a,b\n\"open,2\n"); }).find("t.csv:2"), std::string::npos);
  EXPECT_NE(error_of([] { csv("a,a\n1,2\n"); }).find("duplicate"), std::string::npos);
  EXPECT_NE(error_of([] { csv(""); }).find("header"), std::string::npos);
}

TEST(Csv, LineRoundTrip) {
  const std::vector<std::string> fields{"plain", "with,comma", "with\"quote", ""};
  const CsvTable t = csv("a,b,c,d\n" + csv_line(fields) + "\n");
  EXPECT_EQ(t.rows.at(0), fields);
}

const char* kSchema = R"({"columns": [{"name": "x", "kind": "numerical"},
                                     {"name": "c", "kind": "categorical"}]})";

TEST(Dataset, ColumnsLabelsAndTypedErrors) {
  const auto cols = parse_schema_json(kSchema);
  ASSERT_EQ(cols.size(), 2u);
  const CsvTable t = csv("c,x,y\nred,1.5,no\nblue,-2,yes\nred,3e1,no\n");
  LabelInfo label{"y", TaskKind::kClassification, {}};
  const Dataset ds = table_to_dataset(t, cols, &label);
  EXPECT_EQ(ds.features.numerical[0], (std::vector<double>{1.5, -2.0, 30.0}));
  EXPECT_EQ(ds.features.categorical[0], (std::vector<std::string>{"red", "blue", "red"}));
  EXPECT_EQ(label.classes, (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(ds.targets.classes, (std::vector<int>{0, 1, 0}));

  const CsvTable bad = csv("c,x,y\nred,1.5,no\nblue,abc,yes\n");
  EXPECT_NE(error_of([&] { table_to_dataset(bad, cols, nullptr); }).find("t.csv:3"),
            std::string::npos);
  const CsvTable inf = csv("c,x,y\nred,inf,no\n");
  EXPECT_NE(error_of([&] { table_to_dataset(inf, cols, nullptr); }).find("finite"),
            std::string::npos);
  LabelInfo missing{"target", TaskKind::kClassification, {}};
  EXPECT_NE(error_of([&] { table_to_dataset(t, cols, &missing); }).find("'target'"),
            std::string::npos);
  const CsvTable no_x = csv("c,y\nred,no\n");
  EXPECT_NE(error_of([&] { table_to_dataset(no_x, cols, nullptr); }).find("'x'"),
            std::string::npos);
}

TEST(Schema, Rejections) {
  EXPECT_THROW(parse_schema_json("[{\"name\": \"a\"}]"), InputError);
  EXPECT_THROW(parse_schema_json("[{\"name\": \"a\", \"kind\": \"text\"}]"), InputError);
  EXPECT_THROW(parse_schema_json("[]"), InputError);
  EXPECT_THROW(parse_schema_json("{not json"), InputError);
  EXPECT_THROW(parse_schema_json(R"([{"name": "a", "kind": "numerical"},
                                     {"name": "a", "kind": "categorical"}])"),
               InputError);
}

TEST(Config, AppliesKnownKeysAndRejectsOthers) {
  RunConfig rc;
  apply_config_json(R"({"G": 16, "L": 4, "lr": 0.001, "alpha_mode": "fixed", "beta": 0.5})", rc);
  EXPECT_EQ(rc.network.embedding.g, 16u);
  EXPECT_EQ(rc.network.embedding.patch, 4u);
  EXPECT_EQ(rc.train.lr, 0.001);
  EXPECT_EQ(rc.network.alpha_mode, AlphaMode::kFixed);
  EXPECT_EQ(*rc.network.beta, 0.5);
  // Untouched defaults stay put.
  EXPECT_EQ(rc.network.pooling, 10u);
  EXPECT_EQ(rc.train.batch_size, 64u);
  EXPECT_THROW(apply_config_json(R"({"learning_rate": 1})", rc), InputError);
  EXPECT_THROW(apply_config_json(R"({"G": "big"})", rc), InputError);
  EXPECT_THROW(apply_config_json(R"([1, 2])", rc), InputError);
}

struct Saved {
  TabularSchema schema;
  EncodedBatch rows;
  BishopNetwork net;
  LabelInfo label{"y", TaskKind::kClassification, {"no", "yes"}};
};

Saved trained_model() {
  const LabeledTable t = rule_dataset(30, 4, 2, 8);
  Saved s;
  s.schema = fit_schema(t.data);
  s.rows = encode(t.data, s.schema);
  NetworkConfig c;
  c.embedding = {8, 2, 4, 8};
  c.pooling = 2;
  c.levels = 2;
  c.merge = 2;
  c.decoded = 3;
  c.d_ff = 8;
  c.heads = 2;
  c.beta = 0.7;
  std::mt19937_64 rng(3);
  s.net = BishopNetwork(c, s.schema, fit_bins(t.data, 8), rng);
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.max_epochs = 2;
  cfg.patience = 2;
  cfg.batch_size = 10;
  train(s.net, s.rows, t.targets, s.rows, t.targets, cfg);
  return s;
}

TEST(ModelFile, RoundTripIsBitExact) {
  const Saved s = trained_model();
  std::stringstream first;
  write_model(first, s.net, s.schema, s.label, 42);
  const std::string bytes = first.str();
  const SavedModel loaded = read_model(first);
  EXPECT_EQ(loaded.seed, 42u);
  EXPECT_EQ(loaded.label.classes, s.label.classes);
  EXPECT_EQ(loaded.schema.vocabularies, s.schema.vocabularies);
  ASSERT_TRUE(loaded.network.beta.has_value());
  EXPECT_EQ(*loaded.network.beta, 0.7);

  const ParamList a = s.net.parameters(), b = loaded.model.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].first, b[i].first);
    ASSERT_EQ(0, std::memcmp(a[i].second.data().data(), b[i].second.data().data(),
                             a[i].second.size() * sizeof(double)))
        << a[i].first;
  }
  EXPECT_EQ(s.net.embedding.bins().boundaries, loaded.model.embedding.bins().boundaries);

  // Predictions agree bit for bit, and re-serializing gives the same bytes.
  const Tensor p = predict(s.net, s.rows, LossKind::kCrossEntropy);
  const Tensor q = predict(loaded.model, s.rows, LossKind::kCrossEntropy);
  ASSERT_EQ(p.size(), q.size());
  EXPECT_EQ(0, std::memcmp(p.data().data(), q.data().data(), p.size() * sizeof(double)));
  std::stringstream second;
  write_model(second, loaded.model, loaded.schema, loaded.label, loaded.seed);
  EXPECT_EQ(bytes, second.str());
}

TEST(ModelFile, RejectsForeignAndFutureFiles) {
  const Saved s = trained_model();
  std::stringstream out;
  write_model(out, s.net, s.schema, s.label, 1);
  std::string bytes = out.str();

  std::string future = bytes;
  future[8] = static_cast<char>(kModelFormatVersion + 1);
  std::stringstream f(future);
  EXPECT_NE(error_of([&] { read_model(f); }).find("version"), std::string::npos);

  std::stringstream junk("not a model at all");
  EXPECT_NE(error_of([&] { read_model(junk); }).find("not a sparsehop model"), std::string::npos);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 9));
  EXPECT_NE(error_of([&] { read_model(truncated); }).find("truncated"), std::string::npos);
}

}  // namespace
}  // namespace sparsehop
