// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

// Python bindings: entmax, the associative memory, the experiment harness
// and prediction with saved models.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparsehop/embedding.h"
#include "sparsehop/entmax.h"
#include "sparsehop/experiments.h"
#include "sparsehop/hopfield.h"
#include "sparsehop/io.h"
#include "sparsehop/runtime.h"
#include "sparsehop/tensor.h"
#include "sparsehop/training.h"

namespace py = pybind11;
namespace sh = sparsehop;

namespace {

sh::RetrievalConfig retrieval_config(double alpha, double beta, int max_iters, double tol) {
  sh::RetrievalConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.max_iters = max_iters;
  cfg.tol = tol;
  cfg.validate();
  return cfg;
}

py::dict entmax_dict(const std::vector<double>& z, double alpha) {
  const sh::EntmaxResult r = sh::entmax(z, alpha);
  py::dict d;
  d["p"] = py::array_t<double>(r.p.size(), r.p.data());
  d["tau"] = r.tau;
  d["support"] = r.support;
  d["alpha"] = r.alpha;
  return d;
}

// Columns come in as {name: sequence}; numerical columns are converted to
// floats, categorical ones to strings.
sh::TabularData columns_to_table(const sh::TabularSchema& schema, const py::dict& columns) {
  sh::TabularData data;
  data.columns = schema.columns;
  for (const sh::ColumnSpec& col : schema.columns) {
    const py::str key(col.name);
    if (!columns.contains(key)) {
      throw sh::InputError("missing column '" + col.name + "'");
    }
    const py::object values = columns[key];
    if (col.kind == sh::ColumnKind::kNumerical) {
      data.numerical.push_back(values.cast<std::vector<double>>());
    } else {
      std::vector<std::string> cells;
      for (const py::handle v : values) cells.push_back(py::str(v).cast<std::string>());
      data.categorical.push_back(std::move(cells));
    }
  }
  return data;
}

class Model {
 public:
  explicit Model(const std::string& path) : saved_(sh::load_model(path)) {}

  std::vector<std::string> classes() const { return saved_.label.classes; }
  std::string label() const { return saved_.label.column; }
  std::string task() const { return sh::task_kind_name(saved_.label.task); }
  std::uint64_t seed() const { return saved_.seed; }

  std::vector<std::pair<std::string, double>> alphas() const { return saved_.model.alphas(); }

  py::array_t<double> predict(const py::dict& columns) const {
    const sh::TabularData data = columns_to_table(saved_.schema, columns);
    return run(sh::encode(data, saved_.schema));
  }

  py::array_t<double> predict_csv(const std::string& path) const {
    const sh::CsvTable table = sh::read_csv(path);
    const sh::Dataset ds = sh::table_to_dataset(table, saved_.schema.columns, nullptr);
    return run(sh::encode(ds.features, saved_.schema));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : saved_.model.parameters()) n += p.size();
    return n;
  }

 private:
  py::array_t<double> run(const sh::EncodedBatch& rows) const {
    const sh::Tensor out = sh::predict(saved_.model, rows, sh::loss_for(saved_.label.task));
    const std::size_t k = out.rank() == 2 ? out.dim(1) : 1;
    py::array_t<double> result({rows.rows, k});
    std::copy(out.data().begin(), out.data().end(), result.mutable_data());
    return result;
  }

  sh::SavedModel saved_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  sh::configure_allocator();
  m.doc() = "Sparse modern Hopfield networks for tabular data";

  py::register_exception<sh::InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<sh::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("entmax", &entmax_dict, py::arg("z"), py::arg("alpha"),
        "alpha-entmax of a logit vector: dict with p, tau, support, alpha.");
  m.def(
      "entmax_conjugate",
      [](const std::vector<double>& z, double alpha) { return sh::entmax_conjugate(z, alpha); },
      py::arg("z"), py::arg("alpha"));
  m.def(
      "entmax_jacobian",
      [](const std::vector<double>& z, double alpha) { return sh::entmax_jacobian(z, alpha); },
      py::arg("z"), py::arg("alpha"));
  m.def(
      "tsallis_entropy",
      [](const std::vector<double>& p, double alpha) { return sh::tsallis_entropy(p, alpha); },
      py::arg("p"), py::arg("alpha"));

  // Patterns are passed as a (d, M) array, one memory per column.
  m.def(
      "energy",
      [](const Eigen::MatrixXd& patterns, const Eigen::VectorXd& x, double alpha, double beta) {
        return sh::energy(sh::MemoryBank(patterns), x, retrieval_config(alpha, beta, 100, 1e-8));
      },
      py::arg("patterns"), py::arg("x"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0);
  m.def(
      "retrieval_step",
      [](const Eigen::MatrixXd& patterns, const Eigen::VectorXd& x, double alpha, double beta) {
        return sh::retrieval_step(sh::MemoryBank(patterns), x,
                                  retrieval_config(alpha, beta, 100, 1e-8));
      },
      py::arg("patterns"), py::arg("x"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0);
  m.def(
      "retrieve",
      [](const Eigen::MatrixXd& patterns, const Eigen::VectorXd& x, double alpha, double beta,
         int max_iters, double tol) {
        const sh::RetrievalTrace t = sh::retrieve(sh::MemoryBank(patterns), x,
                                                  retrieval_config(alpha, beta, max_iters, tol));
        py::dict d;
        d["state"] = t.final_state();
        d["energies"] = t.energies;
        d["iterations"] = t.iterations;
        d["converged"] = t.converged;
        return d;
      },
      py::arg("patterns"), py::arg("x"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0,
      py::arg("max_iters") = 100, py::arg("tol") = 1e-8);

  m.def(
      "run_experiment",
      [](const std::string& kind, std::size_t d, std::size_t memories, double beta,
         std::vector<double> alphas, std::vector<double> noise_levels, std::size_t trials,
         std::uint64_t seed) {
        sh::ExperimentSpec spec;
        spec.kind = sh::parse_experiment_kind(kind);
        spec.dim = d;
        spec.memories = memories;
        spec.beta = beta;
        spec.alphas = std::move(alphas);
        spec.noise_levels = std::move(noise_levels);
        spec.trials = trials;
        spec.seed = seed;
        const sh::ExperimentResult r = sh::run_experiment(spec);
        py::dict out;
        out["rows_csv"] = r.rows_csv();
        out["summary_json"] = r.summary_json();
        out["sparse_le_dense_all_trials"] = r.sparse_le_dense_all_trials;
        out["sparse_le_dense_on_means"] = r.sparse_le_dense_on_means;
        return out;
      },
      py::arg("kind"), py::arg("d") = 8, py::arg("M") = 16, py::arg("beta") = 4.0,
      py::arg("alphas") = std::vector<double>{1.0, 2.0},
      py::arg("noise_levels") = std::vector<double>{0.05, 0.1, 0.2, 0.3, 0.5},
      py::arg("trials") = 100, py::arg("seed") = 0);

  m.def(
      "binary_auc",
      [](const std::vector<int>& labels, const std::vector<double>& scores) {
        return sh::binary_auc(labels, scores);
      },
      py::arg("labels"), py::arg("scores"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def_property_readonly("classes", &Model::classes)
      .def_property_readonly("label", &Model::label)
      .def_property_readonly("task", &Model::task)
      .def_property_readonly("seed", &Model::seed)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("alphas", &Model::alphas)
      .def("predict", &Model::predict, py::arg("columns"),
           "Class probabilities [rows, classes], or predictions [rows, 1] for regression.")
      .def("predict_csv", &Model::predict_csv, py::arg("path"));
}
