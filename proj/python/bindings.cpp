#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "warmopf/acopf.hpp"
#include "warmopf/casefile.hpp"
#include "warmopf/dataset.hpp"
#include "warmopf/error.hpp"
#include "warmopf/forest.hpp"
#include "warmopf/util.hpp"

namespace py = pybind11;
using namespace warmopf;

namespace {

template <class T, class Parse>
T parse_or_throw(const std::string& text, Parse parse, const char* what) {
  if (auto v = parse(text)) return *v;
  throw py::value_error(std::string("unknown ") + what + ": " + text);
}

py::dict solution_dict(const OpfSolution& s, double initial_violation) {
  py::dict d;
  d["status"] = std::string(to_string(s.status));
  d["objective"] = s.objective;
  d["iterations"] = s.iterations;
  d["vm"] = s.state.vm;
  d["va"] = s.state.va;
  d["pg"] = s.pg;
  d["qg"] = s.qg;
  d["initial_violation"] = initial_violation;
  std::vector<double> trace;
  for (const auto& r : s.trace) trace.push_back(r.max_violation);
  d["violation_trace"] = trace;
  d["solve_time"] = s.wall_time;
  return d;
}

py::dict solve(const CaseData& data, const std::string& start, const std::string& profile,
               const std::optional<std::vector<double>>& prediction, const std::string& angles, bool line_limits) {
  const OpfProblem problem(data, line_limits);
  const StartLabel label = parse_or_throw<StartLabel>(start, parse_start_label, "start");
  StartPoint point;
  {
    py::gil_scoped_release release;
    switch (label) {
      case StartLabel::Flat: point = make_flat_start(problem); break;
      case StartLabel::DC: point = dc_start_or_flat(problem); break;
      default:
        if (!prediction) throw Error(ErrorCode::InvalidValue, "the learned start needs a prediction");
        point = make_learned_start(problem, *prediction,
                                   parse_or_throw<LearnedAngles>(angles, parse_learned_angles, "angle mode"));
    }
  }
  const double initial = max_constraint_violation(problem, point);
  const SolverProfile prof = parse_or_throw<SolverProfile>(profile, parse_profile, "profile");
  OpfSolution sol;
  {
    py::gil_scoped_release release;
    sol = solve_acopf(problem, point, prof);
  }
  return solution_dict(sol, initial);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learned warm starts for AC optimal power flow";

  py::exception<Error>(m, "WarmopfError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object type = py::module_::import("warmopf._core").attr("WarmopfError");
      py::object err = type(e.what());
      err.attr("code") = std::string(error_code_name(e.code()));
      PyErr_SetObject(type.ptr(), err.ptr());
    }
  });

  py::class_<CaseData>(m, "Case")
      .def_readonly("name", &CaseData::name)
      .def_readonly("base_mva", &CaseData::base_mva)
      .def_readonly("warnings", &CaseData::warnings)
      .def_property_readonly("num_buses", &CaseData::num_buses)
      .def_property_readonly("num_gens", &CaseData::num_gens)
      .def_property_readonly("bus_ids", [](const CaseData& c) { return index_map(c).ids(); })
      .def_property_readonly("hash", [](const CaseData& c) { return case_hash(c); })
      .def("scaled", &scale_loads, py::arg("factors"), "Copy with bus loads multiplied by per-bus factors")
      .def("__repr__", [](const CaseData& c) {
        return "<Case " + c.name + ": " + std::to_string(c.num_buses()) + " buses, " + std::to_string(c.num_gens()) +
               " generators>";
      });

  m.def("load_case", &load_case, py::arg("path"));
  m.def("parse_case", &parse_case, py::arg("text"), py::arg("name") = "case");
  m.def("feature_names", &feature_names, py::arg("case"));
  m.def("target_names", &target_names, py::arg("case"));
  m.def("load_features", &load_features, py::arg("case"));

  m.def("solve", &solve, py::arg("case"), py::arg("start") = "flat", py::arg("profile") = "robust",
        py::arg("prediction") = py::none(), py::arg("learned_angles") = "zero", py::arg("line_limits") = false,
        "Solve the ACOPF from a flat, dc or learned start");

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("feature_names", &Dataset::feature_names)
      .def_readonly("target_names", &Dataset::target_names)
      .def_readonly("X", &Dataset::X)
      .def_readonly("T", &Dataset::T)
      .def_readonly("aux", &Dataset::aux)
      .def_readonly("train", &Dataset::train)
      .def_readonly("test", &Dataset::test)
      .def_readonly("warnings", &Dataset::warnings)
      .def_property_readonly("attempts", [](const Dataset& d) { return d.meta.attempts; })
      .def_property_readonly("discards", [](const Dataset& d) { return d.meta.discards; })
      .def_property_readonly("hash", [](const Dataset& d) { return dataset_hash(d); })
      .def("__len__", &Dataset::rows);

  m.def(
      "generate",
      [](const CaseData& data, std::size_t n, std::uint64_t seed, double low, double high, bool per_bus,
         const std::string& profile, int threads) {
        SampleSpec spec;
        spec.n_samples = n;
        spec.seed = seed;
        spec.scale_low = low;
        spec.scale_high = high;
        spec.per_bus_independent = per_bus;
        GenerateOptions opts;
        opts.profile = parse_or_throw<SolverProfile>(profile, parse_profile, "profile");
        opts.threads = threads;
        py::gil_scoped_release release;
        return generate(data, spec, opts);
      },
      py::arg("case"), py::arg("n"), py::arg("seed") = 0, py::arg("scale_low") = 0.8, py::arg("scale_high") = 1.2,
      py::arg("per_bus") = true, py::arg("profile") = "robust", py::arg("threads") = 1);
  m.def("split", &split, py::arg("dataset"), py::arg("train_fraction") = 0.8, py::arg("seed") = 0);
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("dir"));
  m.def(
      "load_dataset", [](const std::filesystem::path& dir) { return load_dataset(dir); }, py::arg("dir"));
  m.def(
      "row_mismatch", [](const CaseData& c, const Dataset& d, std::size_t row) { return row_mismatch(c, d, row); },
      py::arg("case"), py::arg("dataset"), py::arg("row"));

  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init([](int n_estimators, int max_depth, int min_samples_split, int max_features, bool bootstrap,
                       std::uint64_t seed) {
             return Hyperparams{n_estimators, max_depth, min_samples_split, max_features, bootstrap, seed};
           }),
           py::arg("n_estimators") = 100, py::arg("max_depth") = 0, py::arg("min_samples_split") = 2,
           py::arg("max_features") = 0, py::arg("bootstrap") = true, py::arg("seed") = 0)
      .def_readwrite("n_estimators", &Hyperparams::n_estimators)
      .def_readwrite("max_depth", &Hyperparams::max_depth)
      .def_readwrite("min_samples_split", &Hyperparams::min_samples_split)
      .def_readwrite("max_features", &Hyperparams::max_features)
      .def_readwrite("bootstrap", &Hyperparams::bootstrap)
      .def_readwrite("seed", &Hyperparams::seed)
      .def(py::self == py::self);

  py::class_<ForestModel>(m, "Forest")
      .def_property_readonly("n_trees", [](const ForestModel& f) { return f.trees.size(); })
      .def_readonly("params", &ForestModel::params)
      .def_property_readonly("features", [](const ForestModel& f) { return f.schema.features; })
      .def_property_readonly("targets", [](const ForestModel& f) { return f.schema.targets; })
      .def(
          "predict",
          [](const ForestModel& f, const Matrix& X, int threads) {
            py::gil_scoped_release release;
            return f.predict(X, threads);
          },
          py::arg("X"), py::arg("threads") = 1)
      .def("save", [](const ForestModel& f, const std::filesystem::path& p) { save_model(f, p); }, py::arg("path"));

  m.def(
      "fit_forest",
      [](const Matrix& X, const Matrix& T, const Hyperparams& p, int threads) {
        py::gil_scoped_release release;
        return fit_forest(X, T, p, {}, threads);
      },
      py::arg("X"), py::arg("T"), py::arg("params") = Hyperparams{}, py::arg("threads") = 1);
  m.def(
      "fit_forest_on",
      [](const Dataset& d, const Hyperparams& p, int threads) {
        py::gil_scoped_release release;
        return fit_forest(d, p, threads);
      },
      py::arg("dataset"), py::arg("params") = Hyperparams{}, py::arg("threads") = 1,
      "Fit on the dataset's training split, keeping its column names");
  m.def("load_model", &load_model, py::arg("path"));

  m.def("r2_per_target", &r2_per_target, py::arg("truth"), py::arg("predicted"));
  m.def(
      "relative_error",
      [](const Matrix& pred, const Matrix& truth, std::size_t voltage_targets, double eps) {
        const ErrorMetric e = relative_error(pred, truth, voltage_targets, eps);
        py::dict d;
        d["voltage_mean"] = e.voltage_mean;
        d["power_mean"] = e.power_mean;
        d["excluded"] = e.excluded;
        d["per_target_mean"] = e.per_target_mean;
        d["errors"] = e.errors;
        return d;
      },
      py::arg("predicted"), py::arg("truth"), py::arg("voltage_targets"), py::arg("eps") = 1e-6);
}
