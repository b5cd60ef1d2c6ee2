// Python bindings: kernels, autocovariance operators, spectra, bounds, and the
// experiment runner. Reports cross the boundary as JSON text.

#include <complex>
#include <optional>
#include <string>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "kacov/bounds.hpp"
#include "kacov/config.hpp"
#include "kacov/error.hpp"
#include "kacov/experiment.hpp"
#include "kacov/operator.hpp"
#include "kacov/spectral.hpp"

namespace py = pybind11;
using namespace kacov;

namespace {

// Integer arrays are state indices; float arrays are coordinates (1-D: one
// scalar per point, 2-D: one row per point).
PointList to_points(const py::array& a) {
  PointList out;
  const char kind = a.dtype().kind();
  if (kind == 'i' || kind == 'u') {
    const auto v = py::array_t<long long, py::array::forcecast>::ensure(a);
    if (v.ndim() != 1) throw Error(ErrorCode::invalid_argument, "state arrays must be 1-D");
    for (py::ssize_t i = 0; i < v.shape(0); ++i) {
      if (v.at(i) < 0) throw Error(ErrorCode::invalid_argument, "negative state index");
      out.push_back(Point::state(static_cast<std::size_t>(v.at(i))));
    }
    return out;
  }
  const auto v = py::array_t<double, py::array::forcecast | py::array::c_style>::ensure(a);
  if (v.ndim() == 1) {
    for (py::ssize_t i = 0; i < v.shape(0); ++i) out.push_back(Point::at(v.at(i)));
  } else if (v.ndim() == 2) {
    for (py::ssize_t i = 0; i < v.shape(0); ++i) {
      std::vector<double> row(v.data(i, 0), v.data(i, 0) + v.shape(1));
      out.push_back(Point::at(std::move(row)));
    }
  } else {
    throw Error(ErrorCode::invalid_argument, "coordinate arrays must be 1-D or 2-D");
  }
  return out;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_kacov, m) {
  m.doc() = "Kernel autocovariance operator estimators";
  py::register_exception<Error>(m, "KacovError", PyExc_ValueError);

  py::class_<KernelSpec>(m, "Kernel")
      .def_static("gaussian", &KernelSpec::gaussian, py::arg("sigma"))
      .def_static("linear", &KernelSpec::linear, py::arg("radius") = py::none())
      .def_static("table", &KernelSpec::table, py::arg("gram"))
      .def_property_readonly("name", &KernelSpec::name)
      .def("bound", [](const KernelSpec& k) { return kernel_bound(k); })
      .def("gram", [](const KernelSpec& k, const py::array& x, const py::array& y) {
        return gram(k, to_points(x), to_points(y));
      }, py::arg("x"), py::arg("y"))
      .def("__repr__", [](const KernelSpec& k) { return "Kernel(" + k.name() + ")"; });

  py::class_<OperatorExpansion>(m, "Operator")
      .def_property_readonly("coeffs", &OperatorExpansion::coeffs)
      .def("hs_norm", [](const OperatorExpansion& a) { return hs_norm(a); })
      .def("op_norm", [](const OperatorExpansion& a) { return op_norm(a); })
      .def("hs_inner", [](const OperatorExpansion& a, const OperatorExpansion& b) { return hs_inner(a, b); })
      .def("adjoint", [](const OperatorExpansion& a) { return adjoint(a); })
      .def("__sub__", [](const OperatorExpansion& a, const OperatorExpansion& b) {
        return combine({{1.0, a}, {-1.0, b}});
      })
      .def("__add__", [](const OperatorExpansion& a, const OperatorExpansion& b) {
        return combine({{1.0, a}, {1.0, b}});
      })
      .def("__mul__", [](const OperatorExpansion& a, double s) { return combine({{s, a}}); })
      .def("__rmul__", [](const OperatorExpansion& a, double s) { return combine({{s, a}}); })
      .def("to_json", [](const OperatorExpansion& a) { return json_to_py(to_json(a)); });

  m.def("empirical_autocov", [](const KernelSpec& k, const py::array& pts, std::size_t eta, bool centered) {
    return empirical_autocov(k, to_points(pts), eta, centered);
  }, py::arg("kernel"), py::arg("points"), py::arg("eta"), py::arg("centered") = false);

  m.def("exact_autocov", [](const KernelSpec& k, const Eigen::MatrixXd& p, std::size_t eta, bool centered,
                            std::optional<py::array> states) {
    const auto model = MarkovChainModel::create(p, states ? to_points(*states) : PointList{});
    return exact_autocov_markov(k, model, eta, centered);
  }, py::arg("kernel"), py::arg("transition"), py::arg("eta"), py::arg("centered") = false,
     py::arg("states") = py::none());

  m.def("stationary_distribution", &stationary_distribution, py::arg("transition"));

  m.def("simulate_markov", [](const Eigen::MatrixXd& p, std::size_t n, std::size_t eta, std::uint64_t seed) {
    const auto model = MarkovChainModel::create(p);
    const auto idx = simulate_markov_indices(model, n + eta, seed);
    py::array_t<long long> out(static_cast<py::ssize_t>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.mutable_at(static_cast<py::ssize_t>(i)) = static_cast<long long>(idx[i]);
    return out;
  }, py::arg("transition"), py::arg("n"), py::arg("eta"), py::arg("seed"),
     "State indices of a stationary chain; n + eta points.");

  m.def("gamma_spectrum", [](const KernelSpec& k, const py::array& pts, std::size_t eta) {
    return gamma_spectrum(k, to_points(pts), eta);
  }, py::arg("kernel"), py::arg("points"), py::arg("eta"));

  m.def("kpca", [](const KernelSpec& k, const py::array& pts, bool centered, std::size_t r) {
    return kpca(k, to_points(pts), centered, r).eigenvalues;
  }, py::arg("kernel"), py::arg("points"), py::arg("centered"), py::arg("r"),
     "Top-r eigenvalues of the empirical covariance operator.");

  m.def("kedmd", [](const KernelSpec& k, const py::array& pts, std::size_t eta, double gamma) {
    return kedmd(k, to_points(pts), eta, gamma).eigenvalues;
  }, py::arg("kernel"), py::arg("points"), py::arg("eta"), py::arg("gamma"),
     "Koopman eigenvalues, sorted by modulus.");

  m.def("bosq_bound", [](double epsilon, std::size_t n, std::size_t nu, std::size_t q, double delta, double c,
                         double lambda_tail, double alpha) {
    return bosq_bound(BoundInputs{epsilon, n, nu, q, delta, c, lambda_tail}, MixingEnvelope::constant(alpha));
  }, py::arg("epsilon"), py::arg("n"), py::arg("nu") = 1, py::arg("q") = 1, py::arg("delta") = 0.5,
     py::arg("c") = 1.0, py::arg("lambda_tail") = 0.0, py::arg("alpha") = 0.0,
     "Concentration bound with a constant mixing envelope alpha.");
  m.def("lil_norm_bound", &lil_norm_bound, py::arg("c"), py::arg("m"));
  m.def("rate_fit", [](const std::vector<std::pair<double, double>>& pts) {
    const RateFit f = rate_fit(pts);
    return py::make_tuple(f.slope, f.intercept, f.r2);
  }, py::arg("points"), "OLS of log error on log n: (slope, intercept, r2).");

  m.def("run_experiment", [](const std::string& config, std::optional<std::uint64_t> seed,
                             std::optional<std::string> out) {
    ExperimentConfig cfg = load_config(config);
    if (seed) cfg.base_seed = *seed;
    ExperimentReport rep;
    {
      py::gil_scoped_release release;
      rep = run(cfg);
      if (out) write_report(rep, *out);
    }
    return json_to_py(rep.to_json());
  }, py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
     "Run the experiment described by a TOML config; returns the report as a dict.");
}
