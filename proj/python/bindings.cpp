#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "commands.hpp"
#include "minmove/attractor_lab.hpp"
#include "minmove/banach.hpp"
#include "minmove/mm_engine.hpp"
#include "minmove/wasserstein1d.hpp"

namespace py = pybind11;
using namespace minmove;

namespace {

std::shared_ptr<MetricBackend> make_banach(const std::string& kind, std::size_t dimension, double lambda,
                                           double exponent, std::optional<State> center, double h,
                                           double q_norm, double p, bool finsler) {
  PNormSpace sp = PNormSpace::euclidean(dimension, p);
  sp.q_norm = q_norm;
  sp.finsler = finsler;
  BanachFunctional f;
  if (kind == "quadratic") f = BanachFunctional::quadratic(dimension, lambda, center.value_or(State()));
  else if (kind == "power") f = BanachFunctional::power(dimension, lambda, exponent, center.value_or(State()));
  else if (kind == "double-well") f = BanachFunctional::double_well(dimension, h);
  else if (kind == "allen-cahn-1d") {
    f = BanachFunctional::allen_cahn(dimension);
    sp.cell_volume = f.h;
  } else throw InputError("unknown functional kind '" + kind + "'");
  return std::make_shared<BanachBackend>(sp, f);
}

w1d::EnergySpec energy_spec(double c1, double c2, double strength, double center, const std::string& internal) {
  w1d::EnergySpec s;
  s.c1 = c1;
  s.c2 = c2;
  s.V.strength = strength;
  s.V.center = center;
  if (internal == "entropy") s.F.kind = w1d::InternalEnergy::Kind::entropy;
  else if (internal == "none") s.F.kind = w1d::InternalEnergy::Kind::none;
  else throw InputError("internal must be 'entropy' or 'none'");
  s.validate();
  return s;
}

Eigen::MatrixXd stack(const std::vector<State>& states) {
  if (states.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(states.size()), states.front().size());
  for (std::size_t k = 0; k < states.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = states[k].transpose();
  return m;
}

}  // namespace

PYBIND11_MODULE(_minmove, m) {
  m.doc() = "Minimizing Movements for gradient flows in metric spaces";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<MetricBackend, std::shared_ptr<MetricBackend>>(m, "Backend")
      .def("describe", &MetricBackend::describe)
      .def_property_readonly("dimension", &MetricBackend::dimension)
      .def("distance", &MetricBackend::distance)
      .def("energy", &MetricBackend::energy)
      .def("slope", &MetricBackend::slope)
      .def("__repr__", [](const MetricBackend& b) { return "<Backend " + b.describe() + ">"; });

  m.def("banach_backend", &make_banach, py::arg("kind"), py::arg("dimension"), py::arg("lam") = 1.0,
        py::arg("exponent") = 2.0, py::arg("center") = py::none(), py::arg("h") = 1.0, py::arg("q_norm") = 2.0,
        py::arg("p") = 2.0, py::arg("finsler") = false);

  m.def(
      "wasserstein_backend",
      [](std::size_t grid, double c1, double c2, double strength, double center, const std::string& internal,
         double p) -> std::shared_ptr<MetricBackend> {
        return std::make_shared<w1d::Wasserstein1DBackend>(energy_spec(c1, c2, strength, center, internal), grid, p);
      },
      py::arg("grid") = 256, py::arg("c1") = 1.0, py::arg("c2") = 1.0, py::arg("strength") = 1.0,
      py::arg("center") = 0.0, py::arg("internal") = "entropy", py::arg("p") = 2.0);

  m.def(
      "mm_step",
      [](const MetricBackend& b, const State& prev, double tau, double p, double tol) {
        return mm_step(b, prev, tau, p, {tol, 500, 0});
      },
      py::arg("backend"), py::arg("prev"), py::arg("tau"), py::arg("p") = 2.0, py::arg("tolerance") = 1e-10);

  m.def(
      "run",
      [](const MetricBackend& b, const State& u0, double p, double tau, double horizon, int quadrature_points,
         double prox_tolerance, std::uint64_t seed) {
        MMConfig cfg = MMConfig::uniform(p, tau, horizon, prox_tolerance);
        cfg.quadrature_points = quadrature_points;
        cfg.seed = seed;
        MMRun run;
        {
          py::gil_scoped_release release;
          run = run_mm(b, u0, cfg);
        }
        const Trajectory t = run.trajectory(b);
        py::dict out;
        out["times"] = t.times;
        out["states"] = stack(run.states);
        out["energies"] = t.energies;
        out["slopes"] = t.slopes;
        out["speeds"] = t.speeds;
        out["edi_residuals"] = t.edi_residuals;
        return out;
      },
      py::arg("backend"), py::arg("u0"), py::arg("p") = 2.0, py::arg("tau") = 0.1, py::arg("horizon") = 1.0,
      py::arg("quadrature_points") = 0, py::arg("prox_tolerance") = 1e-10, py::arg("seed") = 0);

  m.def("normal_quantile", &w1d::normal_quantile, py::arg("theta"));
  m.def(
      "gaussian_quantiles",
      [](std::size_t n, double mean, double sd) { return w1d::QuantileMeasure::gaussian(n, mean, sd).q; },
      py::arg("n"), py::arg("mean") = 0.0, py::arg("sd") = 1.0);
  m.def(
      "gibbs_quantiles",
      [](std::size_t n, double c1, double c2, double strength, double center) {
        return w1d::gibbs_stationary(energy_spec(c1, c2, strength, center, "entropy"), n).q;
      },
      py::arg("n"), py::arg("c1") = 1.0, py::arg("c2") = 1.0, py::arg("strength") = 1.0, py::arg("center") = 0.0);
  m.def(
      "wp_distance", [](const Eigen::VectorXd& a, const Eigen::VectorXd& b, double p) { return w1d::wp_distance(a, b, p); },
      py::arg("a"), py::arg("b"), py::arg("p") = 2.0);

  m.def(
      "run_scenario",
      [](const std::string& text, const std::string& command, int threads, std::optional<std::uint64_t> seed) {
        cli::Overrides ov;
        ov.seed = seed;
        const cli::Scenario sc = cli::parse_scenario(text, ov);
        cli::CommandResult r;
        {
          py::gil_scoped_release release;
          r = cli::execute(command.empty() ? sc.experiment : command, sc, {threads, true});
        }
        py::dict files;
        for (const auto& [name, body] : r.files) files[py::str(name)] = body;
        return py::make_tuple(r.exit_code, files);
      },
      py::arg("text"), py::arg("command") = "", py::arg("threads") = 1, py::arg("seed") = py::none(),
      "Runs a scenario given as JSON text. Returns (exit_code, {artifact name: contents}).");

  m.attr("SCHEMA_VERSION") = cli::kSchemaVersion;
}
