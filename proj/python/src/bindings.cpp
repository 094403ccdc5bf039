#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tailmoment/cli.hpp"
#include "tailmoment/errors.hpp"
#include "tailmoment/evt.hpp"
#include "tailmoment/lfd.hpp"
#include "tailmoment/moment_test.hpp"
#include "tailmoment/parallel.hpp"
#include "tailmoment/scores.hpp"
#include "tailmoment/sim_lab.hpp"

namespace py = pybind11;
using namespace tailmoment;

namespace {

SelfNormalizedTail as_tail(const std::vector<double>& a) { return SelfNormalizedTail(a); }

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

GridWeights grid(std::vector<double> points, std::vector<double> masses) {
  GridWeights g{std::move(points), std::move(masses)};
  g.validate();
  return g;
}

ModelData model_data(const std::string& model, const std::optional<Eigen::VectorXd>& y,
                     const std::optional<Eigen::MatrixXd>& x, const std::optional<Eigen::MatrixXd>& z,
                     const std::optional<Eigen::VectorXd>& scores) {
  ModelData d;
  d.tag = parse_model_tag(model);
  if (y) d.response = *y;
  if (x) d.design = *x;
  d.instruments = z;
  d.raw_scores = scores;
  return d;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_tailmoment, m) {
  m.doc() = "Fixed-k extreme value test of finite score moments";

  py::register_exception<DegenerateTail>(m, "DegenerateTail", PyExc_ArithmeticError);
  py::register_exception<NumericFailure>(m, "NumericFailure", PyExc_ArithmeticError);
  py::register_exception<SingularDesign>(m, "SingularDesign", PyExc_ValueError);
  py::register_exception<WeakInstrumentSingularity>(m, "WeakInstrumentSingularity", PyExc_ValueError);
  py::register_exception<UnverifiedTable>(m, "UnverifiedTable", PyExc_RuntimeError);
  py::register_exception<CalibrationFailed>(m, "CalibrationFailed", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IngestionError>(m, "IngestionError", PyExc_ValueError);

  m.def("set_max_threads", &set_max_threads, py::arg("n"));

  m.def("gev_cdf", &gev_cdf, py::arg("v"), py::arg("xi"));
  m.def("gev_logpdf", &gev_logpdf, py::arg("v"), py::arg("xi"));
  m.def("joint_ev_logdensity",
        [](const std::vector<double>& v, double xi) { return joint_ev_logdensity(v, xi); }, py::arg("v"),
        py::arg("xi"));
  m.def(
      "selfnorm_logdensity",
      [](const std::vector<double>& a, double xi, int nodes, int panels, double rel_tol) {
        QuadratureConfig q;
        q.nodes = nodes;
        q.panels = panels;
        q.rel_tol = rel_tol;
        return selfnorm_logdensity(as_tail(a), xi, q);
      },
      py::arg("a"), py::arg("xi"), py::arg("nodes") = 200, py::arg("panels") = 8, py::arg("rel_tol") = 1e-8);
  m.def(
      "selfnorm_logdensity_batch",
      [](const std::vector<double>& a, const std::vector<double>& xis) {
        return selfnorm_logdensity_batch(as_tail(a), xis);
      },
      py::arg("a"), py::arg("xis"));
  m.def(
      "sample_top_k",
      [](double xi, int k, std::uint64_t seed) {
        Rng rng(seed);
        return as_vector(sample_top_k(xi, k, rng).values());
      },
      py::arg("xi"), py::arg("k"), py::arg("seed"));
  m.def(
      "self_normalize",
      [](const std::vector<double>& v) { return as_vector(self_normalize(TopKVector(v)).values()); },
      py::arg("v"));

  py::class_<GridWeights>(m, "GridWeights")
      .def(py::init(&grid), py::arg("points"), py::arg("masses"))
      .def_readonly("points", &GridWeights::points)
      .def_readonly("masses", &GridWeights::masses)
      .def("total_mass", &GridWeights::total_mass);

  m.def(
      "lr_statistic",
      [](const std::vector<double>& a, const GridWeights& lambda, const GridWeights& w) {
        return lr_statistic(as_tail(a), lambda, w);
      },
      py::arg("a"), py::arg("lam"), py::arg("w"));

  py::class_<LfdTable>(m, "LfdTable")
      .def_readonly("k", &LfdTable::k)
      .def_readonly("alpha", &LfdTable::alpha)
      .def_readonly("epsilon", &LfdTable::epsilon)
      .def_readonly("xi_bar", &LfdTable::xi_bar)
      .def_readonly("null_grid", &LfdTable::null_grid)
      .def_readonly("alt_weight", &LfdTable::alt_weight)
      .def_property_readonly("verified", [](const LfdTable& t) { return t.meta.verified; })
      .def_property_readonly("id", &LfdTable::id)
      .def("to_dict", [](const LfdTable& t) { return json_to_py(to_json(t)); })
      .def("save", [](const LfdTable& t, const std::filesystem::path& p) { save_table(t, p); })
      .def_static("load", &load_table, py::arg("path"));

  m.def(
      "calibrate_lfd",
      [](int k, double alpha, double epsilon, double xi_bar, int grid_size, int n_draws, int iterations,
         double eta, std::uint64_t seed, int fine_grid_size, int draws_per_point) {
        CalibrationConfig c;
        c.k = k;
        c.alpha = alpha;
        c.epsilon = epsilon;
        c.xi_bar = xi_bar;
        c.grid_size = grid_size;
        c.n_draws = n_draws;
        c.iterations = iterations;
        c.eta = eta;
        c.seed = seed;
        c.fine_grid_size = fine_grid_size;
        c.draws_per_point = draws_per_point;
        py::gil_scoped_release release;
        return calibrate_lfd(c);
      },
      py::arg("k") = 50, py::arg("alpha") = 0.05, py::arg("epsilon") = 0.01, py::arg("xi_bar") = 2.0,
      py::arg("grid_size") = 50, py::arg("n_draws") = 10000, py::arg("iterations") = 500, py::arg("eta") = 1.0,
      py::arg("seed") = 1, py::arg("fine_grid_size") = 200, py::arg("draws_per_point") = 10000);

  m.def(
      "verify_size",
      [](const LfdTable& t, int fine_grid_size, int draws_per_point, std::uint64_t seed) {
        SizeReport r;
        {
          py::gil_scoped_release release;
          r = verify_size(t, fine_grid_size, draws_per_point, seed);
        }
        py::dict d;
        d["xi"] = r.xi;
        d["rejection"] = r.rejection;
        d["standard_error"] = r.standard_error;
        d["max_rejection"] = r.max_rejection;
        d["argmax_xi"] = r.argmax_xi;
        d["threshold"] = r.threshold;
        d["passed"] = r.passed;
        return d;
      },
      py::arg("table"), py::arg("fine_grid_size") = 200, py::arg("draws_per_point") = 10000, py::arg("seed") = 2);

  m.def(
      "decide",
      [](const std::vector<double>& a, const LfdTable& t, bool allow_unverified) {
        return decide(as_tail(a), t, allow_unverified);
      },
      py::arg("a"), py::arg("table"), py::arg("allow_unverified") = false);
  m.def(
      "p_value",
      [](const std::vector<double>& a, const std::vector<LfdTable>& bundle, bool allow_unverified) {
        return p_value(as_tail(a), bundle, allow_unverified);
      },
      py::arg("a"), py::arg("bundle"), py::arg("allow_unverified") = false);

  m.def(
      "score_norms",
      [](const std::string& model, std::optional<Eigen::VectorXd> y, std::optional<Eigen::MatrixXd> x,
         std::optional<Eigen::MatrixXd> z, std::optional<Eigen::VectorXd> scores, int r) {
        const ModelData d = model_data(model, y, x, z, scores);
        return score_norms(fit_model(d), d, ScoreConfig{r, 3});
      },
      py::arg("model"), py::arg("y") = py::none(), py::arg("x") = py::none(), py::arg("z") = py::none(),
      py::arg("scores") = py::none(), py::arg("r") = 1);

  m.def(
      "run_full_test",
      [](const std::string& model, std::optional<Eigen::VectorXd> y, std::optional<Eigen::MatrixXd> x,
         std::optional<Eigen::MatrixXd> z, std::optional<Eigen::VectorXd> scores, int r, int k,
         const std::vector<LfdTable>& bundle, double decision_alpha, bool allow_unverified) {
        const ModelData d = model_data(model, y, x, z, scores);
        return json_to_py(
            to_json(run_full_test(d, ScoreConfig{r, k}, bundle, TestOptions{decision_alpha, allow_unverified})));
      },
      py::arg("model"), py::arg("y") = py::none(), py::arg("x") = py::none(), py::arg("z") = py::none(),
      py::arg("scores") = py::none(), py::arg("r") = 1, py::arg("k") = 50, py::arg("bundle"),
      py::arg("decision_alpha") = 0.05, py::arg("allow_unverified") = false);

  m.def(
      "simulate_design",
      [](const std::string& family, std::size_t n, double xi_u, std::uint64_t seed, double noise_scale) {
        SimDesign s;
        s.family = parse_design_family(family);
        s.n = n;
        s.xi_u = xi_u;
        s.seed = seed;
        s.noise_scale = noise_scale;
        const ModelData d = simulate_design(s);
        py::dict out;
        out["model"] = std::string(to_string(d.tag));
        out["y"] = d.response;
        out["x"] = d.design;
        if (d.instruments) out["z"] = *d.instruments;
        return out;
      },
      py::arg("family"), py::arg("n"), py::arg("xi_u"), py::arg("seed") = 0, py::arg("noise_scale") = 1.0);

  m.def(
      "power_curve",
      [](int k, const std::vector<double>& xis, const LfdTable& t, int draws, std::uint64_t seed,
         bool allow_unverified) {
        std::vector<PowerPoint> c;
        {
          py::gil_scoped_release release;
          c = power_curve(k, xis, t, draws, seed, allow_unverified);
        }
        py::list out;
        for (const auto& p : c) out.append(py::make_tuple(p.xi, p.rejection, p.standard_error));
        return out;
      },
      py::arg("k"), py::arg("xis"), py::arg("table"), py::arg("draws_per_point") = 10000, py::arg("seed") = 1,
      py::arg("allow_unverified") = false);
}
