#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mlta/data.hpp"
#include "mlta/posthoc.hpp"
#include "mlta/quadrature.hpp"
#include "mlta/selection.hpp"
#include "mlta/serialize.hpp"
#include "mlta/simulate.hpp"
#include "mlta/variational.hpp"

namespace py = pybind11;
using namespace mlta;

namespace {

IncidenceMatrix wrap_cells(const Eigen::MatrixXi& cells) {
  IncidenceMatrix m;
  m.cells = cells;
  m.sender_labels = default_labels("T", static_cast<int>(cells.rows()));
  m.receiver_labels = default_labels("E", static_cast<int>(cells.cols()));
  m.validate();
  return m;
}

FitConfig make_config(int max_iter, double tol, std::uint64_t seed) {
  FitConfig cfg;
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "mixture of latent trait analyzers for bipartite networks";

  py::class_<ModelSpec>(mod, "ModelSpec")
      .def(py::init([](int g, int d, bool common) {
             ModelSpec s{g, d, common};
             s.validate();
             return s.normalized();
           }),
           py::arg("n_groups"), py::arg("latent_dim"),
           py::arg("common_slope") = false)
      .def_readonly("n_groups", &ModelSpec::n_groups)
      .def_readonly("latent_dim", &ModelSpec::latent_dim)
      .def_readonly("common_slope", &ModelSpec::common_slope)
      .def("__eq__", [](const ModelSpec& a, const ModelSpec& b) { return a == b; })
      .def("__repr__", [](const ModelSpec& s) {
        return "ModelSpec(n_groups=" + std::to_string(s.n_groups) +
               ", latent_dim=" + std::to_string(s.latent_dim) +
               ", common_slope=" + (s.common_slope ? std::string("True") : "False") +
               ")";
      });

  py::class_<Parameters>(mod, "Parameters")
      .def_readonly("eta", &Parameters::eta)
      .def_readonly("intercepts", &Parameters::intercepts)
      .def_readonly("slopes", &Parameters::slopes)
      .def_readonly("spec", &Parameters::spec);

  py::class_<FitResult>(mod, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("bound_trace", &FitResult::bound_trace)
      .def_readonly("n_iters", &FitResult::n_iters)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("degenerate", &FitResult::degenerate)
      .def_readonly("seed", &FitResult::seed)
      .def("final_bound", &FitResult::final_bound);

  py::class_<StartRecord>(mod, "StartRecord")
      .def_readonly("seed", &StartRecord::seed)
      .def_readonly("bound", &StartRecord::bound)
      .def_readonly("loglik", &StartRecord::loglik)
      .def_readonly("converged", &StartRecord::converged)
      .def_readonly("degenerate", &StartRecord::degenerate)
      .def_readonly("failed", &StartRecord::failed);

  py::class_<SelectionRecord>(mod, "SelectionRecord")
      .def_readonly("spec", &SelectionRecord::spec)
      .def_readonly("starts", &SelectionRecord::starts)
      .def_readonly("n_free_params", &SelectionRecord::n_free_params)
      .def_readonly("loglik", &SelectionRecord::loglik)
      .def_readonly("bic", &SelectionRecord::bic)
      .def_readonly("failed", &SelectionRecord::failed)
      .def_readonly("best_fit", &SelectionRecord::best_fit);

  py::class_<SelectionTable>(mod, "SelectionTable")
      .def_readonly("records", &SelectionTable::records)
      .def_readonly("winner", &SelectionTable::winner)
      .def("winning", &SelectionTable::winning,
           py::return_value_policy::reference_internal);

  mod.def(
      "fit",
      [](const Eigen::MatrixXi& cells, int n_groups, int latent_dim,
         bool common_slope, int max_iter, double tol, std::uint64_t seed) {
        return fit(wrap_cells(cells), ModelSpec{n_groups, latent_dim, common_slope},
                   make_config(max_iter, tol, seed));
      },
      py::arg("cells"), py::arg("n_groups"), py::arg("latent_dim") = 0,
      py::arg("common_slope") = false, py::arg("max_iter") = 1000,
      py::arg("tol") = 1e-6, py::arg("seed") = 1,
      py::call_guard<py::gil_scoped_release>(),
      "Variational EM fit of one model cell from a random start.");

  mod.def(
      "loglik",
      [](const Eigen::MatrixXi& cells, const Parameters& p, int gh_points) {
        return loglik_gh(wrap_cells(cells), p,
                         gh_rule(gh_points, p.spec.latent_dim));
      },
      py::arg("cells"), py::arg("params"), py::arg("gh_points") = 21,
      "Gauss-Hermite marginal log-likelihood.");

  mod.def(
      "select",
      [](const Eigen::MatrixXi& cells, int g_min, int g_max, int d_min, int d_max,
         bool unconstrained, bool common, int n_starts, std::uint64_t base_seed,
         int gh_points, int max_iter, double tol, int n_threads) {
        GridSpec grid;
        grid.g_min = g_min;
        grid.g_max = g_max;
        grid.d_min = d_min;
        grid.d_max = d_max;
        grid.unconstrained = unconstrained;
        grid.common = common;
        grid.n_starts = n_starts;
        grid.base_seed = base_seed;
        grid.gh_points = gh_points;
        grid.fit = make_config(max_iter, tol, base_seed);
        grid.n_threads = n_threads;
        return run_grid(wrap_cells(cells), grid);
      },
      py::arg("cells"), py::arg("g_min") = 1, py::arg("g_max") = 4,
      py::arg("d_min") = 0, py::arg("d_max") = 3, py::arg("unconstrained") = true,
      py::arg("common") = true, py::arg("n_starts") = 10,
      py::arg("base_seed") = 1, py::arg("gh_points") = 21,
      py::arg("max_iter") = 1000, py::arg("tol") = 1e-6, py::arg("n_threads") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Multi-start BIC sweep over a (G, D, slope-variant) grid.");

  mod.def(
      "simulate",
      [](const Eigen::VectorXd& eta, const Eigen::MatrixXd& intercepts,
         std::vector<Eigen::MatrixXd> slopes, bool common_slope, int n_senders,
         std::uint64_t seed) {
        const int G = static_cast<int>(eta.size());
        if (slopes.empty())  // latent-class sample: D = 0
          slopes.assign(G, Eigen::MatrixXd(intercepts.cols(), 0));
        Parameters p;
        p.eta = eta;
        p.intercepts = intercepts;
        p.spec = ModelSpec{G, static_cast<int>(slopes[0].cols()), common_slope}
                     .normalized();
        p.slopes = std::move(slopes);
        const SyntheticSample s = sample_network(p, n_senders, seed);
        return py::make_tuple(s.matrix.cells, s.true_groups, s.true_thetas);
      },
      py::arg("eta"), py::arg("intercepts"),
      py::arg("slopes") = std::vector<Eigen::MatrixXd>{},
      py::arg("common_slope") = false, py::arg("n_senders") = 100,
      py::arg("seed") = 1,
      "Sample (cells, groups, thetas) from known parameters.");

  mod.def(
      "memberships",
      [](const FitResult& fr) {
        const MembershipReport rep = memberships(fr);
        return py::make_tuple(rep.posterior, rep.map_group, rep.map_confidence);
      },
      py::arg("fit"), "Posterior matrix, MAP labels (0-based) and confidence.");

  mod.def("dependence_matrix", &dependence_matrix, py::arg("fit"), py::arg("g"),
          "Slope inner products w_r . w_k for one group.");

  mod.def(
      "log_lift_matrix",
      [](const FitResult& fr, int g, int gh_points) {
        return log_lift_matrix(fr, g, gh_rule(gh_points, fr.params.spec.latent_dim));
      },
      py::arg("fit"), py::arg("g"), py::arg("gh_points") = 21,
      "Pairwise log-lift between events within one group.");

  mod.def("median_actor_prob", &median_actor_prob, py::arg("fit"),
          "logistic(intercepts): attendance probabilities of the median actor.");

  mod.def(
      "jackknife_se",
      [](const Eigen::MatrixXi& cells, const FitResult& ref, bool eta,
         bool intercepts, bool slopes, int max_iter, double tol, int n_threads) {
        JackknifeTargets targets;
        targets.eta = eta;
        targets.intercepts = intercepts;
        targets.slopes = slopes;
        JackknifeConfig cfg;
        cfg.fit = make_config(max_iter, tol, ref.seed);
        cfg.n_threads = n_threads;
        const JackknifeReport rep =
            jackknife_se(wrap_cells(cells), ref.params.spec, ref, targets, cfg);
        py::list entries;
        for (const JackknifeSE& e : rep.entries)
          entries.append(py::make_tuple(e.target, e.estimate, e.se, e.n_replicates));
        return py::make_tuple(entries, rep.n_skipped, rep.unreliable);
      },
      py::arg("cells"), py::arg("fit"), py::arg("eta") = true,
      py::arg("intercepts") = false, py::arg("slopes") = false,
      py::arg("max_iter") = 1000, py::arg("tol") = 1e-6, py::arg("n_threads") = 0,
      "Leave-one-sender-out standard errors for the requested targets.");

  mod.def(
      "load_matrix",
      [](const std::string& path) {
        const IncidenceMatrix m = load_matrix(path);
        return py::make_tuple(m.cells, m.sender_labels, m.receiver_labels);
      },
      py::arg("path"), "Read an incidence CSV: (cells, sender, receiver labels).");

  mod.def(
      "params_to_json",
      [](const Parameters& p) { return params_to_json(p).dump(2); },
      py::arg("params"));

  mod.def(
      "params_from_json",
      [](const std::string& text) {
        return params_from_json(nlohmann::json::parse(text));
      },
      py::arg("text"));
}
