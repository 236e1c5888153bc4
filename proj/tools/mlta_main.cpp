// mlta: fit, select, report and simulate for latent trait mixture models on
// bipartite networks. Every run writes a manifest.json with the resolved
// configuration; re-running a manifest reproduces all artifacts byte for byte.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mlta/data.hpp"
#include "mlta/posthoc.hpp"
#include "mlta/selection.hpp"
#include "mlta/serialize.hpp"
#include "mlta/simulate.hpp"
#include "mlta/variational.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNoConverge = 2;
constexpr int kExitGridFailed = 3;

struct RunConfig {
  std::string command;
  std::string data_path;
  std::string output_dir = ".";
  std::string fit_path;     // report
  std::string params_path;  // simulate
  std::string groups = "1";
  std::string dims = "0";
  std::string common_slope;  // only | never | both
  int starts = 10;
  std::uint64_t seed = 1;
  double tol = 1e-6;
  int max_iter = 1000;
  int gh_points = 21;
  bool jackknife = false;
  int threads = 0;
  int n_senders = 100;  // simulate
  std::string config_path;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

IntRange parse_range(const std::string& text, const char* what) {
  IntRange r;
  const auto sep = text.find_first_of("-:");
  try {
    if (sep == std::string::npos) {
      r.lo = r.hi = std::stoi(text);
    } else {
      r.lo = std::stoi(text.substr(0, sep));
      r.hi = std::stoi(text.substr(sep + 1));
    }
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string(what) + ": cannot parse range '" +
                                text + "' (use N or LO-HI)");
  }
  if (r.hi < r.lo)
    throw std::invalid_argument(std::string(what) + ": empty range '" + text + "'");
  return r;
}

// Fill any option the user did not pass from a JSON config file; explicit
// flags always win.
template <typename T>
void take(const nlohmann::json& j, const char* key, const CLI::App& app,
          const std::string& flag, T& dst) {
  const CLI::Option* opt = app.get_option_no_throw(flag);
  if (j.contains(key) && (!opt || opt->count() == 0)) dst = j.at(key).get<T>();
}

void merge_config(RunConfig& rc, const CLI::App& app) {
  if (rc.config_path.empty()) return;
  const nlohmann::json j = mlta::read_json_file(rc.config_path);
  if (j.contains("command") && j.at("command").get<std::string>() != rc.command)
    throw std::invalid_argument("config file was written for command '" +
                                j.at("command").get<std::string>() + "'");
  take(j, "data", app, "--data", rc.data_path);
  take(j, "output_dir", app, "--out", rc.output_dir);
  take(j, "fit", app, "--fit", rc.fit_path);
  take(j, "params", app, "--params", rc.params_path);
  take(j, "groups", app, "--groups", rc.groups);
  take(j, "dims", app, "--dims", rc.dims);
  take(j, "common_slope", app, "--common-slope", rc.common_slope);
  take(j, "starts", app, "--starts", rc.starts);
  take(j, "seed", app, "--seed", rc.seed);
  take(j, "tol", app, "--tol", rc.tol);
  take(j, "max_iter", app, "--max-iter", rc.max_iter);
  take(j, "gh_points", app, "--gh-points", rc.gh_points);
  take(j, "jackknife", app, "--jackknife", rc.jackknife);
  take(j, "threads", app, "--threads", rc.threads);
  take(j, "n", app, "--n", rc.n_senders);
}

mlta::json manifest_json(const RunConfig& rc) {
  mlta::json j;
  j["command"] = rc.command;
  if (rc.command == "fit" || rc.command == "select") {
    j["data"] = rc.data_path;
    j["groups"] = rc.groups;
    j["dims"] = rc.dims;
    j["common_slope"] = rc.common_slope;
    j["starts"] = rc.starts;
    j["seed"] = rc.seed;
    j["tol"] = rc.tol;
    j["max_iter"] = rc.max_iter;
    j["gh_points"] = rc.gh_points;
  } else if (rc.command == "report") {
    j["fit"] = rc.fit_path;
    if (!rc.data_path.empty()) j["data"] = rc.data_path;
    j["jackknife"] = rc.jackknife;
    j["gh_points"] = rc.gh_points;
    j["tol"] = rc.tol;
    j["max_iter"] = rc.max_iter;
  } else if (rc.command == "simulate") {
    j["params"] = rc.params_path;
    j["n"] = rc.n_senders;
    j["seed"] = rc.seed;
  }
  j["threads"] = rc.threads;
  j["output_dir"] = rc.output_dir;
  return j;
}

std::string out_path(const RunConfig& rc, const std::string& name) {
  return (std::filesystem::path(rc.output_dir) / name).string();
}

void write_manifest(const RunConfig& rc) {
  std::filesystem::create_directories(rc.output_dir);
  mlta::write_json_file(manifest_json(rc), out_path(rc, "manifest.json"));
}

// fit.json plus the label block report needs to stay self-contained
void write_fit_artifacts(const RunConfig& rc, const mlta::IncidenceMatrix& m,
                         const mlta::FitResult& fr) {
  mlta::json j = mlta::fit_to_json(fr);
  j["labels"] = {{"senders", m.sender_labels}, {"receivers", m.receiver_labels}};
  mlta::write_json_file(j, out_path(rc, "fit.json"));
  mlta::write_bound_trace_csv(fr.bound_trace, out_path(rc, "bound_trace.csv"));
  mlta::write_memberships_csv(mlta::memberships(fr), m.sender_labels,
                              out_path(rc, "memberships.csv"));
  if (fr.params.latent_dim() >= 1)
    mlta::write_traits_csv(mlta::trait_scores(fr), m.sender_labels,
                           out_path(rc, "traits.csv"));
}

mlta::GridSpec grid_from(const RunConfig& rc, const IntRange& gr,
                         const IntRange& dr) {
  mlta::GridSpec grid;
  grid.g_min = gr.lo;
  grid.g_max = gr.hi;
  grid.d_min = dr.lo;
  grid.d_max = dr.hi;
  grid.unconstrained = rc.common_slope != "only";
  grid.common = rc.common_slope != "never";
  grid.n_starts = rc.starts;
  grid.base_seed = rc.seed;
  grid.gh_points = rc.gh_points;
  grid.n_threads = rc.threads;
  grid.fit.tol = rc.tol;
  grid.fit.max_iter = rc.max_iter;
  return grid;
}

int cmd_fit(RunConfig rc) {
  const IntRange gr = parse_range(rc.groups, "--groups");
  const IntRange dr = parse_range(rc.dims, "--dims");
  if (gr.lo != gr.hi || dr.lo != dr.hi)
    throw std::invalid_argument("fit needs a single --groups and --dims value");
  if (rc.common_slope.empty()) rc.common_slope = "never";
  if (rc.common_slope == "both" && dr.lo >= 1)
    throw std::invalid_argument(
        "fit needs --common-slope only|never (use select to compare variants)");

  const mlta::IncidenceMatrix m = mlta::load_matrix(rc.data_path);
  const mlta::ModelSpec spec =
      mlta::ModelSpec{gr.lo, dr.lo, rc.common_slope == "only"}.normalized();
  const mlta::GridSpec grid = grid_from(rc, gr, dr);
  const mlta::SelectionRecord rec = mlta::fit_cell(m, spec, grid);
  if (rec.failed) throw std::runtime_error("every start failed numerically");

  write_manifest(rc);
  write_fit_artifacts(rc, m, rec.best_fit);
  std::printf("fit G=%d D=%d variant=%s loglik=%s BIC=%s iters=%d%s\n",
              spec.n_groups, spec.latent_dim,
              spec.common_slope ? "common" : "unconstrained",
              mlta::format_double(rec.loglik).c_str(),
              mlta::format_double(rec.bic).c_str(), rec.best_fit.n_iters,
              rec.best_fit.converged ? "" : " (not converged)");
  return rec.best_fit.converged ? kExitOk : kExitNoConverge;
}

int cmd_select(RunConfig rc) {
  const IntRange gr = parse_range(rc.groups, "--groups");
  const IntRange dr = parse_range(rc.dims, "--dims");
  if (rc.common_slope.empty()) rc.common_slope = "both";

  const mlta::IncidenceMatrix m = mlta::load_matrix(rc.data_path);
  const mlta::GridSpec grid = grid_from(rc, gr, dr);
  const mlta::SelectionTable table = mlta::run_grid(m, grid);

  write_manifest(rc);
  mlta::write_selection_csv(table, out_path(rc, "selection.csv"));
  mlta::write_json_file(mlta::selection_to_json(table),
                        out_path(rc, "selection.json"));
  if (table.winner < 0) {
    std::fprintf(stderr, "mlta select: every grid cell failed\n");
    return kExitGridFailed;
  }
  const mlta::SelectionRecord& win = table.winning();
  write_fit_artifacts(rc, m, win.best_fit);
  std::printf("G=%d D=%d variant=%s BIC=%s\n", win.spec.n_groups,
              win.spec.latent_dim, win.spec.common_slope ? "common" : "unconstrained",
              mlta::format_double(win.bic).c_str());
  return win.best_fit.converged ? kExitOk : kExitNoConverge;
}

int cmd_report(RunConfig rc) {
  const nlohmann::json fj = mlta::read_json_file(rc.fit_path);
  const mlta::FitResult fr = mlta::fit_from_json(fj);
  std::vector<std::string> receiver_labels =
      mlta::default_labels("E", fr.params.n_receivers());
  if (fj.contains("labels"))
    receiver_labels =
        fj.at("labels").at("receivers").get<std::vector<std::string>>();

  write_manifest(rc);
  const mlta::GHRule rule = mlta::gh_rule(rc.gh_points, fr.params.latent_dim());
  if (fr.params.latent_dim() >= 1)
    mlta::write_dependence_csv(fr, out_path(rc, "dependence.csv"));
  mlta::write_loglift_csv(fr, rule, out_path(rc, "loglift.csv"));
  mlta::write_median_prob_csv(fr, receiver_labels, out_path(rc, "median_prob.csv"));

  if (rc.jackknife) {
    if (rc.data_path.empty())
      throw std::invalid_argument("--jackknife needs --data to refit replicates");
    const mlta::IncidenceMatrix m = mlta::load_matrix(rc.data_path);
    mlta::JackknifeConfig jc;
    jc.fit.tol = rc.tol;
    jc.fit.max_iter = rc.max_iter;
    jc.n_threads = rc.threads;
    mlta::JackknifeTargets targets;
    targets.eta = true;
    targets.intercepts = true;
    targets.slopes = fr.params.latent_dim() >= 1;
    const mlta::JackknifeReport rep =
        mlta::jackknife_se(m, fr.params.spec, fr, targets, jc);
    mlta::write_se_csv(rep, out_path(rc, "se.csv"));
    if (rep.unreliable)
      std::fprintf(stderr,
                   "mlta report: %d of %d jackknife replicates skipped; "
                   "standard errors unreliable\n",
                   rep.n_skipped, static_cast<int>(m.n_senders()));
  }
  return kExitOk;
}

int cmd_simulate(const RunConfig& rc) {
  const mlta::Parameters p =
      mlta::params_from_json(mlta::read_json_file(rc.params_path));
  const mlta::SyntheticSample s = mlta::sample_network(p, rc.n_senders, rc.seed);
  write_manifest(rc);
  mlta::write_matrix(s.matrix, out_path(rc, "network.csv"));
  mlta::write_json_file(mlta::sample_truth_to_json(s), out_path(rc, "truth.json"));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture of latent trait analyzers for bipartite networks"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_common = [&rc](CLI::App* sub) {
    sub->add_option("--out,-o", rc.output_dir, "Output directory");
    sub->add_option("--threads", rc.threads, "Worker threads (0 = all cores)");
    sub->add_option("--config", rc.config_path,
                    "JSON config file; explicit flags override its values");
  };
  auto add_fit_opts = [&rc](CLI::App* sub, bool range) {
    sub->add_option("--data", rc.data_path, "Incidence matrix CSV")->required(false);
    sub->add_option("--groups", rc.groups, range ? "Group range LO-HI" : "Number of groups");
    sub->add_option("--dims", rc.dims, range ? "Latent dimension range LO-HI" : "Latent dimensions");
    sub->add_option("--common-slope", rc.common_slope,
                    "Slope variant: only, never or both")
        ->check(CLI::IsMember({"only", "never", "both"}));
    sub->add_option("--starts", rc.starts, "Random starts per model");
    sub->add_option("--seed", rc.seed, "Base seed; start s uses seed+s");
    sub->add_option("--tol", rc.tol, "Bound convergence tolerance");
    sub->add_option("--max-iter", rc.max_iter, "Maximum EM iterations");
    sub->add_option("--gh-points", rc.gh_points, "Quadrature points per dimension");
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit one model");
  add_fit_opts(fit, false);
  add_common(fit);

  CLI::App* select = app.add_subcommand("select", "Fit a model grid and pick by BIC");
  add_fit_opts(select, true);
  add_common(select);

  CLI::App* report = app.add_subcommand("report", "Derived quantities from a fit");
  report->add_option("--fit", rc.fit_path, "fit.json produced by fit/select");
  report->add_option("--data", rc.data_path, "Incidence matrix CSV (for --jackknife)");
  report->add_flag("--jackknife", rc.jackknife, "Jackknife standard errors");
  report->add_option("--gh-points", rc.gh_points, "Quadrature points per dimension");
  report->add_option("--tol", rc.tol, "Replicate convergence tolerance");
  report->add_option("--max-iter", rc.max_iter, "Replicate iteration cap");
  add_common(report);

  CLI::App* simulate = app.add_subcommand("simulate", "Sample a synthetic network");
  simulate->add_option("--params", rc.params_path, "Parameters JSON");
  simulate->add_option("--n", rc.n_senders, "Number of senders");
  simulate->add_option("--seed", rc.seed, "Sampling seed");
  add_common(simulate);

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  rc.command = sub->get_name();
  try {
    merge_config(rc, *sub);
    if ((rc.command == "fit" || rc.command == "select") && rc.data_path.empty())
      throw std::invalid_argument("--data is required");
    if (rc.command == "report" && rc.fit_path.empty())
      throw std::invalid_argument("--fit is required");
    if (rc.command == "simulate" && rc.params_path.empty())
      throw std::invalid_argument("--params is required");

    if (rc.command == "fit") return cmd_fit(std::move(rc));
    if (rc.command == "select") return cmd_select(std::move(rc));
    if (rc.command == "report") return cmd_report(std::move(rc));
    return cmd_simulate(rc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mlta %s: %s\n", rc.command.c_str(), e.what());
    return kExitInput;
  }
}
