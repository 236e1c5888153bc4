#include "mlta/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace mlta {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

namespace {

// non-finite values become NA so every CSV stays machine-readable
std::string csv_num(double v) {
  return std::isfinite(v) ? format_double(v) : std::string("NA");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd json_to_matrix(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = 0;
  if (rows > 0) {
    if (!j[0].is_array()) throw std::invalid_argument("expected a nested array");
    cols = static_cast<Eigen::Index>(j[0].size());
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw std::invalid_argument("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd json_to_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

json spec_to_json(const ModelSpec& s) {
  json j;
  j["n_groups"] = s.n_groups;
  j["latent_dim"] = s.latent_dim;
  j["common_slope"] = s.common_slope;
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.n_groups = j.at("n_groups").get<int>();
  s.latent_dim = j.at("latent_dim").get<int>();
  s.common_slope = j.at("common_slope").get<bool>();
  return s;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

json params_to_json(const Parameters& p) {
  json j;
  j["eta"] = vector_to_json(p.eta);
  j["intercepts"] = matrix_to_json(p.intercepts);
  json slopes = json::array();
  for (const auto& w : p.slopes) slopes.push_back(matrix_to_json(w));
  j["slopes"] = std::move(slopes);
  j["spec"] = spec_to_json(p.spec);
  return j;
}

Parameters params_from_json(const nlohmann::json& j) {
  Parameters p;
  p.spec = spec_from_json(j.at("spec"));
  p.eta = json_to_vector(j.at("eta"));
  p.intercepts = json_to_matrix(j.at("intercepts"));
  p.slopes.clear();
  for (const auto& w : j.at("slopes")) {
    Eigen::MatrixXd m = json_to_matrix(w);
    // a D=0 slope matrix may serialize as R empty rows or as []
    if (m.cols() == 0) m.resize(p.intercepts.cols(), 0);
    p.slopes.push_back(std::move(m));
  }
  p.validate();
  return p;
}

json fit_to_json(const FitResult& fr) {
  json j;
  j["params"] = params_to_json(fr.params);
  j["seed"] = fr.seed;
  j["converged"] = fr.converged;
  j["n_iters"] = fr.n_iters;
  j["degenerate"] = fr.degenerate;
  j["ridge_retries"] = fr.ridge_retries;
  j["final_bound"] = fr.final_bound();
  j["bound_trace"] = fr.bound_trace;

  json state;
  state["total_bound"] = fr.state.total_bound;
  state["resp"] = matrix_to_json(fr.state.resp);
  state["node_bounds"] = matrix_to_json(fr.state.node_bounds);
  json xi = json::array(), mean = json::array(), cov = json::array();
  for (std::size_t g = 0; g < fr.state.xi.size(); ++g) {
    xi.push_back(matrix_to_json(fr.state.xi[g]));
    mean.push_back(matrix_to_json(fr.state.post_mean[g]));
    json per_sender = json::array();
    for (const auto& c : fr.state.post_cov[g]) per_sender.push_back(matrix_to_json(c));
    cov.push_back(std::move(per_sender));
  }
  state["xi"] = std::move(xi);
  state["post_mean"] = std::move(mean);
  state["post_cov"] = std::move(cov);
  j["state"] = std::move(state);
  return j;
}

FitResult fit_from_json(const nlohmann::json& j) {
  FitResult fr;
  fr.params = params_from_json(j.at("params"));
  fr.seed = j.at("seed").get<std::uint64_t>();
  fr.converged = j.at("converged").get<bool>();
  fr.n_iters = j.at("n_iters").get<int>();
  fr.degenerate = j.at("degenerate").get<bool>();
  fr.ridge_retries = j.at("ridge_retries").get<int>();
  fr.bound_trace = j.at("bound_trace").get<std::vector<double>>();

  const auto& st = j.at("state");
  fr.state.total_bound = st.at("total_bound").get<double>();
  fr.state.resp = json_to_matrix(st.at("resp"));
  fr.state.node_bounds = json_to_matrix(st.at("node_bounds"));
  const int D = fr.params.latent_dim();
  const auto N = fr.state.resp.rows();
  for (const auto& x : st.at("xi")) fr.state.xi.push_back(json_to_matrix(x));
  for (const auto& m : st.at("post_mean")) {
    Eigen::MatrixXd mm = json_to_matrix(m);
    if (mm.cols() == 0) mm.resize(N, 0);
    fr.state.post_mean.push_back(std::move(mm));
  }
  for (const auto& per_sender : st.at("post_cov")) {
    std::vector<Eigen::MatrixXd> covs;
    for (const auto& c : per_sender) {
      Eigen::MatrixXd cm = json_to_matrix(c);
      if (cm.rows() != D || cm.cols() != D)
        throw std::invalid_argument("posterior covariance shape mismatch");
      covs.push_back(std::move(cm));
    }
    fr.state.post_cov.push_back(std::move(covs));
  }
  return fr;
}

json selection_to_json(const SelectionTable& t) {
  json j;
  j["n_senders"] = t.n_senders;
  j["winner"] = t.winner;
  json records = json::array();
  for (const auto& rec : t.records) {
    json r;
    r["spec"] = spec_to_json(rec.spec);
    r["k"] = rec.n_free_params;
    r["loglik_gh"] = rec.loglik;
    r["bic"] = rec.bic;
    r["failed"] = rec.failed;
    r["best_start"] = rec.best_start;
    json starts = json::array();
    for (const auto& s : rec.starts) {
      json sj;
      sj["seed"] = s.seed;
      sj["bound"] = s.bound;
      sj["loglik_gh"] = s.loglik;
      sj["bic"] = s.failed || t.n_senders <= 0
                      ? std::numeric_limits<double>::quiet_NaN()
                      : bic(s.loglik, rec.n_free_params, t.n_senders);
      sj["converged"] = s.converged;
      sj["degenerate"] = s.degenerate;
      sj["failed"] = s.failed;
      sj["n_iters"] = s.n_iters;
      starts.push_back(std::move(sj));
    }
    r["starts"] = std::move(starts);
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  return j;
}

json sample_truth_to_json(const SyntheticSample& s) {
  json j;
  json groups = json::array();
  for (int g : s.true_groups) groups.push_back(g + 1);
  j["groups"] = std::move(groups);
  j["thetas"] = matrix_to_json(s.true_thetas);
  j["params"] = params_to_json(s.params);
  j["seed"] = s.seed;
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_bound_trace_csv(const std::vector<double>& trace,
                           const std::string& path) {
  auto out = open_out(path);
  out << "iter,bound\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i + 1 << ',' << csv_num(trace[i]) << '\n';
}

void write_memberships_csv(const MembershipReport& rep,
                           const std::vector<std::string>& sender_labels,
                           const std::string& path) {
  const auto N = rep.posterior.rows();
  const auto G = rep.posterior.cols();
  if (static_cast<Eigen::Index>(sender_labels.size()) != N)
    throw std::invalid_argument("sender label count mismatch");
  auto out = open_out(path);
  out << "sender,group,confidence";
  for (Eigen::Index g = 1; g <= G; ++g) out << ",prob_" << g;
  out << '\n';
  for (Eigen::Index n = 0; n < N; ++n) {
    out << sender_labels[n] << ',' << rep.map_group[n] + 1 << ','
        << csv_num(rep.map_confidence[n]);
    for (Eigen::Index g = 0; g < G; ++g) out << ',' << csv_num(rep.posterior(n, g));
    out << '\n';
  }
}

void write_traits_csv(const TraitScores& t,
                      const std::vector<std::string>& sender_labels,
                      const std::string& path) {
  const auto G = t.mean.size();
  auto out = open_out(path);
  out << "sender,group,dim,mean,sd\n";
  for (std::size_t g = 0; g < G; ++g) {
    const auto N = t.mean[g].rows();
    const auto D = t.mean[g].cols();
    if (static_cast<Eigen::Index>(sender_labels.size()) != N)
      throw std::invalid_argument("sender label count mismatch");
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index d = 0; d < D; ++d)
        out << sender_labels[n] << ',' << g + 1 << ',' << d + 1 << ','
            << csv_num(t.mean[g](n, d)) << ','
            << csv_num(std::sqrt(t.cov[g][n](d, d))) << '\n';
  }
}

void write_selection_csv(const SelectionTable& t, const std::string& path) {
  // mirror the published layout: one row per G, a column per (D, variant)
  std::set<int> gs;
  std::set<std::pair<int, bool>> cols;  // (D, common?)
  std::map<std::pair<int, std::pair<int, bool>>, const SelectionRecord*> cell;
  for (const auto& rec : t.records) {
    gs.insert(rec.spec.n_groups);
    const auto col = std::make_pair(rec.spec.latent_dim, rec.spec.common_slope);
    cols.insert(col);
    cell[{rec.spec.n_groups, col}] = &rec;
  }
  auto out = open_out(path);
  out << "G";
  for (const auto& [d, common] : cols) {
    out << ",D" << d;
    if (common) out << "_common";
  }
  out << '\n';
  for (int g : gs) {
    out << g;
    for (const auto& col : cols) {
      out << ',';
      auto it = cell.find({g, col});
      if (it == cell.end()) continue;        // cell not in the grid
      if (it->second->failed) out << "NA";   // every start failed
      else out << csv_num(it->second->bic);
    }
    out << '\n';
  }
}

void write_dependence_csv(const FitResult& fit, const std::string& path) {
  const int G = fit.params.n_groups();
  const int R = fit.params.n_receivers();
  auto out = open_out(path);
  out << "r,k,g,value\n";
  for (int g = 0; g < G; ++g) {
    const Eigen::MatrixXd dep = dependence_matrix(fit, g);
    for (int r = 0; r < R; ++r)
      for (int k = r; k < R; ++k)
        out << r + 1 << ',' << k + 1 << ',' << g + 1 << ',' << csv_num(dep(r, k))
            << '\n';
  }
}

void write_loglift_csv(const FitResult& fit, const GHRule& rule,
                       const std::string& path) {
  const int G = fit.params.n_groups();
  const int R = fit.params.n_receivers();
  auto out = open_out(path);
  out << "r,k,g,value\n";
  for (int g = 0; g < G; ++g) {
    const Eigen::MatrixXd lift = log_lift_matrix(fit, g, rule);
    for (int r = 0; r < R; ++r)
      for (int k = r + 1; k < R; ++k)
        out << r + 1 << ',' << k + 1 << ',' << g + 1 << ','
            << csv_num(lift(r, k)) << '\n';
  }
}

void write_median_prob_csv(const FitResult& fit,
                           const std::vector<std::string>& receiver_labels,
                           const std::string& path) {
  const Eigen::MatrixXd probs = median_actor_prob(fit);
  if (static_cast<Eigen::Index>(receiver_labels.size()) != probs.cols())
    throw std::invalid_argument("receiver label count mismatch");
  auto out = open_out(path);
  out << "group";
  for (const auto& lab : receiver_labels) out << ',' << lab;
  out << '\n';
  for (Eigen::Index g = 0; g < probs.rows(); ++g) {
    out << g + 1;
    for (Eigen::Index r = 0; r < probs.cols(); ++r) out << ',' << csv_num(probs(g, r));
    out << '\n';
  }
}

void write_se_csv(const JackknifeReport& rep, const std::string& path) {
  auto out = open_out(path);
  out << "parameter,estimate,se,ci_low,ci_high\n";
  for (const auto& e : rep.entries)
    out << e.target << ',' << csv_num(e.estimate) << ',' << csv_num(e.se) << ','
        << csv_num(e.estimate - 1.96 * e.se) << ','
        << csv_num(e.estimate + 1.96 * e.se) << '\n';
}

}  // namespace mlta
