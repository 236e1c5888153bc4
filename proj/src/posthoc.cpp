#include "mlta/posthoc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mlta/parallel.hpp"

namespace mlta {

MembershipReport memberships(const FitResult& fit) {
  const Eigen::MatrixXd& resp = fit.state.resp;
  const int N = static_cast<int>(resp.rows());
  const int G = static_cast<int>(resp.cols());
  MembershipReport rep;
  rep.posterior = resp;
  rep.map_group.resize(N);
  rep.map_confidence.resize(N);
  for (int n = 0; n < N; ++n) {
    int best = 0;
    for (int g = 1; g < G; ++g)
      if (resp(n, g) > resp(n, best)) best = g;
    rep.map_group[n] = best;
    rep.map_confidence[n] = resp(n, best);
  }
  return rep;
}

TraitScores trait_scores(const FitResult& fit) {
  if (fit.params.latent_dim() < 1)
    throw std::invalid_argument("trait scores require latent_dim >= 1");
  TraitScores t;
  t.mean = fit.state.post_mean;
  t.cov = fit.state.post_cov;
  return t;
}

Eigen::MatrixXd dependence_matrix(const FitResult& fit, int g) {
  if (fit.params.latent_dim() < 1)
    throw std::invalid_argument("dependence requires latent_dim >= 1");
  if (g < 0 || g >= fit.params.n_groups())
    throw std::out_of_range("group index");
  const Eigen::MatrixXd& w = fit.params.slopes[g];
  return w * w.transpose();
}

namespace {

constexpr double kLogUnderflow = -690.0;  // ~ log(1e-300)

// log integrals log m_r = log sum_q w_q pi_r(theta_q) for every receiver,
// plus the per-node log pi matrix needed for the pairwise numerators.
struct LiftTables {
  Eigen::MatrixXd log_pi;     // Q x R
  Eigen::VectorXd log_margin; // R
};

LiftTables lift_tables(const Parameters& p, int g, const GHRule& rule) {
  const int R = p.n_receivers();
  const int Q = static_cast<int>(rule.n_points());
  LiftTables t;
  // x = b + w . theta at every node
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(Q, R);
  if (p.latent_dim() > 0) x = rule.points * p.slopes[g].transpose();
  x.rowwise() += p.intercepts.row(g);
  t.log_pi.resize(Q, R);
  for (int q = 0; q < Q; ++q)
    for (int r = 0; r < R; ++r) t.log_pi(q, r) = log_logistic(x(q, r));
  t.log_margin.resize(R);
  Eigen::VectorXd terms(Q);
  for (int r = 0; r < R; ++r) {
    terms = rule.log_weights + t.log_pi.col(r);
    t.log_margin[r] = log_sum_exp(terms);
  }
  return t;
}

double pair_log_lift(const LiftTables& t, const GHRule& rule, int r, int k) {
  const int Q = static_cast<int>(rule.n_points());
  Eigen::VectorXd terms(Q);
  for (int q = 0; q < Q; ++q)
    terms[q] = rule.log_weights[q] + (t.log_pi(q, r) + t.log_pi(q, k));
  const double log_num = log_sum_exp(terms);
  const double log_den = t.log_margin[r] + t.log_margin[k];
  if (log_num < kLogUnderflow || t.log_margin[r] < kLogUnderflow ||
      t.log_margin[k] < kLogUnderflow)
    return std::numeric_limits<double>::quiet_NaN();
  return log_num - log_den;
}

}  // namespace

double log_lift(const FitResult& fit, int g, int r, int k, const GHRule& rule) {
  const Parameters& p = fit.params;
  if (g < 0 || g >= p.n_groups()) throw std::out_of_range("group index");
  if (r < 0 || r >= p.n_receivers() || k < 0 || k >= p.n_receivers())
    throw std::out_of_range("receiver index");
  if (r == k) throw std::domain_error("log-lift needs two distinct receivers");
  if (p.latent_dim() == 0) return 0.0;  // receivers independent within group
  if (rule.dim != p.latent_dim())
    throw std::invalid_argument("quadrature rule dimension mismatch");
  const LiftTables t = lift_tables(p, g, rule);
  return pair_log_lift(t, rule, r, k);
}

Eigen::MatrixXd log_lift_matrix(const FitResult& fit, int g, const GHRule& rule) {
  const Parameters& p = fit.params;
  if (g < 0 || g >= p.n_groups()) throw std::out_of_range("group index");
  const int R = p.n_receivers();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(R, R);
  if (p.latent_dim() == 0) return out;
  if (rule.dim != p.latent_dim())
    throw std::invalid_argument("quadrature rule dimension mismatch");
  const LiftTables t = lift_tables(p, g, rule);
  for (int r = 0; r < R; ++r)
    for (int k = r + 1; k < R; ++k) {
      const double v = pair_log_lift(t, rule, r, k);
      out(r, k) = v;
      out(k, r) = v;
    }
  return out;
}

Eigen::MatrixXd median_actor_prob(const FitResult& fit) {
  const Parameters& p = fit.params;
  Eigen::MatrixXd out(p.n_groups(), p.n_receivers());
  for (int g = 0; g < p.n_groups(); ++g)
    for (int r = 0; r < p.n_receivers(); ++r)
      out(g, r) = logistic(p.intercepts(g, r));
  return out;
}

namespace {

IncidenceMatrix drop_sender(const IncidenceMatrix& m, int drop) {
  const int N = static_cast<int>(m.n_senders());
  IncidenceMatrix out;
  out.cells.resize(N - 1, m.cells.cols());
  out.sender_labels.reserve(N - 1);
  int row = 0;
  for (int n = 0; n < N; ++n) {
    if (n == drop) continue;
    out.cells.row(row++) = m.cells.row(n);
    out.sender_labels.push_back(m.sender_labels[n]);
  }
  out.receiver_labels = m.receiver_labels;
  return out;
}

// Permutation perm[g] = replicate group matching reference group g, chosen to
// maximize soft responsibility agreement on the retained senders.
std::vector<int> align_labels(const Eigen::MatrixXd& ref_resp,
                              const Eigen::MatrixXd& rep_resp, int dropped) {
  const int G = static_cast<int>(ref_resp.cols());
  std::vector<int> perm(G), best(G);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_score = -1.0;
  do {
    double score = 0.0;
    int row = 0;
    for (int n = 0; n < ref_resp.rows(); ++n) {
      if (n == dropped) continue;
      for (int g = 0; g < G; ++g) score += ref_resp(n, g) * rep_resp(row, perm[g]);
      ++row;
    }
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Parameters align_params(const Parameters& rep, const Parameters& ref,
                        const std::vector<int>& perm) {
  const int G = ref.n_groups();
  const int D = ref.latent_dim();
  Parameters out = rep;
  for (int g = 0; g < G; ++g) {
    out.eta[g] = rep.eta[perm[g]];
    out.intercepts.row(g) = rep.intercepts.row(perm[g]);
    out.slopes[g] = rep.slopes[perm[g]];
  }
  // undo any sign-convention flips relative to the reference
  if (D > 0) {
    const bool shared = ref.spec.normalized().common_slope;
    const int distinct = shared ? 1 : G;
    for (int gs = 0; gs < distinct; ++gs)
      for (int d = 0; d < D; ++d) {
        if (out.slopes[gs].col(d).dot(ref.slopes[gs].col(d)) >= 0.0) continue;
        const int hi = shared ? G : gs + 1;
        for (int g = (shared ? 0 : gs); g < hi; ++g)
          out.slopes[g].col(d) = -out.slopes[g].col(d);
      }
  }
  return out;
}

struct TargetList {
  std::vector<std::string> names;
  // flattens the selected parameters in a fixed order
  Eigen::VectorXd values(const Parameters& p) const;
  JackknifeTargets sel;
  int G = 0, R = 0, D = 0;
};

Eigen::VectorXd TargetList::values(const Parameters& p) const {
  std::vector<double> v;
  v.reserve(names.size());
  if (sel.eta)
    for (int g = 0; g < G; ++g) v.push_back(p.eta[g]);
  if (sel.intercepts)
    for (int g = 0; g < G; ++g)
      for (int r = 0; r < R; ++r) v.push_back(p.intercepts(g, r));
  if (sel.slopes && D > 0)
    for (int g = 0; g < G; ++g)
      for (int r = 0; r < R; ++r)
        for (int d = 0; d < D; ++d) v.push_back(p.slopes[g](r, d));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

TargetList make_targets(const JackknifeTargets& sel, const Parameters& ref) {
  TargetList t;
  t.sel = sel;
  t.G = ref.n_groups();
  t.R = ref.n_receivers();
  t.D = ref.latent_dim();
  // 1-based indices in names, matching every serialized artifact
  if (sel.eta)
    for (int g = 1; g <= t.G; ++g) t.names.push_back("eta[" + std::to_string(g) + "]");
  if (sel.intercepts)
    for (int g = 1; g <= t.G; ++g)
      for (int r = 1; r <= t.R; ++r)
        t.names.push_back("intercept[" + std::to_string(g) + "," + std::to_string(r) + "]");
  if (sel.slopes && t.D > 0)
    for (int g = 1; g <= t.G; ++g)
      for (int r = 1; r <= t.R; ++r)
        for (int d = 1; d <= t.D; ++d)
          t.names.push_back("slope[" + std::to_string(g) + "," + std::to_string(r) +
                            "," + std::to_string(d) + "]");
  return t;
}

}  // namespace

JackknifeReport jackknife_se(const IncidenceMatrix& m, const ModelSpec& rawspec,
                             const FitResult& ref_fit,
                             const JackknifeTargets& targets,
                             const JackknifeConfig& cfg) {
  const ModelSpec spec = rawspec.normalized();
  const int N = static_cast<int>(m.n_senders());
  if (N < 2) throw std::invalid_argument("jackknife needs at least two senders");
  if (ref_fit.params.spec != spec)
    throw std::invalid_argument("reference fit does not match requested model");

  const TargetList tl = make_targets(targets, ref_fit.params);
  const long T = static_cast<long>(tl.names.size());

  std::vector<Eigen::VectorXd> rows(N);
  std::vector<char> ok(N, 0);

  parallel_for(N, cfg.n_threads, [&](long i) {
    const IncidenceMatrix sub = drop_sender(m, static_cast<int>(i));
    FitConfig fc = cfg.fit;
    fc.init = ref_fit.params;
    FitResult rep;
    try {
      rep = fit(sub, spec, fc);
    } catch (const std::exception&) {
      return;  // replicate skipped
    }
    if (!rep.converged) return;
    const std::vector<int> perm =
        align_labels(ref_fit.state.resp, rep.state.resp, static_cast<int>(i));
    const Parameters aligned = align_params(rep.params, ref_fit.params, perm);
    rows[i] = tl.values(aligned);
    ok[i] = 1;
  });

  int used = 0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(T);
  for (int i = 0; i < N; ++i)
    if (ok[i]) {
      mean += rows[i];
      ++used;
    }
  const int skipped = N - used;

  JackknifeReport report;
  report.n_skipped = skipped;
  report.unreliable = skipped > cfg.skip_threshold * N;
  if (used == 0) {
    report.unreliable = true;
    return report;
  }
  mean /= used;

  Eigen::VectorXd ss = Eigen::VectorXd::Zero(T);
  for (int i = 0; i < N; ++i)
    if (ok[i]) ss += (rows[i] - mean).cwiseAbs2();

  const Eigen::VectorXd ref_values = tl.values(ref_fit.params);
  const double scale = static_cast<double>(used - 1) / used;
  report.entries.resize(T);
  for (long t = 0; t < T; ++t) {
    report.entries[t].target = tl.names[t];
    report.entries[t].estimate = ref_values[t];
    report.entries[t].se = std::sqrt(scale * ss[t]);
    report.entries[t].n_replicates = used;
  }
  return report;
}

}  // namespace mlta
