#include "mlta/variational.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mlta/quadrature.hpp"
#include "mlta/rng.hpp"

namespace mlta {

namespace {

constexpr double kEtaDegenerate = 1e-6;
constexpr double kGroupWeightFloor = 1e-12;
constexpr double kRidge = 1e-8;
constexpr double kLogitClamp = 1e-12;

// RNG stream ids (layout v1)
constexpr std::uint64_t kStreamInit = 0;

}  // namespace

double jj_lambda(double xi) {
  const double x = std::abs(xi);
  if (x < 1e-4) {
    const double x2 = x * x;
    return 0.125 - x2 / 96.0 + x2 * x2 / 960.0;
  }
  return std::tanh(0.5 * x) / (4.0 * x);
}

double node_bound(const Parameters& p, int g,
                  const Eigen::Ref<const Eigen::VectorXi>& y_row,
                  const Eigen::VectorXd& xi_row, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
  const int R = p.n_receivers();
  const int D = p.latent_dim();
  if (g < 0 || g >= p.n_groups()) throw std::out_of_range("group index");
  if (y_row.size() != R || xi_row.size() != R)
    throw std::invalid_argument("row length mismatch");

  double value = 0.0;
  if (D > 0) {
    if (mean.size() != D || cov.rows() != D || cov.cols() != D)
      throw std::invalid_argument("posterior moment shape mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("posterior covariance not positive definite");
    double logdet = 0.0;
    for (int d = 0; d < D; ++d) logdet += 2.0 * std::log(llt.matrixL()(d, d));
    // E_q[log N(theta;0,I)] - E_q[log q(theta)]
    value += 0.5 * (logdet - cov.trace() - mean.squaredNorm() + D);
  }
  for (int r = 0; r < R; ++r) {
    const double xi = std::abs(xi_row[r]);
    const double lam = jj_lambda(xi);
    const double b = p.intercepts(g, r);
    double a = b;       // E_q[b + w.theta]
    double s2 = 0.0;    // Var_q[w.theta]
    if (D > 0) {
      const auto w = p.slopes[g].row(r);
      a += w.dot(mean);
      s2 = w * cov * w.transpose();
    }
    value += log_logistic(xi) + (y_row[r] - 0.5) * a - 0.5 * xi -
             lam * (a * a + s2 - xi * xi);
  }
  return value;
}

VariationalState e_step(const IncidenceMatrix& m, const Parameters& p,
                        VariationalState s) {
  const int N = static_cast<int>(m.n_senders());
  const int R = static_cast<int>(m.n_receivers());
  const int G = p.n_groups();
  const int D = p.latent_dim();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  if (p.n_receivers() != R) throw std::invalid_argument("parameter/receiver mismatch");

  s.node_bounds.resize(N, G);
  if (s.resp.rows() != N || s.resp.cols() != G) s.resp.resize(N, G);

  Eigen::VectorXd log_eta(G);
  for (int g = 0; g < G; ++g)
    log_eta[g] = p.eta[g] > 0.0 ? std::log(p.eta[g]) : neg_inf;

  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(D, D);

  for (int g = 0; g < G; ++g) {
    const Eigen::MatrixXd& slope = p.slopes[g];  // R x D
    for (int n = 0; n < N; ++n) {
      double bound;
      if (D > 0) {
        // posterior precision and linear term at current xi
        Eigen::MatrixXd prec = identity;
        Eigen::VectorXd lin = Eigen::VectorXd::Zero(D);
        for (int r = 0; r < R; ++r) {
          const double lam = jj_lambda(s.xi[g](n, r));
          const double b = p.intercepts(g, r);
          const auto w = slope.row(r).transpose();
          prec.noalias() += (2.0 * lam) * w * w.transpose();
          lin.noalias() += ((m.cells(n, r) - 0.5) - 2.0 * lam * b) * w;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(prec);
        if (ldlt.info() != Eigen::Success)
          throw std::runtime_error("e-step precision solve failed at sender " +
                                   std::to_string(n) + ", group " + std::to_string(g));
        Eigen::MatrixXd cov = ldlt.solve(identity);
        Eigen::VectorXd mean = cov * lin;
        if (!cov.allFinite() || !mean.allFinite())
          throw std::runtime_error("e-step produced non-finite posterior at sender " +
                                   std::to_string(n) + ", group " + std::to_string(g));
        s.post_cov[g][n] = cov;
        s.post_mean[g].row(n) = mean.transpose();

        // xi^2 = E[(b + w.theta)^2] under the updated posterior
        const Eigen::MatrixXd second = cov + mean * mean.transpose();
        for (int r = 0; r < R; ++r) {
          const auto w = slope.row(r);
          const double b = p.intercepts(g, r);
          const double t = w * second * w.transpose() + 2.0 * b * w.dot(mean) + b * b;
          s.xi[g](n, r) = std::sqrt(std::max(t, 0.0));
        }
        bound = node_bound(p, g, m.cells.row(n).transpose(), s.xi[g].row(n).transpose(),
                           mean, cov);
      } else {
        // no latent variable: xi = |b| makes the bound exact
        double exact = 0.0;
        for (int r = 0; r < R; ++r) {
          const double b = p.intercepts(g, r);
          s.xi[g](n, r) = std::abs(b);
          exact += log_logistic(m.cells(n, r) == 1 ? b : -b);
        }
        bound = exact;
      }
      s.node_bounds(n, g) = bound;
    }
  }

  // responsibilities and aggregate bound
  double total = 0.0;
  Eigen::VectorXd terms(G);
  for (int n = 0; n < N; ++n) {
    for (int g = 0; g < G; ++g) terms[g] = log_eta[g] + s.node_bounds(n, g);
    const double lse = log_sum_exp(terms);
    for (int g = 0; g < G; ++g)
      s.resp(n, g) = terms[g] == neg_inf ? 0.0 : std::exp(terms[g] - lse);
    const double rowsum = s.resp.row(n).sum();
    s.resp.row(n) /= rowsum;
    total += lse;
  }
  s.total_bound = total;
  return s;
}

namespace {

// Solve A x = b, retrying once with a ridge when the solve fails or returns
// non-finite values.
Eigen::VectorXd solve_with_ridge(Eigen::MatrixXd A, const Eigen::VectorXd& rhs,
                                 int* ridge_retries, const std::string& where) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd x = ldlt.solve(rhs);
    if (x.allFinite()) return x;
  }
  if (ridge_retries) ++*ridge_retries;
  A.diagonal().array() += kRidge;
  Eigen::LDLT<Eigen::MatrixXd> retry(A);
  Eigen::VectorXd x = retry.solve(rhs);
  if (retry.info() != Eigen::Success || !x.allFinite())
    throw std::runtime_error("singular m-step system at " + where);
  return x;
}

}  // namespace

Parameters m_step(const IncidenceMatrix& m, const VariationalState& s,
                  const ModelSpec& rawspec, const Parameters* prev,
                  int* ridge_retries) {
  const ModelSpec spec = rawspec.normalized();
  const int N = static_cast<int>(m.n_senders());
  const int R = static_cast<int>(m.n_receivers());
  const int G = spec.n_groups;
  const int D = spec.latent_dim;

  Parameters p;
  p.spec = spec;
  p.eta = s.resp.colwise().mean().transpose();
  p.eta /= p.eta.sum();
  p.intercepts.resize(G, R);
  p.slopes.assign(G, Eigen::MatrixXd::Zero(R, D));

  const Eigen::VectorXd group_weight = s.resp.colwise().sum().transpose();

  if (D == 0) {
    // exact logit closed form per (g, r)
    for (int g = 0; g < G; ++g) {
      if (group_weight[g] < kGroupWeightFloor) {
        if (prev)
          p.intercepts.row(g) = prev->intercepts.row(g);
        else
          p.intercepts.row(g).setZero();
        continue;
      }
      for (int r = 0; r < R; ++r) {
        double wy = 0.0;
        for (int n = 0; n < N; ++n) wy += s.resp(n, g) * m.cells(n, r);
        double pbar = wy / group_weight[g];
        pbar = std::min(std::max(pbar, kLogitClamp), 1.0 - kLogitClamp);
        p.intercepts(g, r) = logit(pbar);
      }
    }
    return p;
  }

  // second moments per (n, g), shared across receivers
  std::vector<std::vector<Eigen::MatrixXd>> second(G);
  for (int g = 0; g < G; ++g) {
    second[g].resize(N);
    for (int n = 0; n < N; ++n) {
      const Eigen::VectorXd mu = s.post_mean[g].row(n).transpose();
      second[g][n] = s.post_cov[g][n] + mu * mu.transpose();
    }
  }

  if (!spec.common_slope) {
    for (int g = 0; g < G; ++g) {
      if (group_weight[g] < kGroupWeightFloor) {
        if (prev) {
          p.intercepts.row(g) = prev->intercepts.row(g);
          p.slopes[g] = prev->slopes[g];
        }
        continue;
      }
      for (int r = 0; r < R; ++r) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(D + 1, D + 1);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(D + 1);
        for (int n = 0; n < N; ++n) {
          const double z = s.resp(n, g);
          if (z == 0.0) continue;
          const double lam2 = 2.0 * z * jj_lambda(s.xi[g](n, r));
          const Eigen::VectorXd mu = s.post_mean[g].row(n).transpose();
          A(0, 0) += lam2;
          A.block(0, 1, 1, D).noalias() += lam2 * mu.transpose();
          A.block(1, 1, D, D).noalias() += lam2 * second[g][n];
          const double yc = z * (m.cells(n, r) - 0.5);
          rhs[0] += yc;
          rhs.tail(D).noalias() += yc * mu;
        }
        A.block(1, 0, D, 1) = A.block(0, 1, 1, D).transpose();
        const Eigen::VectorXd beta = solve_with_ridge(
            std::move(A), rhs, ridge_retries,
            "receiver " + std::to_string(r) + ", group " + std::to_string(g));
        p.intercepts(g, r) = beta[0];
        p.slopes[g].row(r) = beta.tail(D).transpose();
      }
    }
    return p;
  }

  // common slope: one joint system of size G + D per receiver, with group
  // indicator blocks for the intercepts
  for (int r = 0; r < R; ++r) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(G + D, G + D);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(G + D);
    for (int n = 0; n < N; ++n) {
      for (int g = 0; g < G; ++g) {
        const double z = s.resp(n, g);
        if (z == 0.0) continue;
        const double lam2 = 2.0 * z * jj_lambda(s.xi[g](n, r));
        const Eigen::VectorXd mu = s.post_mean[g].row(n).transpose();
        A(g, g) += lam2;
        A.block(g, G, 1, D).noalias() += lam2 * mu.transpose();
        A.block(G, G, D, D).noalias() += lam2 * second[g][n];
        const double yc = z * (m.cells(n, r) - 0.5);
        rhs[g] += yc;
        rhs.tail(D).noalias() += yc * mu;
      }
    }
    for (int g = 0; g < G; ++g) A.block(G, g, D, 1) = A.block(g, G, 1, D).transpose();
    const Eigen::VectorXd beta =
        solve_with_ridge(std::move(A), rhs, ridge_retries, "receiver " + std::to_string(r));
    for (int g = 0; g < G; ++g) p.intercepts(g, r) = beta[g];
    const Eigen::RowVectorXd w = beta.tail(D).transpose();
    for (int g = 0; g < G; ++g) p.slopes[g].row(r) = w;
  }
  return p;
}

Parameters random_init(const ModelSpec& rawspec, int n_receivers,
                       std::uint64_t seed) {
  const ModelSpec spec = rawspec.normalized();
  spec.validate();
  const int G = spec.n_groups, D = spec.latent_dim, R = n_receivers;
  RandomStream rng(seed, kStreamInit);
  Parameters p;
  p.spec = spec;
  p.eta = Eigen::VectorXd::Constant(G, 1.0 / G);
  p.intercepts.resize(G, R);
  for (int g = 0; g < G; ++g)
    for (int r = 0; r < R; ++r) p.intercepts(g, r) = rng.normal();
  p.slopes.assign(G, Eigen::MatrixXd::Zero(R, D));
  if (D > 0) {
    const int distinct = spec.common_slope ? 1 : G;
    for (int g = 0; g < distinct; ++g)
      for (int r = 0; r < R; ++r)
        for (int d = 0; d < D; ++d) p.slopes[g](r, d) = rng.normal();
    if (spec.common_slope)
      for (int g = 1; g < G; ++g) p.slopes[g] = p.slopes[0];
  }
  return p;
}

void apply_sign_convention(Parameters& p, VariationalState& s) {
  const int G = p.n_groups();
  const int D = p.latent_dim();
  if (D == 0) return;
  const int distinct = p.spec.normalized().common_slope ? 1 : G;
  for (int gs = 0; gs < distinct; ++gs) {
    for (int d = 0; d < D; ++d) {
      Eigen::Index argmax = 0;
      p.slopes[gs].col(d).cwiseAbs().maxCoeff(&argmax);
      if (p.slopes[gs](argmax, d) >= 0.0) continue;
      // flipping one latent dimension leaves the likelihood unchanged
      const int g_lo = p.spec.normalized().common_slope ? 0 : gs;
      const int g_hi = p.spec.normalized().common_slope ? G : gs + 1;
      for (int g = g_lo; g < g_hi; ++g) {
        p.slopes[g].col(d) = -p.slopes[g].col(d);
        if (s.post_mean.size() == static_cast<std::size_t>(G)) {
          s.post_mean[g].col(d) = -s.post_mean[g].col(d);
          for (auto& cov : s.post_cov[g]) {
            cov.row(d) = -cov.row(d);
            cov.col(d) = -cov.col(d);
          }
        }
      }
    }
  }
}

FitResult fit(const IncidenceMatrix& m, const ModelSpec& rawspec,
              const FitConfig& cfg) {
  const ModelSpec spec = rawspec.normalized();
  spec.validate();
  const int N = static_cast<int>(m.n_senders());
  const int R = static_cast<int>(m.n_receivers());
  const int G = spec.n_groups;
  const int D = spec.latent_dim;
  if (N < G)
    throw std::invalid_argument("need at least as many senders as groups");

  FitResult res;
  res.seed = cfg.seed;
  Parameters params;
  if (cfg.init) {
    params = *cfg.init;
    params.spec = spec;
    params.validate();
    if (params.n_receivers() != R)
      throw std::invalid_argument("warm-start parameters do not match data");
  } else {
    params = random_init(spec, R, cfg.seed);
  }

  VariationalState state;
  state.xi.assign(G, Eigen::MatrixXd::Constant(N, R, cfg.xi_init));
  state.post_mean.assign(G, Eigen::MatrixXd::Zero(N, D));
  state.post_cov.assign(
      G, std::vector<Eigen::MatrixXd>(N, Eigen::MatrixXd::Identity(D, D)));
  state.resp = Eigen::MatrixXd::Constant(N, G, 1.0 / G);

  res.bound_trace.reserve(std::min(cfg.max_iter, 256));
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    state = e_step(m, params, std::move(state));
    res.bound_trace.push_back(state.total_bound);
    if (iter > 0 && std::abs(res.bound_trace[iter] - res.bound_trace[iter - 1]) <
                        cfg.tol) {
      res.converged = true;
      break;
    }
    if (iter + 1 == cfg.max_iter) break;
    Parameters next = m_step(m, state, spec, &params, &res.ridge_retries);
    // an m-step fixed point means the next e-step cannot move either
    const bool stationary = [&] {
      constexpr double eps = 1e-14;
      if ((next.eta - params.eta).cwiseAbs().maxCoeff() > eps) return false;
      if ((next.intercepts - params.intercepts).cwiseAbs().maxCoeff() > eps)
        return false;
      for (int g = 0; g < G; ++g)
        if (D > 0 && (next.slopes[g] - params.slopes[g]).cwiseAbs().maxCoeff() > eps)
          return false;
      return true;
    }();
    params = std::move(next);
    if (stationary) {
      res.converged = true;
      break;
    }
  }
  res.n_iters = static_cast<int>(res.bound_trace.size());
  res.params = std::move(params);
  res.state = std::move(state);
  res.degenerate = res.params.eta.minCoeff() < kEtaDegenerate;
  apply_sign_convention(res.params, res.state);
  return res;
}

}  // namespace mlta
