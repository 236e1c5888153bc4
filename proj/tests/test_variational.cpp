#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "mlta/quadrature.hpp"
#include "mlta/rng.hpp"
#include "mlta/variational.hpp"
#include "oracles.hpp"

using namespace mlta;

namespace {

Parameters random_params(int G, int R, int D, bool common, std::uint64_t seed,
                         double scale = 1.0) {
  Parameters p;
  p.spec = ModelSpec{G, D, common}.normalized();
  RandomStream rng(seed, 0);
  Eigen::VectorXd raw(G);
  for (int g = 0; g < G; ++g) raw[g] = 0.2 + rng.uniform();
  p.eta = raw / raw.sum();
  p.intercepts.resize(G, R);
  p.slopes.assign(G, Eigen::MatrixXd(R, D));
  for (int g = 0; g < G; ++g)
    for (int r = 0; r < R; ++r) p.intercepts(g, r) = scale * rng.normal();
  for (int g = 0; g < G; ++g) {
    if (p.spec.common_slope && g > 0) {
      p.slopes[g] = p.slopes[0];
      continue;
    }
    for (int r = 0; r < R; ++r)
      for (int d = 0; d < D; ++d) p.slopes[g](r, d) = scale * rng.normal();
  }
  return p;
}

IncidenceMatrix random_matrix(int N, int R, std::uint64_t seed, double density = 0.4) {
  IncidenceMatrix m;
  m.cells.resize(N, R);
  RandomStream rng(seed, 1);
  for (int n = 0; n < N; ++n)
    for (int r = 0; r < R; ++r) m.cells(n, r) = rng.bernoulli(density) ? 1 : 0;
  m.sender_labels = default_labels("T", N);
  m.receiver_labels = default_labels("E", R);
  return m;
}

VariationalState fresh_state(int N, int R, int G, int D, double xi0 = 20.0) {
  VariationalState s;
  s.xi.assign(G, Eigen::MatrixXd::Constant(N, R, xi0));
  s.post_mean.assign(G, Eigen::MatrixXd::Zero(N, D));
  s.post_cov.assign(G,
                    std::vector<Eigen::MatrixXd>(N, Eigen::MatrixXd::Identity(D, D)));
  s.resp = Eigen::MatrixXd::Constant(N, G, 1.0 / G);
  return s;
}

}  // namespace

TEST_CASE("jj_lambda: value at zero, series continuity, evenness") {
  CHECK(jj_lambda(0.0) == doctest::Approx(0.125).epsilon(1e-15));
  // series and closed form agree across the switchover
  for (double xi : {1e-5, 5e-5, 1e-4, 2e-4, 1e-3}) {
    const double direct = std::tanh(xi / 2.0) / (4.0 * xi);
    CHECK(jj_lambda(xi) == doctest::Approx(direct).epsilon(1e-12));
  }
  CHECK(jj_lambda(-1.7) == doctest::Approx(jj_lambda(1.7)).epsilon(1e-15));
  CHECK(jj_lambda(2.0) == doctest::Approx(std::tanh(1.0) / 8.0).epsilon(1e-14));
}

TEST_CASE("node bound never exceeds the exact marginal") {
  RandomStream rng(42, 9);
  int checked = 0;
  for (std::uint64_t rep = 0; rep < 150; ++rep) {
    const int R = 1 + static_cast<int>(rng.below(6));
    const int D = static_cast<int>(rng.below(3));
    Parameters p = random_params(2, R, D, false, 1000 + rep, 1.5);
    Eigen::VectorXi y(R);
    for (int r = 0; r < R; ++r) y[r] = rng.bernoulli(0.5) ? 1 : 0;

    Eigen::VectorXd mean(D);
    for (int d = 0; d < D; ++d) mean[d] = rng.normal();
    Eigen::MatrixXd a(D, D);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) a(i, j) = rng.normal();
    Eigen::MatrixXd cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(D, D);
    Eigen::VectorXd xi(R);
    for (int r = 0; r < R; ++r) xi[r] = 0.01 + 3.0 * rng.uniform();

    for (int g = 0; g < 2; ++g) {
      const double bound = node_bound(p, g, y, xi, mean, cov);
      const double exact = oracle::dense_row_loglik(y, p, g);
      CHECK(bound <= exact + 1e-6);
      ++checked;
    }
  }
  CHECK(checked == 300);
}

TEST_CASE("D=0 bound is exact at xi = |b|") {
  Parameters p = random_params(2, 5, 0, false, 7);
  Eigen::VectorXi y(5);
  y << 1, 0, 1, 1, 0;
  for (int g = 0; g < 2; ++g) {
    Eigen::VectorXd xi = p.intercepts.row(g).cwiseAbs().transpose();
    Eigen::VectorXd mean(0);
    Eigen::MatrixXd cov(0, 0);
    const double bound = node_bound(p, g, y, xi, mean, cov);
    CHECK(bound == doctest::Approx(oracle::dense_row_loglik(y, p, g)).epsilon(1e-12));
  }
}

TEST_CASE("e_step: simplex responsibilities and xi local maximality") {
  IncidenceMatrix m = random_matrix(12, 6, 5);
  Parameters p = random_params(2, 6, 1, false, 5);
  // a few sweeps so xi settles near its fixed point for the current params
  VariationalState s = fresh_state(12, 6, 2, 1);
  for (int sweep = 0; sweep < 30; ++sweep) s = e_step(m, p, std::move(s));

  for (Eigen::Index n = 0; n < 12; ++n) {
    CHECK(s.resp.row(n).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.resp.row(n).minCoeff() >= 0.0);
  }
  // perturbing any single xi never raises the node bound
  for (int n : {0, 3, 7}) {
    for (int g = 0; g < 2; ++g) {
      const Eigen::VectorXd mean = s.post_mean[g].row(n).transpose();
      const Eigen::MatrixXd& cov = s.post_cov[g][n];
      const Eigen::VectorXi y = m.cells.row(n).transpose();
      Eigen::VectorXd xi = s.xi[g].row(n).transpose();
      const double at_opt = node_bound(p, g, y, xi, mean, cov);
      for (int r = 0; r < 6; ++r) {
        for (double f : {0.99, 1.01}) {
          Eigen::VectorXd pert = xi;
          pert[r] *= f;
          CHECK(node_bound(p, g, y, pert, mean, cov) <= at_opt + 1e-10);
        }
      }
    }
  }
}

TEST_CASE("fit: monotone bound trace on random problems") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int D = static_cast<int>(seed % 3);
    const bool common = seed % 2 == 0 && D > 0;
    IncidenceMatrix m = random_matrix(15, 5, seed);
    FitConfig cfg;
    cfg.seed = seed;
    cfg.max_iter = 200;
    FitResult fr = fit(m, ModelSpec{2, D, common}, cfg);
    for (std::size_t i = 1; i < fr.bound_trace.size(); ++i)
      CHECK(fr.bound_trace[i] >= fr.bound_trace[i - 1] - 1e-8);
  }
}

TEST_CASE("fit: converged means the last bound step is below tol") {
  IncidenceMatrix m = random_matrix(20, 5, 3);
  FitConfig cfg;
  cfg.seed = 3;
  FitResult fr = fit(m, ModelSpec{2, 0, false}, cfg);
  REQUIRE(fr.converged);
  const auto& tr = fr.bound_trace;
  REQUIRE(tr.size() >= 2);
  CHECK(std::abs(tr.back() - tr[tr.size() - 2]) < cfg.tol);
}

TEST_CASE("G=1 D=0 closed form: intercepts are column-mean logits") {
  IncidenceMatrix m = random_matrix(30, 4, 11, 0.3);
  FitConfig cfg;
  cfg.seed = 11;
  FitResult fr = fit(m, ModelSpec{1, 0, false}, cfg);
  CHECK(fr.converged);
  CHECK(fr.n_iters <= 3);
  for (int r = 0; r < 4; ++r) {
    const double mean = m.cells.col(r).cast<double>().mean();
    CHECK(logistic(fr.params.intercepts(0, r)) == doctest::Approx(mean).epsilon(1e-9));
  }
  // with D = 0 the bound is tight: it equals the exact log-likelihood
  CHECK(fr.final_bound() ==
        doctest::Approx(loglik_gh(m, fr.params, gh_rule(1, 0))).epsilon(1e-9));
}

TEST_CASE("common-slope fits keep slope matrices identical") {
  IncidenceMatrix m = random_matrix(25, 6, 13);
  FitConfig cfg;
  cfg.seed = 13;
  cfg.max_iter = 300;
  FitResult fr = fit(m, ModelSpec{2, 2, true}, cfg);
  CHECK(fr.params.slopes[0] == fr.params.slopes[1]);
  CHECK_NOTHROW(fr.params.validate());
}

TEST_CASE("slope sign convention: dominant entry per dimension is positive") {
  for (std::uint64_t seed : {2ULL, 4ULL, 8ULL}) {
    IncidenceMatrix m = random_matrix(20, 6, seed);
    FitConfig cfg;
    cfg.seed = seed;
    cfg.max_iter = 300;
    FitResult fr = fit(m, ModelSpec{1, 2, false}, cfg);
    for (int d = 0; d < 2; ++d) {
      Eigen::Index imax;
      fr.params.slopes[0].col(d).cwiseAbs().maxCoeff(&imax);
      CHECK(fr.params.slopes[0](imax, d) > 0.0);
    }
  }
}

TEST_CASE("fit is deterministic in the seed") {
  IncidenceMatrix m = random_matrix(18, 5, 21);
  FitConfig cfg;
  cfg.seed = 99;
  cfg.max_iter = 150;
  FitResult a = fit(m, ModelSpec{2, 1, true}, cfg);
  FitResult b = fit(m, ModelSpec{2, 1, true}, cfg);
  CHECK(a.final_bound() == b.final_bound());
  CHECK(a.params.intercepts == b.params.intercepts);
  CHECK(a.n_iters == b.n_iters);
}

TEST_CASE("warm start from a converged fit is immediately stationary") {
  IncidenceMatrix m = random_matrix(20, 5, 31);
  FitConfig cfg;
  cfg.seed = 31;
  FitResult first = fit(m, ModelSpec{2, 0, false}, cfg);
  REQUIRE(first.converged);
  FitConfig warm;
  warm.init = first.params;
  FitResult second = fit(m, ModelSpec{2, 0, false}, warm);
  CHECK(second.converged);
  CHECK(second.n_iters <= 2);
  CHECK(second.final_bound() >= first.final_bound() - 1e-9);
}

TEST_CASE("D=0 fit matches a direct latent class EM from the same start") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    IncidenceMatrix m = random_matrix(60, 8, seed, 0.35);
    RandomStream rng(seed, 6);
    Eigen::VectorXd eta0(2);
    eta0 << 0.4 + 0.2 * rng.uniform(), 0.0;
    eta0[1] = 1.0 - eta0[0];
    Eigen::MatrixXd p0(2, 8);
    for (int g = 0; g < 2; ++g)
      for (int r = 0; r < 8; ++r) p0(g, r) = 0.05 + 0.9 * rng.uniform();

    Parameters init;
    init.spec = ModelSpec{2, 0, false}.normalized();
    init.eta = eta0;
    init.intercepts.resize(2, 8);
    for (int g = 0; g < 2; ++g)
      for (int r = 0; r < 8; ++r) init.intercepts(g, r) = logit(p0(g, r));
    init.slopes.assign(2, Eigen::MatrixXd(8, 0));

    FitConfig cfg;
    cfg.init = init;
    cfg.tol = 1e-10;
    cfg.max_iter = 5000;
    FitResult fr = fit(m, init.spec, cfg);
    oracle::LcaFit ref = oracle::lca_em(m.cells, eta0, p0);
    const double ll = loglik_gh(m, fr.params, gh_rule(1, 0));
    CHECK(std::abs(ll - ref.loglik) < 1e-4);
  }
}

TEST_CASE("a starving group leaves the fit finite and flagged degenerate") {
  // two identical dense rows cannot support two groups; drive group 2 to zero
  IncidenceMatrix m;
  m.cells = Eigen::MatrixXi::Ones(8, 4);
  m.sender_labels = default_labels("T", 8);
  m.receiver_labels = default_labels("E", 4);
  Parameters init = random_params(2, 4, 0, false, 17);
  init.eta << 1.0 - 1e-9, 1e-9;
  init.intercepts.row(0).setConstant(2.0);
  init.intercepts.row(1).setConstant(-30.0);  // group 2 explains nothing
  FitConfig cfg;
  cfg.init = init;
  cfg.max_iter = 50;
  FitResult fr = fit(m, ModelSpec{2, 0, false}, cfg);
  CHECK(std::isfinite(fr.final_bound()));
  CHECK(fr.degenerate);
  CHECK(fr.params.eta[1] < 1e-6);
}
