#include "mlta/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mlta {

double log_sum_exp(const Eigen::VectorXd& v) {
  const double inf = std::numeric_limits<double>::infinity();
  double mx = -inf;
  for (Eigen::Index i = 0; i < v.size(); ++i) mx = std::max(mx, v[i]);
  if (mx == -inf) return -inf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != -inf) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

GHRule gh_rule(int points_per_dim, int dim) {
  if (points_per_dim < 1) throw std::invalid_argument("points_per_dim must be >= 1");
  if (dim < 0) throw std::invalid_argument("dim must be >= 0");

  const int m = points_per_dim;
  Eigen::VectorXd nodes(m), weights(m);
  if (m == 1) {
    nodes[0] = 0.0;
    weights[0] = 1.0;
  } else {
    // Jacobi matrix of the probabilists' Hermite recurrence: zero diagonal,
    // off-diagonal sqrt(k). Eigenvalues are the nodes; squared first
    // eigenvector components are the N(0,1)-normalized weights.
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k)
      jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("Hermite eigendecomposition failed");
    nodes = es.eigenvalues();
    for (int i = 0; i < m; ++i) weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);

    // enforce exact symmetry about 0
    for (int i = 0; i < m / 2; ++i) {
      const int j = m - 1 - i;
      const double x = 0.5 * (nodes[i] - nodes[j]);
      nodes[i] = x;
      nodes[j] = -x;
      const double w = 0.5 * (weights[i] + weights[j]);
      weights[i] = weights[j] = w;
    }
    if (m % 2 == 1) nodes[m / 2] = 0.0;
    weights /= weights.sum();
  }

  GHRule rule;
  rule.nodes1d = nodes;
  rule.weights1d = weights;
  rule.points_per_dim = m;
  rule.dim = dim;

  Eigen::Index total = 1;
  for (int d = 0; d < dim; ++d) total *= m;
  rule.points.resize(total, dim);
  rule.log_weights.resize(total);
  Eigen::VectorXd logw1d = weights.array().log();
  for (Eigen::Index q = 0; q < total; ++q) {
    double lw = 0.0;
    Eigen::Index rem = q;
    for (int d = 0; d < dim; ++d) {
      const int idx = static_cast<int>(rem % m);
      rem /= m;
      rule.points(q, d) = nodes[idx];
      lw += logw1d[idx];
    }
    rule.log_weights[q] = lw;
  }
  return rule;
}

double loglik_gh(const IncidenceMatrix& m, const Parameters& p, const GHRule& rule) {
  const int N = static_cast<int>(m.n_senders());
  const int R = static_cast<int>(m.n_receivers());
  const int G = p.n_groups();
  const int D = p.latent_dim();
  if (p.n_receivers() != R) throw std::invalid_argument("parameter/receiver mismatch");
  if (D > 0 && rule.dim != D) throw std::invalid_argument("rule dimension mismatch");

  const double neg_inf = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd log_eta(G);
  for (int g = 0; g < G; ++g)
    log_eta[g] = p.eta[g] > 0.0 ? std::log(p.eta[g]) : neg_inf;

  const Eigen::MatrixXd ones = m.cells.cast<double>();  // N x R

  if (D == 0) {
    // exact latent class likelihood: log p(y_n | g) factorizes per receiver,
    // with log sigma(b) - log sigma(-b) = b
    Eigen::VectorXd base(G);
    Eigen::MatrixXd per_node(N, G);
    for (int g = 0; g < G; ++g) {
      double b0 = 0.0;
      for (int r = 0; r < R; ++r) b0 += log_logistic(-p.intercepts(g, r));
      base[g] = b0;
    }
    Eigen::MatrixXd lin = ones * p.intercepts.transpose();  // N x G
    double total = 0.0;
    Eigen::VectorXd terms(G);
    for (int n = 0; n < N; ++n) {
      for (int g = 0; g < G; ++g) terms[g] = log_eta[g] + base[g] + lin(n, g);
      total += log_sum_exp(terms);
    }
    return total;
  }

  const Eigen::Index Q = rule.n_points();
  double total = 0.0;
  // Per group: x(q,r) = b_r + w_r . theta_q. Then per node the conditional
  // log-likelihood at theta_q is  sum_r log sigma(-x) + sum_{r: y=1} x.
  std::vector<Eigen::MatrixXd> node_terms(G);  // Q x N contribution matrices
  for (int g = 0; g < G; ++g) {
    Eigen::MatrixXd x = rule.points * p.slopes[g].transpose();  // Q x R
    x.rowwise() += p.intercepts.row(g);
    Eigen::VectorXd base(Q);
    for (Eigen::Index q = 0; q < Q; ++q) {
      double b0 = 0.0;
      for (int r = 0; r < R; ++r) b0 += log_logistic(-x(q, r));
      base[q] = rule.log_weights[q] + b0;
    }
    node_terms[g] = x * ones.transpose();  // Q x N
    node_terms[g].colwise() += base;
  }
  Eigen::VectorXd group_terms(G);
  Eigen::VectorXd q_terms(Q);
  for (int n = 0; n < N; ++n) {
    for (int g = 0; g < G; ++g) {
      if (log_eta[g] == neg_inf) {
        group_terms[g] = neg_inf;
        continue;
      }
      q_terms = node_terms[g].col(n);
      group_terms[g] = log_eta[g] + log_sum_exp(q_terms);
    }
    total += log_sum_exp(group_terms);
  }
  return total;
}

}  // namespace mlta
