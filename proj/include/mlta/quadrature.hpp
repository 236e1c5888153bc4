#pragma once

#include <Eigen/Core>

#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta {

// Tensor-product Gauss-Hermite rule normalized against the N(0, I) density:
// sum_q weight_q f(point_q) ~ E[f(theta)], exact for polynomials of degree
// < 2 * points_per_dim in each variable.
struct GHRule {
  Eigen::VectorXd nodes1d;     // symmetric about 0, ascending
  Eigen::VectorXd weights1d;   // positive, sums to 1
  int points_per_dim = 0;
  int dim = 0;
  Eigen::MatrixXd points;      // n_points x dim tensor grid
  Eigen::VectorXd log_weights; // n_points

  Eigen::Index n_points() const { return points.rows(); }
};

// Golub-Welsch on the probabilists' Hermite Jacobi matrix; nodes exactly
// symmetrized. dim == 0 yields the single empty point with weight 1.
GHRule gh_rule(int points_per_dim, int dim);

// Marginal log-likelihood estimate
//   sum_n log sum_g eta_g sum_q w_q prod_r Bernoulli(y_nr; pi_rg(x_q)),
// evaluated in log space. For latent_dim == 0 the rule is ignored and the
// exact latent class likelihood is returned.
double loglik_gh(const IncidenceMatrix& m, const Parameters& p, const GHRule& rule);

// log(sum(exp(v))) over finite entries; -inf when all entries are -inf
double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace mlta
