#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta {

// Per-(sender, group) variational quantities. xi[g] is N x R and strictly
// positive, post_mean[g] is N x D, post_cov[g][n] is D x D SPD, resp rows
// live on the simplex. node_bounds and total_bound cache the lower bound on
// log p(y_n | z_g = 1) and its mixture aggregate from the last e-step.
struct VariationalState {
  std::vector<Eigen::MatrixXd> xi;
  std::vector<Eigen::MatrixXd> post_mean;
  std::vector<std::vector<Eigen::MatrixXd>> post_cov;
  Eigen::MatrixXd resp;
  Eigen::MatrixXd node_bounds;
  double total_bound = -std::numeric_limits<double>::infinity();
};

struct FitConfig {
  int max_iter = 1000;
  double tol = 1e-6;      // absolute change of the bound
  std::uint64_t seed = 1;
  double xi_init = 20.0;
  std::optional<Parameters> init;  // warm start; N(0,1) draws otherwise
};

struct FitResult {
  Parameters params;
  VariationalState state;
  std::vector<double> bound_trace;  // bound after each e-step, non-decreasing
  int n_iters = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  bool degenerate = false;  // some eta_g < 1e-6 at the end
  int ridge_retries = 0;    // m-step systems that needed regularization

  double final_bound() const {
    return bound_trace.empty() ? -std::numeric_limits<double>::infinity()
                               : bound_trace.back();
  }
};

// lambda(xi) = tanh(xi/2) / (4 xi), the curvature of the quadratic logistic
// bound; even in xi, with the removable singularity at 0 evaluated as 1/8.
double jj_lambda(double xi);

// Evidence lower bound on log p(y_row | z_g = 1) at a given Gaussian
// posterior (mean, cov) and variational parameters xi_row. Never exceeds the
// exact marginal log-likelihood of the row. For latent_dim == 0 the mean/cov
// arguments are ignored and the bound is exact at xi = |b|.
double node_bound(const Parameters& p, int g,
                  const Eigen::Ref<const Eigen::VectorXi>& y_row,
                  const Eigen::VectorXd& xi_row, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov);

// One variational e-step: per (n,g) update the Gaussian posterior given xi,
// then xi given the posterior, then the responsibilities. Fills node_bounds
// and total_bound. The bound never decreases.
VariationalState e_step(const IncidenceMatrix& m, const Parameters& p,
                        VariationalState state);

// Closed-form m-step. eta_g = mean responsibility. For D >= 1 each (r,g)
// intercept/slope block solves the weighted least squares system of the
// quadratic bound; the common-slope variant solves one joint system of size
// G + D per receiver. For D == 0 the exact logit closed form applies.
// Singular systems are retried with a small ridge (counted in *ridge_retries).
// prev, when given, supplies values for groups with vanishing weight.
Parameters m_step(const IncidenceMatrix& m, const VariationalState& s,
                  const ModelSpec& spec, const Parameters* prev = nullptr,
                  int* ridge_retries = nullptr);

// Alternate e/m steps until the bound change falls below cfg.tol (or the
// m-step becomes stationary), at most cfg.max_iter iterations. Deterministic
// given cfg.seed. Non-convergence is reported, not thrown.
FitResult fit(const IncidenceMatrix& m, const ModelSpec& spec,
              const FitConfig& cfg);

// Random initial parameters: intercepts and slopes i.i.d. N(0,1) (one shared
// slope draw for common-slope specs), eta uniform.
Parameters random_init(const ModelSpec& spec, int n_receivers, std::uint64_t seed);

// Flip latent dimension signs so the largest-magnitude slope entry of each
// dimension is positive; applied to params and state together.
void apply_sign_convention(Parameters& p, VariationalState& s);

}  // namespace mlta
