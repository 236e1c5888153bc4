#pragma once

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <vector>

namespace mlta {

// One cell of the model grid: G groups, D latent dimensions, and whether the
// slope matrix is shared across groups. common_slope is meaningful only for
// latent_dim >= 1 and is ignored (treated as false) when latent_dim == 0.
struct ModelSpec {
  int n_groups = 1;
  int latent_dim = 0;
  bool common_slope = false;

  void validate() const;
  // common_slope squashed to false when latent_dim == 0
  ModelSpec normalized() const;
  bool operator==(const ModelSpec&) const = default;
};

// Estimable quantities: mixing proportions eta_g, intercepts b_rg and slopes
// w_rg. For a common-slope model all slope matrices are kept identical.
struct Parameters {
  Eigen::VectorXd eta;                  // G, simplex
  Eigen::MatrixXd intercepts;           // G x R
  std::vector<Eigen::MatrixXd> slopes;  // G matrices, each R x D
  ModelSpec spec;

  int n_groups() const { return static_cast<int>(eta.size()); }
  int n_receivers() const { return static_cast<int>(intercepts.cols()); }
  int latent_dim() const { return spec.latent_dim; }
  void validate() const;  // throws std::invalid_argument
};

// Overflow-safe logistic, clamped to the open unit interval.
inline double logistic(double x) {
  double v;
  if (x >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    v = e / (1.0 + e);
  }
  const double lo = std::numeric_limits<double>::min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon();
  return v < lo ? lo : (v > hi ? hi : v);
}

// log(logistic(x)), stable for large |x|
inline double log_logistic(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// pi_rg(theta) = logistic(b_rg + w_rg . theta)
double response_probability(const Parameters& p, int g, int r,
                            const Eigen::VectorXd& theta);

// sum_r [ y log pi + (1-y) log(1-pi) ] at a fixed latent position
double conditional_loglik_at_theta(const Parameters& p, int g,
                                   const Eigen::Ref<const Eigen::VectorXi>& y_row,
                                   const Eigen::VectorXd& theta);

// Free parameter count: (G-1) mixing + G*R intercepts + slope block, where a
// distinct R x D slope matrix contributes R*D - D*(D-1)/2 after removing the
// rotational freedom of the latent space.
long count_free_params(const ModelSpec& spec, int n_receivers);

}  // namespace mlta
