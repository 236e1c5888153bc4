#include "mlta/model.hpp"

#include <stdexcept>
#include <string>

namespace mlta {

void ModelSpec::validate() const {
  if (n_groups < 1) throw std::invalid_argument("n_groups must be >= 1");
  if (latent_dim < 0) throw std::invalid_argument("latent_dim must be >= 0");
}

ModelSpec ModelSpec::normalized() const {
  ModelSpec s = *this;
  if (s.latent_dim == 0) s.common_slope = false;
  return s;
}

void Parameters::validate() const {
  spec.validate();
  const int G = spec.n_groups;
  const int D = spec.latent_dim;
  if (eta.size() != G) throw std::invalid_argument("eta size does not match n_groups");
  if (intercepts.rows() != G)
    throw std::invalid_argument("intercepts rows do not match n_groups");
  if (static_cast<int>(slopes.size()) != G)
    throw std::invalid_argument("slopes count does not match n_groups");
  const int R = n_receivers();
  if (R < 1) throw std::invalid_argument("at least one receiver required");
  for (const auto& w : slopes)
    if (w.rows() != R || w.cols() != D)
      throw std::invalid_argument("slope matrix shape mismatch");
  if (!eta.allFinite() || !intercepts.allFinite())
    throw std::invalid_argument("non-finite parameter");
  for (const auto& w : slopes)
    if (!w.allFinite()) throw std::invalid_argument("non-finite slope");
  if ((eta.array() < 0.0).any())
    throw std::invalid_argument("negative mixing proportion");
  if (std::abs(eta.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixing proportions must sum to 1");
  if (spec.normalized().common_slope) {
    for (int g = 1; g < G; ++g)
      if (slopes[g] != slopes[0])
        throw std::invalid_argument("common-slope model with unequal slopes");
  }
}

double response_probability(const Parameters& p, int g, int r,
                            const Eigen::VectorXd& theta) {
  if (g < 0 || g >= p.n_groups()) throw std::out_of_range("group index");
  if (r < 0 || r >= p.n_receivers()) throw std::out_of_range("receiver index");
  if (theta.size() != p.latent_dim())
    throw std::invalid_argument("theta dimension mismatch");
  double x = p.intercepts(g, r);
  if (p.latent_dim() > 0) x += p.slopes[g].row(r).dot(theta);
  return logistic(x);
}

double conditional_loglik_at_theta(const Parameters& p, int g,
                                   const Eigen::Ref<const Eigen::VectorXi>& y_row,
                                   const Eigen::VectorXd& theta) {
  if (g < 0 || g >= p.n_groups()) throw std::out_of_range("group index");
  const int R = p.n_receivers();
  if (y_row.size() != R) throw std::invalid_argument("y_row length mismatch");
  double ll = 0.0;
  for (int r = 0; r < R; ++r) {
    double x = p.intercepts(g, r);
    if (p.latent_dim() > 0) x += p.slopes[g].row(r).dot(theta);
    ll += log_logistic(y_row[r] == 1 ? x : -x);
  }
  return ll;
}

long count_free_params(const ModelSpec& spec, int n_receivers) {
  const ModelSpec s = spec.normalized();
  s.validate();
  const long G = s.n_groups, D = s.latent_dim, R = n_receivers;
  const long block = D == 0 ? 0 : R * D - D * (D - 1) / 2;
  const long slope_params = D == 0 ? 0 : (s.common_slope ? block : G * block);
  return (G - 1) + G * R + slope_params;
}

}  // namespace mlta
