#pragma once

#include <string>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"
#include "mlta/quadrature.hpp"
#include "mlta/variational.hpp"

namespace mlta {

// MAP group assignment per sender. map_group is 0-based; serializers shift to
// 1-based labels. Ties go to the lowest index.
struct MembershipReport {
  Eigen::MatrixXd posterior;   // N x G, rows on the simplex
  std::vector<int> map_group;  // length N
  Eigen::VectorXd map_confidence;
};

// Posterior latent-trait moments per (sender, group), straight from the final
// variational state.
struct TraitScores {
  std::vector<Eigen::MatrixXd> mean;              // per group, N x D
  std::vector<std::vector<Eigen::MatrixXd>> cov;  // [g][n], D x D
};

struct JackknifeSE {
  std::string target;  // e.g. "eta[1]", "intercept[2,9]", "slope[1,3,1]"
  double estimate = 0.0;
  double se = 0.0;
  int n_replicates = 0;
};

struct JackknifeTargets {
  bool eta = true;
  bool intercepts = false;
  bool slopes = false;
};

struct JackknifeConfig {
  FitConfig fit;      // replicate settings; init is overridden per replicate
  int n_threads = 0;  // 0 = hardware concurrency
  double skip_threshold = 0.10;
};

struct JackknifeReport {
  std::vector<JackknifeSE> entries;
  int n_skipped = 0;
  bool unreliable = false;
};

MembershipReport memberships(const FitResult& fit);

// Requires latent_dim >= 1.
TraitScores trait_scores(const FitResult& fit);

// Entry (r, k) = w_rg . w_kg. Requires latent_dim >= 1.
Eigen::MatrixXd dependence_matrix(const FitResult& fit, int g);

// log of P(y_r = 1, y_k = 1 | group g) / [P(y_r = 1 | g) P(y_k = 1 | g)],
// all three integrals over the latent trait by the given GH rule. Zero under
// within-group independence; returns NaN when an integral underflows below
// exp(-690). Symmetric in (r, k) exactly.
double log_lift(const FitResult& fit, int g, int r, int k, const GHRule& rule);

// All pairs at once; diagonal set to 0.
Eigen::MatrixXd log_lift_matrix(const FitResult& fit, int g, const GHRule& rule);

// Entry (g, r) = logistic(b_rg): attendance probability of the median actor.
Eigen::MatrixXd median_actor_prob(const FitResult& fit);

// Leave-one-sender-out jackknife. Each replicate warm-starts at the reference
// parameters, group labels are realigned to the reference by best-permutation
// responsibility agreement and slope signs per dimension. Non-converged
// replicates are skipped; more than skip_threshold skipped flags the report.
JackknifeReport jackknife_se(const IncidenceMatrix& m, const ModelSpec& spec,
                             const FitResult& ref_fit,
                             const JackknifeTargets& targets,
                             const JackknifeConfig& cfg);

}  // namespace mlta
