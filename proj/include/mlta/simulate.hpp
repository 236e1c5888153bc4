#pragma once

#include <cstdint>

#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta {

struct SyntheticSample {
  IncidenceMatrix matrix;
  std::vector<int> true_groups;  // length N, 0-based
  Eigen::MatrixXd true_thetas;   // N x D
  Parameters params;
  std::uint64_t seed = 0;
};

// Exact ancestral sampling: group indicators first, then latent traits, then
// cells in row-major order, each from its own fixed substream (layout v1:
// groups = 1, thetas = 2, cells = 3). Deterministic given the seed.
SyntheticSample sample_network(const Parameters& p, int n_senders,
                               std::uint64_t seed);

}  // namespace mlta
