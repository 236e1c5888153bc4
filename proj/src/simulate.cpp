#include "mlta/simulate.hpp"

#include <stdexcept>

#include "mlta/rng.hpp"

namespace mlta {

namespace {
// RNG stream ids (layout v1); stream 0 belongs to parameter initialization
constexpr std::uint64_t kStreamGroups = 1;
constexpr std::uint64_t kStreamThetas = 2;
constexpr std::uint64_t kStreamCells = 3;
}  // namespace

SyntheticSample sample_network(const Parameters& p, int n_senders,
                               std::uint64_t seed) {
  p.validate();
  if (n_senders < 1) throw std::invalid_argument("need n_senders >= 1");
  const int N = n_senders;
  const int R = p.n_receivers();
  const int G = p.n_groups();
  const int D = p.latent_dim();

  SyntheticSample s;
  s.params = p;
  s.seed = seed;
  s.true_groups.resize(N);
  s.true_thetas.resize(N, D);
  s.matrix.cells.resize(N, R);
  s.matrix.sender_labels = default_labels("T", N);
  s.matrix.receiver_labels = default_labels("E", R);

  {
    RandomStream rng(seed, kStreamGroups);
    for (int n = 0; n < N; ++n) {
      const double u = rng.uniform();  // in (0, 1]
      double cum = 0.0;
      int g = G - 1;
      for (int j = 0; j < G; ++j) {
        cum += p.eta[j];
        if (u <= cum) {
          g = j;
          break;
        }
      }
      s.true_groups[n] = g;
    }
  }
  {
    RandomStream rng(seed, kStreamThetas);
    for (int n = 0; n < N; ++n)
      for (int d = 0; d < D; ++d) s.true_thetas(n, d) = rng.normal();
  }
  {
    RandomStream rng(seed, kStreamCells);
    for (int n = 0; n < N; ++n) {
      const int g = s.true_groups[n];
      for (int r = 0; r < R; ++r) {
        double x = p.intercepts(g, r);
        if (D > 0) x += p.slopes[g].row(r).dot(s.true_thetas.row(n));
        s.matrix.cells(n, r) = rng.bernoulli(logistic(x)) ? 1 : 0;
      }
    }
  }
  s.matrix.validate();
  return s;
}

}  // namespace mlta
