// Regenerates data/noordin.csv from its frozen generator constants.
//
// The bundled network is a calibrated synthetic stand-in for the 79x45
// Noordin Top affiliation data (senders = actors, receivers = events; the
// original is distributed in the R package `manet` and is not redistributed
// here). Two latent factions attend mostly disjoint event blocks, a handful
// of events are shared, five actors attend nothing, and one event (E09) is
// frequented almost exclusively by the second faction. Every constant below
// is frozen: the committed CSV must regenerate byte for byte.
#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"
#include "mlta/rng.hpp"

namespace {

constexpr std::uint64_t kSeed = 290;
constexpr int kGroupOne = 42;      // faction sizes; rows 75..79 stay empty
constexpr int kGroupTwo = 32;
constexpr int kActors = 79;
constexpr int kEvents = 45;
constexpr double kAwayScale = 0.7;    // cross-faction attendance damping
constexpr double kSharedBoost = 0.8;  // shared-event attendance damping
constexpr double kSlopeScale = 1.25;  // latent-trait slope scale
constexpr double kGroupOneShift = 0.12;  // additive logit offset, group 1

struct EventProfile {
  double p1;  // attendance probability at theta = 0, group 1
  double p2;  // group 2
  double w;   // common slope
};

std::vector<EventProfile> event_profiles() {
  // home-block attendance probabilities and slope texture
  const double p1h[20] = {0.16, 0.22, 0.13, 0.19, 0.25, 0.11, 0.17, 0.23, 0.14, 0.20,
                          0.28, 0.12, 0.18, 0.24, 0.15, 0.21, 0.13, 0.26, 0.17, 0.22};
  const double away[10] = {0.015, 0.03, 0.02, 0.025, 0.015,
                           0.02,  0.03, 0.015, 0.025, 0.02};
  const double p2h[17] = {0.18, 0.24, 0.13, 0.20, 0.27, 0.12, 0.17, 0.23, 0.14,
                          0.21, 0.11, 0.19, 0.25, 0.15, 0.22, 0.16, 0.20};
  const double shared[7] = {0.12, 0.14, 0.10, 0.13, 0.11, 0.14, 0.10};
  const double ws[45] = {1.05, 0.70, 1.30, 0.55, 0.90, -0.45, 1.15, 0.80, 0.15,
                         0.65, 1.25, 0.10, 0.95, 0.60, 1.10, -0.35, 0.75, 1.20,
                         0.85, 0.05, 1.00, 0.90, 0.65, 1.15, 0.55, 1.30, 0.18,
                         0.80, 1.05, 0.60, -0.50, 0.95, 1.25, 0.70, 0.12, 1.10,
                         0.85, 0.60, 1.00, 0.75, 1.20, 0.08, 0.90, 0.65, 1.15};

  std::vector<EventProfile> events(kEvents);
  int i1 = 0, i2 = 0, is = 0, ia = 0;
  for (int r = 0; r < kEvents; ++r) {
    EventProfile e;
    e.w = ws[r] * kSlopeScale;
    if (r == 8) {  // the one event dominated by the second faction
      e.p1 = 0.025;
      e.p2 = 0.47;
      e.w = 0.10;
    } else if (r < 21) {  // group-1 home block (events 1..8, 10..21)
      e.p1 = p1h[i1++];
      e.p2 = std::min(away[ia++ % 10] * kAwayScale, 0.12);
    } else if (r < 38) {  // group-2 home block (events 22..38)
      e.p2 = p2h[i2++];
      e.p1 = std::min(away[ia++ % 10] * kAwayScale, 0.12);
    } else {  // events both factions attend
      e.p1 = e.p2 = std::min(shared[is++] * kSharedBoost, 0.30);
    }
    events[r] = e;
  }
  return events;
}

mlta::IncidenceMatrix build_snapshot() {
  const std::vector<EventProfile> events = event_profiles();
  Eigen::MatrixXd intercepts(2, kEvents);
  Eigen::VectorXd slope(kEvents);
  for (int r = 0; r < kEvents; ++r) {
    intercepts(0, r) = mlta::logit(events[r].p1) + kGroupOneShift;
    intercepts(1, r) = mlta::logit(events[r].p2);
    slope[r] = events[r].w;
  }

  const int n_active = kGroupOne + kGroupTwo;
  std::vector<int> group(n_active);
  for (int i = 0; i < n_active; ++i) group[i] = i < kGroupOne ? 0 : 1;

  // ancestral sampling on fixed substreams (same layout as sample_network)
  Eigen::VectorXd theta(n_active);
  {
    mlta::RandomStream rng(kSeed, 2);
    for (int i = 0; i < n_active; ++i) theta[i] = rng.normal();
  }
  Eigen::MatrixXi cells(n_active, kEvents);
  {
    mlta::RandomStream rng(kSeed, 3);
    for (int i = 0; i < n_active; ++i)
      for (int r = 0; r < kEvents; ++r) {
        const double x = intercepts(group[i], r) + slope[r] * theta[i];
        cells(i, r) = rng.bernoulli(mlta::logistic(x)) ? 1 : 0;
      }
  }

  // fixed shuffle so the factions interleave like a field roster would
  std::vector<int> order(n_active);
  std::iota(order.begin(), order.end(), 0);
  {
    mlta::RandomStream rng(kSeed, 4);
    for (int i = n_active - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }
  }

  // pin the two highest-degree group-1 actors to rows 54 and 21 (1-based)
  std::vector<int> deg(n_active);
  for (int i = 0; i < n_active; ++i) deg[i] = cells.row(i).sum();
  int top = -1, second = -1;
  for (int i = 0; i < n_active; ++i) {
    if (group[i] != 0) continue;
    if (top < 0 || deg[i] > deg[top]) {
      second = top;
      top = i;
    } else if (second < 0 || deg[i] > deg[second]) {
      second = i;
    }
  }
  const auto move_to = [&order](int actor, int pos) {
    const auto it = std::find(order.begin(), order.end(), actor);
    std::swap(*it, order[pos]);
  };
  move_to(top, 53);
  move_to(second, 20);

  mlta::IncidenceMatrix m;
  m.cells.resize(kActors, kEvents);
  for (int i = 0; i < n_active; ++i) m.cells.row(i) = cells.row(order[i]);
  for (int i = n_active; i < kActors; ++i) m.cells.row(i).setZero();
  m.sender_labels = mlta::default_labels("A", kActors);
  m.receiver_labels = mlta::default_labels("E", kEvents);
  m.validate();
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "data/noordin.csv";
  const mlta::IncidenceMatrix m = build_snapshot();
  mlta::write_matrix(m, path);
  const mlta::NetworkSummary s = mlta::summarize(m);
  std::printf("%s: %d x %d, %ld edges, %ld empty rows\n", path.c_str(),
              static_cast<int>(m.n_senders()), static_cast<int>(m.n_receivers()),
              s.n_edges, s.n_isolated_senders);
  return 0;
}
