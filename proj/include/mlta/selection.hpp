#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"
#include "mlta/variational.hpp"

namespace mlta {

// Bayesian information criterion, -2 loglik + k log(N); smaller is better.
double bic(double loglik, long n_free_params, int n_senders);

// Model grid: every (G, D) cell in the ranges, with the slope variants listed
// below. D == 0 cells are fitted once per G since the variants coincide there.
struct GridSpec {
  int g_min = 1;
  int g_max = 4;
  int d_min = 0;
  int d_max = 3;
  bool unconstrained = true;  // per-group slopes
  bool common = true;         // shared slopes
  int n_starts = 10;
  std::uint64_t base_seed = 1;  // start s uses seed base_seed + s
  int gh_points = 21;           // quadrature points per latent dimension
  int n_threads = 0;            // 0 = hardware concurrency
  FitConfig fit;                // per-start settings; its seed field is ignored

  void validate() const;
  std::vector<ModelSpec> cells() const;
};

// One random start of one grid cell.
struct StartRecord {
  std::uint64_t seed = 0;
  double bound = -std::numeric_limits<double>::infinity();
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  bool degenerate = false;
  bool failed = false;  // fit threw; loglik/bound meaningless
  int n_iters = 0;
};

// One grid cell after multi-start fitting. A cell where every start failed
// numerically is flagged and never wins.
struct SelectionRecord {
  ModelSpec spec;
  std::vector<StartRecord> starts;
  int best_start = -1;
  long n_free_params = 0;
  double loglik = -std::numeric_limits<double>::infinity();
  double bic = std::numeric_limits<double>::infinity();
  bool failed = false;
  FitResult best_fit;
};

struct SelectionTable {
  std::vector<SelectionRecord> records;
  int winner = -1;
  int n_senders = 0;

  const SelectionRecord& winning() const;
};

// Pick the best start: highest GH log-likelihood, with ties (within 1e-6)
// broken in favour of non-degenerate fits and then the lowest seed. Failed
// starts never win; returns -1 if every start failed.
int pick_best_start(const std::vector<StartRecord>& starts);

// Pick the winning cell: smallest BIC, ties broken by fewer parameters, then
// fewer groups, then fewer dimensions. Failed cells are skipped; returns -1
// if every cell failed.
int pick_winner(const std::vector<SelectionRecord>& records);

// Fit one cell with grid.n_starts random starts.
SelectionRecord fit_cell(const IncidenceMatrix& m, const ModelSpec& spec,
                         const GridSpec& grid);

// Fit the whole grid. Starts across all cells form one flat job pool; results
// are identical for any thread count.
SelectionTable run_grid(const IncidenceMatrix& m, const GridSpec& grid);

}  // namespace mlta
