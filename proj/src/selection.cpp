#include "mlta/selection.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "mlta/parallel.hpp"
#include "mlta/quadrature.hpp"

namespace mlta {

double bic(double loglik, long n_free_params, int n_senders) {
  if (n_senders <= 0) throw std::invalid_argument("bic: need n_senders >= 1");
  return -2.0 * loglik + static_cast<double>(n_free_params) * std::log(n_senders);
}

void GridSpec::validate() const {
  if (g_min < 1 || g_max < g_min)
    throw std::invalid_argument("grid: need 1 <= g_min <= g_max");
  if (d_min < 0 || d_max < d_min)
    throw std::invalid_argument("grid: need 0 <= d_min <= d_max");
  if (!unconstrained && !common)
    throw std::invalid_argument("grid: at least one slope variant required");
  if (n_starts < 1) throw std::invalid_argument("grid: need n_starts >= 1");
  if (gh_points < 1) throw std::invalid_argument("grid: need gh_points >= 1");
}

std::vector<ModelSpec> GridSpec::cells() const {
  validate();
  std::vector<ModelSpec> out;
  for (int g = g_min; g <= g_max; ++g) {
    for (int d = d_min; d <= d_max; ++d) {
      if (d == 0) {
        out.push_back({g, 0, false});
        continue;
      }
      if (unconstrained) out.push_back({g, d, false});
      if (common) {
        if (g > 1)
          out.push_back({g, d, true});
        else if (!unconstrained)
          // with one group the variants coincide; fit it once
          out.push_back({g, d, false});
      }
    }
  }
  return out;
}

int pick_best_start(const std::vector<StartRecord>& starts) {
  constexpr double tie = 1e-6;
  int best = -1;
  for (int i = 0; i < static_cast<int>(starts.size()); ++i) {
    if (starts[i].failed) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const StartRecord& a = starts[i];
    const StartRecord& b = starts[best];
    if (a.loglik > b.loglik + tie) {
      best = i;
    } else if (a.loglik >= b.loglik - tie) {
      if (!a.degenerate && b.degenerate)
        best = i;
      else if (a.degenerate == b.degenerate && a.seed < b.seed)
        best = i;
    }
  }
  return best;
}

int pick_winner(const std::vector<SelectionRecord>& records) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    if (records[i].failed) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const SelectionRecord& a = records[i];
    const SelectionRecord& b = records[best];
    if (a.bic < b.bic) {
      best = i;
    } else if (a.bic == b.bic) {
      if (a.n_free_params != b.n_free_params) {
        if (a.n_free_params < b.n_free_params) best = i;
      } else if (a.spec.n_groups != b.spec.n_groups) {
        if (a.spec.n_groups < b.spec.n_groups) best = i;
      } else if (a.spec.latent_dim < b.spec.latent_dim) {
        best = i;
      }
    }
  }
  return best;
}

const SelectionRecord& SelectionTable::winning() const {
  if (winner < 0 || winner >= static_cast<int>(records.size()))
    throw std::logic_error("selection table has no winner");
  return records[winner];
}

namespace {

struct Job {
  int cell;
  int start;
};

SelectionRecord assemble_cell(const ModelSpec& spec,
                              std::vector<StartRecord> starts,
                              std::vector<FitResult> fits, int n_senders,
                              int n_receivers) {
  SelectionRecord rec;
  rec.spec = spec;
  rec.starts = std::move(starts);
  rec.best_start = pick_best_start(rec.starts);
  rec.n_free_params = count_free_params(spec, n_receivers);
  if (rec.best_start < 0) {
    rec.failed = true;
    return rec;
  }
  rec.loglik = rec.starts[rec.best_start].loglik;
  rec.bic = bic(rec.loglik, rec.n_free_params, n_senders);
  rec.best_fit = std::move(fits[rec.best_start]);
  return rec;
}

void run_start(const IncidenceMatrix& m, const ModelSpec& spec,
               const GridSpec& grid, const GHRule& rule, int start,
               StartRecord& sr, FitResult& out) {
  FitConfig cfg = grid.fit;
  cfg.seed = grid.base_seed + static_cast<std::uint64_t>(start);
  cfg.init.reset();
  sr.seed = cfg.seed;
  try {
    FitResult fr = fit(m, spec, cfg);
    sr.bound = fr.final_bound();
    sr.loglik = loglik_gh(m, fr.params, rule);
    sr.converged = fr.converged;
    sr.degenerate = fr.degenerate;
    sr.n_iters = fr.n_iters;
    out = std::move(fr);
  } catch (const std::exception&) {
    sr.failed = true;
  }
}

}  // namespace

SelectionRecord fit_cell(const IncidenceMatrix& m, const ModelSpec& rawspec,
                         const GridSpec& grid) {
  grid.validate();
  const ModelSpec spec = rawspec.normalized();
  const int S = grid.n_starts;
  std::vector<StartRecord> starts(S);
  std::vector<FitResult> fits(S);
  const GHRule rule = gh_rule(grid.gh_points, spec.latent_dim);

  parallel_for(S, grid.n_threads, [&](long s) {
    run_start(m, spec, grid, rule, static_cast<int>(s), starts[s], fits[s]);
  });

  return assemble_cell(spec, std::move(starts), std::move(fits),
                       static_cast<int>(m.n_senders()),
                       static_cast<int>(m.n_receivers()));
}

SelectionTable run_grid(const IncidenceMatrix& m, const GridSpec& grid) {
  grid.validate();
  const std::vector<ModelSpec> specs = grid.cells();
  const int C = static_cast<int>(specs.size());
  const int S = grid.n_starts;

  // one flat pool over (cell, start) so wide grids keep every core busy
  std::vector<Job> jobs;
  jobs.reserve(static_cast<std::size_t>(C) * S);
  for (int c = 0; c < C; ++c)
    for (int s = 0; s < S; ++s) jobs.push_back({c, s});

  std::vector<GHRule> rules(C);
  for (int c = 0; c < C; ++c) rules[c] = gh_rule(grid.gh_points, specs[c].latent_dim);

  std::vector<std::vector<StartRecord>> starts(C, std::vector<StartRecord>(S));
  std::vector<std::vector<FitResult>> fits(C, std::vector<FitResult>(S));

  parallel_for(static_cast<long>(jobs.size()), grid.n_threads, [&](long j) {
    const Job job = jobs[j];
    run_start(m, specs[job.cell], grid, rules[job.cell], job.start,
              starts[job.cell][job.start], fits[job.cell][job.start]);
  });

  SelectionTable table;
  table.n_senders = static_cast<int>(m.n_senders());
  table.records.reserve(C);
  for (int c = 0; c < C; ++c)
    table.records.push_back(assemble_cell(specs[c], std::move(starts[c]),
                                          std::move(fits[c]),
                                          static_cast<int>(m.n_senders()),
                                          static_cast<int>(m.n_receivers())));
  table.winner = pick_winner(table.records);
  return table;
}

}  // namespace mlta
