#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

namespace mlta {

// N x R binary incidence matrix between sending nodes (actors) and
// receiving nodes (events). Immutable by convention after construction;
// safe to share read-only across concurrent fits.
struct IncidenceMatrix {
  Eigen::MatrixXi cells;                      // entries in {0,1}
  std::vector<std::string> sender_labels;     // N unique labels
  std::vector<std::string> receiver_labels;   // R unique labels

  Eigen::Index n_senders() const { return cells.rows(); }
  Eigen::Index n_receivers() const { return cells.cols(); }

  // Throws std::invalid_argument on any violated invariant
  // (non-binary cell, duplicate label, empty axis, label/shape mismatch).
  void validate() const;
};

struct NetworkSummary {
  Eigen::VectorXi sender_degrees;
  Eigen::VectorXi receiver_degrees;
  long n_edges = 0;
  long n_isolated_senders = 0;
};

// Two-column CSV `sender,receiver` (header optional). Cell = 1 iff the pair
// appears at least once; duplicates collapse to a single edge and are counted
// in *n_duplicates when given. Label order is first appearance.
IncidenceMatrix load_edge_list(const std::string& path,
                               std::size_t* n_duplicates = nullptr);

// Rectangular CSV of 0/1 cells. An optional header row (receiver labels) and
// optional first column (sender labels) are auto-detected by non-numeric
// content. Missing labels default to T01..TN / E01..ER.
IncidenceMatrix load_matrix(const std::string& path);

// Canonical form: header row with receiver labels (empty corner cell),
// one row per sender starting with its label.
void write_matrix(const IncidenceMatrix& m, const std::string& path);

NetworkSummary summarize(const IncidenceMatrix& m);

// Zero-padded default labels: prefix "T" for senders, "E" for receivers.
std::vector<std::string> default_labels(const std::string& prefix, int count);

}  // namespace mlta
