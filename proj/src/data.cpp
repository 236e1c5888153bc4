#include "mlta/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace mlta {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

void check_unique(const std::vector<std::string>& labels, const char* axis) {
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second)
      throw std::invalid_argument(std::string("duplicate ") + axis +
                                  " label: " + l);
  }
}

}  // namespace

void IncidenceMatrix::validate() const {
  if (cells.rows() < 1 || cells.cols() < 1)
    throw std::invalid_argument("incidence matrix must be at least 1x1");
  if (static_cast<Eigen::Index>(sender_labels.size()) != cells.rows())
    throw std::invalid_argument("sender label count does not match rows");
  if (static_cast<Eigen::Index>(receiver_labels.size()) != cells.cols())
    throw std::invalid_argument("receiver label count does not match columns");
  for (Eigen::Index i = 0; i < cells.rows(); ++i)
    for (Eigen::Index j = 0; j < cells.cols(); ++j)
      if (cells(i, j) != 0 && cells(i, j) != 1)
        throw std::invalid_argument(
            "non-binary cell at row " + std::to_string(i + 1) + ", column " +
            std::to_string(j + 1) + ": " + std::to_string(cells(i, j)));
  check_unique(sender_labels, "sender");
  check_unique(receiver_labels, "receiver");
}

std::vector<std::string> default_labels(const std::string& prefix, int count) {
  int width = 1;
  for (int v = count; v >= 10; v /= 10) ++width;
  std::vector<std::string> out;
  out.reserve(count);
  for (int i = 1; i <= count; ++i) {
    std::string num = std::to_string(i);
    out.push_back(prefix + std::string(width - num.size(), '0') + num);
  }
  return out;
}

IncidenceMatrix load_edge_list(const std::string& path,
                               std::size_t* n_duplicates) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error("empty edge list: " + path);

  std::size_t start = 0;
  {
    const auto head = split_csv_line(lines[0]);
    if (head.size() == 2) {
      std::string a = head[0], b = head[1];
      std::transform(a.begin(), a.end(), a.begin(), ::tolower);
      std::transform(b.begin(), b.end(), b.begin(), ::tolower);
      if (a == "sender" && b == "receiver") start = 1;
    }
  }
  if (start >= lines.size())
    throw std::runtime_error("edge list has a header but no rows: " + path);

  std::vector<std::string> senders, receivers;
  std::unordered_map<std::string, int> sender_idx, receiver_idx;
  std::unordered_set<long long> seen_pairs;
  std::vector<std::pair<int, int>> edges;
  std::size_t duplicates = 0;

  for (std::size_t i = start; i < lines.size(); ++i) {
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw std::runtime_error("malformed edge list row at line " +
                               std::to_string(i + 1) + ": " + lines[i]);
    auto sit = sender_idx.find(fields[0]);
    if (sit == sender_idx.end()) {
      sit = sender_idx.emplace(fields[0], static_cast<int>(senders.size())).first;
      senders.push_back(fields[0]);
    }
    auto rit = receiver_idx.find(fields[1]);
    if (rit == receiver_idx.end()) {
      rit = receiver_idx.emplace(fields[1], static_cast<int>(receivers.size())).first;
      receivers.push_back(fields[1]);
    }
    const long long key =
        static_cast<long long>(sit->second) * (1LL << 32) + rit->second;
    if (seen_pairs.insert(key).second)
      edges.emplace_back(sit->second, rit->second);
    else
      ++duplicates;
  }

  IncidenceMatrix m;
  m.cells = Eigen::MatrixXi::Zero(senders.size(), receivers.size());
  for (const auto& [s, r] : edges) m.cells(s, r) = 1;
  m.sender_labels = std::move(senders);
  m.receiver_labels = std::move(receivers);
  if (n_duplicates) *n_duplicates = duplicates;
  m.validate();
  return m;
}

IncidenceMatrix load_matrix(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error("empty matrix file: " + path);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(lines.size());
  for (const auto& l : lines) rows.push_back(split_csv_line(l));

  // Header row: any non-numeric token beyond the first cell. The first cell is
  // ignored because it may be an (empty) corner cell or a sender label.
  bool has_header = false;
  for (std::size_t j = 1; j < rows[0].size(); ++j)
    if (!is_number(rows[0][j])) has_header = true;

  const std::size_t first_data = has_header ? 1 : 0;
  if (first_data >= rows.size())
    throw std::runtime_error("matrix file has a header but no rows: " + path);

  // Label column: first token of the first data row is non-numeric.
  const bool has_label_col = !rows[first_data].empty() && !is_number(rows[first_data][0]);

  const std::size_t n_rows = rows.size() - first_data;
  const std::size_t n_cols = rows[first_data].size() - (has_label_col ? 1 : 0);
  if (n_cols == 0) throw std::runtime_error("matrix file has no data columns: " + path);

  IncidenceMatrix m;
  m.cells.resize(n_rows, n_cols);
  std::vector<std::string> sender_labels;

  for (std::size_t i = 0; i < n_rows; ++i) {
    const auto& row = rows[first_data + i];
    if (row.size() != n_cols + (has_label_col ? 1 : 0))
      throw std::runtime_error("ragged matrix row at line " +
                               std::to_string(first_data + i + 1) + ": expected " +
                               std::to_string(n_cols + (has_label_col ? 1 : 0)) +
                               " fields, got " + std::to_string(row.size()));
    if (has_label_col) sender_labels.push_back(row[0]);
    for (std::size_t j = 0; j < n_cols; ++j) {
      const std::string& tok = row[j + (has_label_col ? 1 : 0)];
      if (!is_number(tok))
        throw std::runtime_error("non-numeric cell at row " + std::to_string(i + 1) +
                                 ", column " + std::to_string(j + 1) + ": " + tok);
      const double v = std::stod(tok);
      if (v != 0.0 && v != 1.0)
        throw std::runtime_error("non-binary cell at row " + std::to_string(i + 1) +
                                 ", column " + std::to_string(j + 1) + ": " + tok);
      m.cells(i, j) = static_cast<int>(v);
    }
  }

  if (has_header) {
    auto head = rows[0];
    // Drop the corner cell when the header spans the label column too.
    if (head.size() == n_cols + 1) head.erase(head.begin());
    if (head.size() != n_cols)
      throw std::runtime_error("header width does not match data columns: " + path);
    m.receiver_labels = head;
  } else {
    m.receiver_labels = default_labels("E", static_cast<int>(n_cols));
  }
  m.sender_labels = has_label_col
                        ? std::move(sender_labels)
                        : default_labels("T", static_cast<int>(n_rows));
  m.validate();
  return m;
}

void write_matrix(const IncidenceMatrix& m, const std::string& path) {
  for (const auto& l : m.sender_labels)
    if (l.find(',') != std::string::npos || l.find('\n') != std::string::npos)
      throw std::invalid_argument("sender label contains a delimiter: " + l);
  for (const auto& l : m.receiver_labels)
    if (l.find(',') != std::string::npos || l.find('\n') != std::string::npos)
      throw std::invalid_argument("receiver label contains a delimiter: " + l);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& l : m.receiver_labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < m.cells.rows(); ++i) {
    out << m.sender_labels[i];
    for (Eigen::Index j = 0; j < m.cells.cols(); ++j) out << ',' << m.cells(i, j);
    out << '\n';
  }
}

NetworkSummary summarize(const IncidenceMatrix& m) {
  NetworkSummary s;
  s.sender_degrees = m.cells.rowwise().sum();
  s.receiver_degrees = m.cells.colwise().sum().transpose();
  s.n_edges = m.cells.sum();
  s.n_isolated_senders = (s.sender_degrees.array() == 0).count();
  return s;
}

}  // namespace mlta
