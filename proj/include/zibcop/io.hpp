#pragma once

/**
 * @file io.hpp
 * @brief Delimited-text ingestion of abundance and covariate tables,
 *        filtering and total-sum scaling, covariate alignment, and the
 *        tabular writers used by the command-line tool.
 */

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "zibcop/error.hpp"
#include "zibcop/margin_zib.hpp"
#include "zibcop/network.hpp"

namespace zibcop {

/// 17 significant digits, enough to round-trip a double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Delimited text
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data() + (s[0] == '+' ? 1 : 0);
  double v;
  const auto [ptr, ec] = std::from_chars(b, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Rows of cells; the delimiter is a tab if the header has one, else a comma.
struct Grid {
  std::vector<std::vector<std::string>> rows;
  std::string source;
};

inline Grid read_grid(std::istream& in, const std::string& source) {
  Grid g;
  g.source = source;
  std::string line;
  char delim = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    g.rows.push_back(split(line, delim));
  }
  if (g.rows.empty()) fail(ErrorCode::Parse, source + ": empty file");
  return g;
}

[[noreturn]] inline void parse_error(const Grid& g, std::size_t row, std::size_t col, const std::string& what) {
  fail(ErrorCode::Parse, g.source + ": row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) + ": " +
                             what);
}

inline void check_unique(const std::vector<std::string>& ids, const char* kind) {
  std::unordered_set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) fail(ErrorCode::DuplicateId, std::string("duplicate ") + kind + " id '" + id + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Abundance tables
// ---------------------------------------------------------------------------

struct AbundanceTable {
  std::vector<std::string> sample_ids;
  std::vector<std::string> taxon_ids;
  Eigen::MatrixXd values;  ///< samples × taxa
  bool is_normalized = false;
};

enum class Orientation { TaxaAsColumns, TaxaAsRows };

/// Parses a table whose first row and first column hold identifiers. Counts
/// (or abundances) must be finite and non-negative.
inline AbundanceTable parse_counts(std::istream& in, Orientation orientation, const std::string& source = "<input>") {
  const detail::Grid g = detail::read_grid(in, source);
  const auto& header = g.rows.front();
  if (header.size() < 2) detail::parse_error(g, 0, 1, "header needs at least one data column");
  std::vector<std::string> col_ids(header.begin() + 1, header.end());
  std::vector<std::string> row_ids;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(g.rows.size() - 1), static_cast<Eigen::Index>(col_ids.size()));
  for (std::size_t r = 1; r < g.rows.size(); ++r) {
    const auto& row = g.rows[r];
    if (row.size() != header.size())
      detail::parse_error(g, r, std::min(row.size(), header.size()),
                          "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(row.size()));
    row_ids.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) {
      const auto v = detail::parse_number(row[c]);
      if (!v) detail::parse_error(g, r, c, "not a finite number: '" + row[c] + "'");
      if (*v < 0) detail::parse_error(g, r, c, "negative value " + row[c]);
      m(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) = *v;
    }
  }
  if (row_ids.empty()) detail::parse_error(g, 1, 0, "no data rows");

  AbundanceTable t;
  if (orientation == Orientation::TaxaAsColumns) {
    t.sample_ids = std::move(row_ids);
    t.taxon_ids = std::move(col_ids);
    t.values = std::move(m);
  } else {
    t.sample_ids = std::move(col_ids);
    t.taxon_ids = std::move(row_ids);
    t.values = m.transpose();
  }
  detail::check_unique(t.sample_ids, "sample");
  detail::check_unique(t.taxon_ids, "taxon");
  return t;
}

inline AbundanceTable load_counts(const std::string& path, Orientation orientation) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return parse_counts(in, orientation, path);
}

struct FilterOptions {
  double min_prevalence = 0.20;
  bool drop_unassigned = true;
  std::vector<std::string> unassigned_labels = {"", "unassigned", "unclassified"};  ///< case-insensitive
  bool normalize = true;  ///< total-sum scaling; off for tables that already hold relative abundances
};

struct FilterReport {
  int unassigned_dropped = 0;
  int rare_dropped = 0;
  int empty_samples_dropped = 0;
};

/// Drops unassigned and rare taxa, then samples with zero total, then
/// rescales every sample to sum to one. Entries equal to one (a sample with a
/// single taxon) are moved just inside the unit interval.
inline AbundanceTable filter_and_normalize(const AbundanceTable& in, const FilterOptions& opt = {},
                                           FilterReport* report = nullptr) {
  FilterReport rep;
  std::set<std::string> labels;
  for (const auto& l : opt.unassigned_labels) labels.insert(detail::lower(detail::trim(l)));
  const Eigen::Index n = in.values.rows();
  std::vector<Eigen::Index> keep_taxa;
  for (Eigen::Index t = 0; t < in.values.cols(); ++t) {
    if (opt.drop_unassigned && labels.count(detail::lower(detail::trim(in.taxon_ids[t])))) {
      ++rep.unassigned_dropped;
      continue;
    }
    const double prevalence = n ? (in.values.col(t).array() > 0).count() / static_cast<double>(n) : 0.0;
    if (prevalence < opt.min_prevalence) {
      ++rep.rare_dropped;
      continue;
    }
    keep_taxa.push_back(t);
  }
  std::vector<Eigen::Index> keep_rows;
  for (Eigen::Index l = 0; l < n; ++l) {
    double total = 0;
    for (Eigen::Index t : keep_taxa) total += in.values(l, t);
    if (total > 0) keep_rows.push_back(l);
    else ++rep.empty_samples_dropped;
  }
  if (keep_taxa.empty() || keep_rows.empty())
    fail(ErrorCode::EmptyAfterFilter, "no taxa or samples remain after filtering");

  AbundanceTable out;
  out.values.resize(static_cast<Eigen::Index>(keep_rows.size()), static_cast<Eigen::Index>(keep_taxa.size()));
  for (Eigen::Index t : keep_taxa) out.taxon_ids.push_back(in.taxon_ids[t]);
  for (std::size_t r = 0; r < keep_rows.size(); ++r) {
    out.sample_ids.push_back(in.sample_ids[keep_rows[r]]);
    for (std::size_t c = 0; c < keep_taxa.size(); ++c)
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = in.values(keep_rows[r], keep_taxa[c]);
  }
  if (opt.normalize) {
    for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
      out.values.row(r) /= out.values.row(r).sum();
      for (Eigen::Index c = 0; c < out.values.cols(); ++c)
        out.values(r, c) = std::min(out.values(r, c), kUpperClamp);
    }
    out.is_normalized = true;
  } else {
    out.is_normalized = in.is_normalized;
  }
  if (report) *report = rep;
  return out;
}

// ---------------------------------------------------------------------------
// Covariates
// ---------------------------------------------------------------------------

struct CovariateColumn {
  std::string name;
  bool numeric = true;
  std::vector<std::optional<double>> number;
  std::vector<std::optional<std::string>> level;
};

struct CovariateTable {
  std::vector<std::string> sample_ids;
  std::vector<CovariateColumn> columns;

  const CovariateColumn& column(const std::string& name) const {
    for (const auto& c : columns)
      if (c.name == name) return c;
    fail(ErrorCode::InvalidArgument, "unknown covariate column '" + name + "'");
  }
};

inline bool is_missing(const std::string& s) {
  const std::string l = detail::lower(s);
  return l.empty() || l == "na" || l == "nan" || l == "null" || l == "none";
}

/// First column holds sample ids. A column is numeric when every non-missing
/// cell parses as a number; otherwise it is categorical.
inline CovariateTable parse_covariates(std::istream& in, const std::string& source = "<covariates>") {
  const detail::Grid g = detail::read_grid(in, source);
  const auto& header = g.rows.front();
  CovariateTable t;
  for (std::size_t c = 1; c < header.size(); ++c) t.columns.push_back({header[c], true, {}, {}});
  for (std::size_t r = 1; r < g.rows.size(); ++r) {
    const auto& row = g.rows[r];
    if (row.size() != header.size())
      detail::parse_error(g, r, std::min(row.size(), header.size()),
                          "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(row.size()));
    t.sample_ids.push_back(row[0]);
    for (std::size_t c = 1; c < row.size(); ++c) {
      auto& col = t.columns[c - 1];
      if (is_missing(row[c])) {
        col.level.emplace_back();
        col.number.emplace_back();
        continue;
      }
      col.level.emplace_back(row[c]);
      const auto v = detail::parse_number(row[c]);
      col.number.push_back(v);
      if (!v) col.numeric = false;
    }
  }
  detail::check_unique(t.sample_ids, "sample");
  std::set<std::string> names;
  for (const auto& c : t.columns)
    if (!names.insert(c.name).second) fail(ErrorCode::DuplicateId, "duplicate covariate column '" + c.name + "'");
  return t;
}

inline CovariateTable load_covariates(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return parse_covariates(in, path);
}

struct AlignedData {
  AbundanceTable table;
  /// Expanded covariates (no intercept): numeric columns as-is, categorical
  /// columns as indicators against the lexicographically smallest level.
  Eigen::MatrixXd covariates;
  std::vector<std::string> names;                         ///< one per column of `covariates`
  std::map<std::string, std::vector<int>> expansion;      ///< source column → expanded column indices
  int dropped_unmatched = 0;  ///< abundance samples without a covariate row
  int dropped_missing = 0;    ///< samples with a missing value in a used column
};

/// Complete-case intersection on the used columns, aligned by sample id in
/// the abundance table's order.
inline AlignedData align_covariates(const AbundanceTable& table, const CovariateTable& cov,
                                    const std::vector<std::string>& used) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t r = 0; r < cov.sample_ids.size(); ++r) pos.emplace(cov.sample_ids[r], r);
  std::vector<const CovariateColumn*> cols;
  for (const auto& name : used) cols.push_back(&cov.column(name));

  AlignedData out;
  std::vector<std::pair<Eigen::Index, std::size_t>> keep;
  for (std::size_t l = 0; l < table.sample_ids.size(); ++l) {
    const auto it = pos.find(table.sample_ids[l]);
    if (it == pos.end()) {
      ++out.dropped_unmatched;
      continue;
    }
    bool complete = true;
    for (const auto* c : cols) complete = complete && c->level[it->second].has_value();
    if (!complete) {
      ++out.dropped_missing;
      continue;
    }
    keep.emplace_back(static_cast<Eigen::Index>(l), it->second);
  }
  if (keep.empty()) fail(ErrorCode::NoOverlap, "no samples shared between the abundance and covariate tables");

  const auto n = static_cast<Eigen::Index>(keep.size());
  out.table.taxon_ids = table.taxon_ids;
  out.table.is_normalized = table.is_normalized;
  out.table.values.resize(n, table.values.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    out.table.sample_ids.push_back(table.sample_ids[keep[r].first]);
    out.table.values.row(r) = table.values.row(keep[r].first);
  }

  std::vector<Eigen::VectorXd> expanded;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& c = *cols[k];
    auto& idx = out.expansion[c.name];
    if (c.numeric) {
      Eigen::VectorXd v(n);
      for (Eigen::Index r = 0; r < n; ++r) v[r] = *c.number[keep[r].second];
      idx.push_back(static_cast<int>(expanded.size()));
      expanded.push_back(v);
      out.names.push_back(c.name);
      continue;
    }
    std::set<std::string> levels;
    for (const auto& [l, s] : keep) levels.insert(*c.level[s]);
    for (auto it = std::next(levels.begin()); it != levels.end(); ++it) {
      Eigen::VectorXd v(n);
      for (Eigen::Index r = 0; r < n; ++r) v[r] = *c.level[keep[r].second] == *it ? 1.0 : 0.0;
      idx.push_back(static_cast<int>(expanded.size()));
      expanded.push_back(v);
      out.names.push_back(c.name + "=" + *it);
    }
  }
  out.covariates.resize(n, static_cast<Eigen::Index>(expanded.size()));
  for (std::size_t k = 0; k < expanded.size(); ++k) out.covariates.col(static_cast<Eigen::Index>(k)) = expanded[k];
  return out;
}

/// Intercept plus the expanded columns of the listed source covariates.
inline Eigen::MatrixXd design_matrix(const AlignedData& a, const std::vector<std::string>& terms) {
  std::vector<int> cols;
  for (const auto& t : terms) {
    const auto it = a.expansion.find(t);
    if (it == a.expansion.end()) fail(ErrorCode::InvalidArgument, "covariate '" + t + "' was not aligned");
    cols.insert(cols.end(), it->second.begin(), it->second.end());
  }
  Eigen::MatrixXd d(a.covariates.rows(), static_cast<Eigen::Index>(cols.size() + 1));
  d.col(0).setOnes();
  for (std::size_t k = 0; k < cols.size(); ++k) d.col(static_cast<Eigen::Index>(k + 1)) = a.covariates.col(cols[k]);
  return d;
}

/// Splits "age+bmi" into {"age", "bmi"}; empty input gives no terms.
inline std::vector<std::string> parse_formula(const std::string& formula) {
  std::vector<std::string> out;
  for (auto& t : detail::split(formula, '+'))
    if (!t.empty()) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

inline void write_edge_list(std::ostream& os, const PairTable& t, const DependenceNetwork& net) {
  os << "taxon_i\ttaxon_j\ttheta\tp\tp_adjusted\tsign\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (!net.graph.adj(row.i, row.j)) continue;
    os << t.taxa[row.i] << '\t' << t.taxa[row.j] << '\t' << fmt(row.fit.theta_hat) << '\t' << fmt(row.fit.p_value)
       << '\t' << fmt(net.adjusted[r]) << '\t' << net.sign(row.i, row.j) << '\n';
  }
}

/// Every pair with its estimate, test and skip reason.
inline void write_pair_table(std::ostream& os, const PairTable& t, const DependenceNetwork& net) {
  os << "taxon_i\ttaxon_j\tstatus\ttheta\ttheta_var\tomega\tlrt_stat\tp\tp_adjusted\tboundary_hit\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    os << t.taxa[row.i] << '\t' << t.taxa[row.j] << '\t';
    if (row.skipped) {
      os << to_string(*row.skipped) << "\tnan\tnan\tnan\tnan\tnan\tnan\t0\n";
      continue;
    }
    const auto& f = row.fit;
    os << (f.status.undefined_test ? "undefined_test" : "ok") << '\t' << fmt(f.theta_hat) << '\t' << fmt(f.theta_var)
       << '\t' << fmt(f.omega) << '\t' << fmt(f.lrt_stat) << '\t' << fmt(f.p_value) << '\t' << fmt(net.adjusted[r])
       << '\t' << f.status.boundary_hit << '\n';
  }
}

inline void write_adjacency(std::ostream& os, const DependenceNetwork& net) {
  os << "taxon";
  for (const auto& t : net.taxa) os << '\t' << t;
  os << '\n';
  for (int a = 0; a < net.graph.size(); ++a) {
    os << net.taxa[a];
    for (int b = 0; b < net.graph.size(); ++b) os << '\t' << net.sign(a, b);
    os << '\n';
  }
}

inline void write_node_metrics(std::ostream& os, const DependenceNetwork& net, const GraphStats& s) {
  os << "taxon\tcluster\tdegree\tcloseness\tbetweenness\teigenvector\tclustering\n";
  for (int v = 0; v < net.graph.size(); ++v)
    os << net.taxa[v] << '\t' << (net.clusters.empty() ? -1 : net.clusters[v]) << '\t' << fmt(s.degree[v]) << '\t'
       << fmt(s.closeness[v]) << '\t' << fmt(s.betweenness[v]) << '\t' << fmt(s.eigenvector[v]) << '\t'
       << fmt(s.clustering[v]) << '\n';
}

inline void write_stability(std::ostream& os, const StabilityReport& rep) {
  os << "replicate\tsignificant\tskipped\toverlap\tdice\n";
  for (std::size_t b = 0; b < rep.replicates.size(); ++b) {
    const auto& r = rep.replicates[b];
    os << b << '\t' << r.significant << '\t' << r.skipped << '\t' << fmt(r.overlap) << '\t' << fmt(r.dice) << '\n';
  }
}

inline void write_selection_frequency(std::ostream& os, const StabilityReport& rep) {
  const PairTable& t = rep.base;
  os << "taxon_i\ttaxon_j\toriginal\tfrequency\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto key = std::make_pair(t.rows[r].i, t.rows[r].j);
    const bool orig = std::binary_search(rep.original.begin(), rep.original.end(), key);
    os << t.taxa[key.first] << '\t' << t.taxa[key.second] << '\t' << orig << '\t' << fmt(rep.selection_frequency[r])
       << '\n';
  }
}

}  // namespace zibcop
