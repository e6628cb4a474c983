#pragma once

/**
 * @file network.hpp
 * @brief All-pairs dependence testing, FDR control, network construction,
 *        graph summaries, clustering, random-graph null comparison and
 *        bootstrap stability.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "zibcop/error.hpp"
#include "zibcop/numerics.hpp"
#include "zibcop/parallel.hpp"
#include "zibcop/rng.hpp"
#include "zibcop/two_stage.hpp"

namespace zibcop {

// ---------------------------------------------------------------------------
// Multiple testing
// ---------------------------------------------------------------------------

struct FdrResult {
  std::vector<bool> reject;
  std::vector<double> adjusted;
};

enum class FdrMethod { BenjaminiYekutieli, BenjaminiHochberg };

/// Step-up procedure. BY uses the harmonic correction c(m) = Σ 1/i, BH uses 1.
inline FdrResult step_up_fdr(std::span<const double> p, double alpha, FdrMethod method) {
  const std::size_t m = p.size();
  FdrResult out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  if (m == 0) return out;
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::InvalidArgument, "fdr: p-values must lie in [0, 1]");
  double c = 1.0;
  if (method == FdrMethod::BenjaminiYekutieli) {
    c = 0.0;
    for (std::size_t i = 1; i <= m; ++i) c += 1.0 / static_cast<double>(i);
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  const double md = static_cast<double>(m);
  std::size_t k_star = 0;
  for (std::size_t k = 1; k <= m; ++k)
    if (p[order[k - 1]] <= static_cast<double>(k) * alpha / (md * c)) k_star = k;
  for (std::size_t k = 0; k < k_star; ++k) out.reject[order[k]] = true;

  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    running = std::min(running, std::min(1.0, md * c * p[order[k]] / static_cast<double>(k + 1)));
    out.adjusted[order[k]] = running;
  }
  return out;
}

inline FdrResult by_fdr(std::span<const double> p, double alpha) {
  return step_up_fdr(p, alpha, FdrMethod::BenjaminiYekutieli);
}
inline FdrResult bh_fdr(std::span<const double> p, double alpha) {
  return step_up_fdr(p, alpha, FdrMethod::BenjaminiHochberg);
}

// ---------------------------------------------------------------------------
// Pairwise analysis
// ---------------------------------------------------------------------------

struct PairRow {
  int i = 0;
  int j = 0;
  PairFit fit;
  std::optional<ErrorCode> skipped;  ///< set when the pair could not be fitted

  bool tested() const { return !skipped && !fit.status.undefined_test && std::isfinite(fit.p_value); }
};

struct PairTable {
  std::vector<std::string> taxa;
  std::vector<PairRow> rows;  ///< (0,1), (0,2), ..., (T-2, T-1)
};

struct PairwiseOptions {
  int threads = 1;
  TwoStageOptions two_stage;
  /// Leave-one-out margin evaluations are cached when taxa·n² stays below
  /// this many entries; otherwise each pair re-evaluates them.
  double cache_budget = 2e7;
};

inline std::size_t pair_count(std::size_t taxa) { return taxa * (taxa - (taxa > 0)) / 2; }

namespace detail {

struct MarginCache {
  std::optional<ZibFit> fit;
  std::optional<ErrorCode> error;
  MarginEval eval;
  MarginJackknife jk;
};

inline PairFit fit_pair_cached(std::span<const PairObservation> data, const MarginCache& ci, const MarginCache& cj,
                               const ZibRegressionSpec* spec, const TwoStageOptions& opt) {
  check_pair_preconditions(data);
  PairFit fit;
  fit.n = static_cast<int>(data.size());
  fit.fit_i = *ci.fit;
  fit.fit_j = *cj.fit;
  const PairLikelihood lik(ci.eval, cj.eval);
  const OptimResult r = maximize_theta(lik, opt);
  fit.theta_hat = r.arg;
  fit.loglik = lik(r.arg);
  fit.status.boundary_hit = r.hit_boundary;
  fit.status.nonconverged = !fit.fit_i.converged || !fit.fit_j.converged || !r.converged;
  attach_jackknife(fit, jackknife_cov(data, fit, ci.jk, cj.jk, spec, spec, opt));
  try {
    attach_test(fit, rescaled_lrt(lik, fit.theta_hat, fit.theta_var, 0.0));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonpositiveCurvature) throw;
    fit.status.undefined_test = true;
  }
  return fit;
}

}  // namespace detail

/// Tests every unordered taxon pair for independence. `x` is samples × taxa
/// relative abundances in [0, 1). The optional covariate design is shared by
/// all margins. Pairs whose margins break a precondition are flagged as
/// skipped.
inline PairTable pairwise_analysis(const Eigen::MatrixXd& x, const std::vector<std::string>& taxa,
                                   const ZibRegressionSpec* spec = nullptr, const PairwiseOptions& opt = {}) {
  const auto n_taxa = static_cast<std::size_t>(x.cols());
  const auto n = static_cast<std::size_t>(x.rows());
  if (n_taxa == 0) fail(ErrorCode::InvalidArgument, "pairwise_analysis: no taxa");
  if (taxa.size() != n_taxa) fail(ErrorCode::InvalidArgument, "pairwise_analysis: label count differs from columns");
  if (spec != nullptr) spec->validate(static_cast<Eigen::Index>(n));

  std::vector<std::vector<double>> cols(n_taxa, std::vector<double>(n));
  for (std::size_t t = 0; t < n_taxa; ++t)
    for (std::size_t l = 0; l < n; ++l) cols[t][l] = x(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t));

  const bool cache = static_cast<double>(n_taxa) * static_cast<double>(n) * static_cast<double>(n) <= opt.cache_budget;
  std::vector<detail::MarginCache> margins(n_taxa);
  parallel_for(n_taxa, opt.threads, [&](std::size_t t) {
    auto& m = margins[t];
    try {
      m.fit = fit_margin(cols[t], spec);
      m.eval = evaluate_fit(cols[t], *m.fit, spec);
      m.jk = margin_leave_one_out(cols[t], *m.fit, spec, cache, opt.two_stage);
    } catch (const Error& e) {
      m.fit.reset();
      m.error = e.code();
    }
  });

  PairTable table;
  table.taxa = taxa;
  table.rows.resize(pair_count(n_taxa));
  for (std::size_t i = 0, r = 0; i < n_taxa; ++i)
    for (std::size_t j = i + 1; j < n_taxa; ++j, ++r) {
      table.rows[r].i = static_cast<int>(i);
      table.rows[r].j = static_cast<int>(j);
    }

  parallel_for(table.rows.size(), opt.threads, [&](std::size_t r) {
    PairRow& row = table.rows[r];
    const auto& ci = margins[row.i];
    const auto& cj = margins[row.j];
    if (!ci.fit || !cj.fit) {
      row.skipped = ci.fit ? *cj.error : *ci.error;
      return;
    }
    std::vector<PairObservation> data;
    data.reserve(n);
    for (std::size_t l = 0; l < n; ++l) data.emplace_back(cols[row.i][l], cols[row.j][l]);
    try {
      row.fit = detail::fit_pair_cached(data, ci, cj, spec, opt.two_stage);
    } catch (const Error& e) {
      row.skipped = e.code();
    }
  });
  return table;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Simple undirected graph held as a dense 0/1 matrix.
struct Graph {
  Eigen::MatrixXi adj;

  Graph() = default;
  explicit Graph(int n) : adj(Eigen::MatrixXi::Zero(n, n)) {}

  int size() const { return static_cast<int>(adj.rows()); }
  int edges() const { return adj.sum() / 2; }
  int degree(int v) const { return adj.row(v).sum(); }
  void add_edge(int a, int b) {
    if (a == b) fail(ErrorCode::InvalidArgument, "Graph: self loops are not allowed");
    adj(a, b) = adj(b, a) = 1;
  }
  std::vector<std::vector<int>> neighbours() const {
    std::vector<std::vector<int>> nb(size());
    for (int a = 0; a < size(); ++a)
      for (int b = 0; b < size(); ++b)
        if (adj(a, b)) nb[a].push_back(b);
    return nb;
  }
};

struct DependenceNetwork {
  std::vector<std::string> taxa;
  Graph graph;
  Eigen::MatrixXi sign;           ///< sign of θ̃ on edges, 0 elsewhere
  std::vector<double> adjusted;   ///< adjusted p-value per table row (NaN when not tested)
  std::vector<int> clusters;      ///< filled by the caller after clustering
};

/// Edge iff the FDR-adjusted p-value is below α. Untested pairs are left out
/// of the multiple-testing family.
inline DependenceNetwork build_network(const PairTable& table, double alpha,
                                       FdrMethod method = FdrMethod::BenjaminiYekutieli) {
  const int n = static_cast<int>(table.taxa.size());
  DependenceNetwork net;
  net.taxa = table.taxa;
  net.graph = Graph(n);
  net.sign = Eigen::MatrixXi::Zero(n, n);
  net.adjusted.assign(table.rows.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> idx;
  std::vector<double> p;
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    if (table.rows[r].tested()) {
      idx.push_back(r);
      p.push_back(table.rows[r].fit.p_value);
    }
  const FdrResult fdr = step_up_fdr(p, alpha, method);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const PairRow& row = table.rows[idx[k]];
    net.adjusted[idx[k]] = fdr.adjusted[k];
    if (fdr.adjusted[k] < alpha) {
      net.graph.add_edge(row.i, row.j);
      net.sign(row.i, row.j) = net.sign(row.j, row.i) = row.fit.theta_hat < 0 ? -1 : 1;
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Graph statistics
// ---------------------------------------------------------------------------

struct GraphStats {
  std::vector<double> degree;       ///< divided by n-1
  std::vector<double> closeness;    ///< (r-1)/Σd within the component, times (r-1)/(n-1)
  std::vector<double> betweenness;  ///< times 2/((n-1)(n-2))
  std::vector<double> raw_betweenness;
  std::vector<double> eigenvector;  ///< scaled to max 1
  std::vector<double> clustering;   ///< local clustering, NaN for degree < 2
  double mean_degree = 0, mean_closeness = 0, mean_betweenness = 0, mean_eigenvector = 0;
  double density = 0;
  int diameter = 0;
  double mean_distance = 0;
  double mean_clustering = 0;  ///< over nodes with degree ≥ 2
  double modularity = std::numeric_limits<double>::quiet_NaN();
  int components = 0;
  int largest_component = 0;
  bool disconnected = false;  ///< diameter and mean distance refer to the largest component
};

/// Hop distances from `src`; -1 where unreachable.
inline std::vector<int> bfs_distances(const std::vector<std::vector<int>>& nb, int src) {
  std::vector<int> d(nb.size(), -1);
  std::queue<int> q;
  d[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : nb[v])
      if (d[w] < 0) {
        d[w] = d[v] + 1;
        q.push(w);
      }
  }
  return d;
}

inline std::vector<int> connected_components(const Graph& g) {
  const auto nb = g.neighbours();
  std::vector<int> comp(g.size(), -1);
  int c = 0;
  for (int v = 0; v < g.size(); ++v) {
    if (comp[v] >= 0) continue;
    const auto d = bfs_distances(nb, v);
    for (int w = 0; w < g.size(); ++w)
      if (d[w] >= 0) comp[w] = c;
    ++c;
  }
  return comp;
}

/// Newman's Q of a partition on the unweighted graph; 0 for an edgeless graph.
inline double modularity(const Graph& g, std::span<const int> partition) {
  if (partition.size() != static_cast<std::size_t>(g.size()))
    fail(ErrorCode::InvalidArgument, "modularity: partition size differs from node count");
  const double two_m = 2.0 * g.edges();
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (int a = 0; a < g.size(); ++a)
    for (int b = 0; b < g.size(); ++b)
      if (partition[a] == partition[b]) q += g.adj(a, b) - g.degree(a) * static_cast<double>(g.degree(b)) / two_m;
  return q / two_m;
}

/// Average local clustering over nodes with degree ≥ 2 (0 when none).
inline double mean_local_clustering(const Graph& g, std::vector<double>* per_node = nullptr) {
  const auto nb = g.neighbours();
  double sum = 0.0;
  int count = 0;
  if (per_node) per_node->assign(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (int v = 0; v < g.size(); ++v) {
    const auto k = static_cast<double>(nb[v].size());
    if (k < 2) continue;
    int links = 0;
    for (std::size_t a = 0; a < nb[v].size(); ++a)
      for (std::size_t b = a + 1; b < nb[v].size(); ++b) links += g.adj(nb[v][a], nb[v][b]);
    const double c = 2.0 * links / (k * (k - 1));
    if (per_node) (*per_node)[v] = c;
    sum += c;
    ++count;
  }
  return count ? sum / count : 0.0;
}

inline GraphStats graph_stats(const Graph& g, std::span<const int> partition = {}) {
  const int n = g.size();
  if (n == 0) fail(ErrorCode::InvalidArgument, "graph_stats: empty node set");
  const auto nb = g.neighbours();
  const double nm1 = n - 1.0;
  GraphStats s;
  s.degree.resize(n);
  s.closeness.assign(n, 0.0);
  s.betweenness.assign(n, 0.0);
  s.raw_betweenness.assign(n, 0.0);
  s.eigenvector.assign(n, 0.0);

  for (int v = 0; v < n; ++v) s.degree[v] = n > 1 ? nb[v].size() / nm1 : 0.0;
  s.density = n > 1 ? g.edges() / (n * nm1 / 2.0) : 0.0;

  const std::vector<int> comp = connected_components(g);
  s.components = *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<int> comp_size(s.components, 0);
  for (int c : comp) ++comp_size[c];
  int largest = 0;
  for (int c = 1; c < s.components; ++c)
    if (comp_size[c] > comp_size[largest]) largest = c;
  s.largest_component = comp_size[largest];
  s.disconnected = s.components > 1;

  // Closeness, diameter and mean distance from all-sources BFS.
  double dist_sum = 0.0;
  long pairs = 0;
  for (int v = 0; v < n; ++v) {
    const auto d = bfs_distances(nb, v);
    double tot = 0.0;
    int reach = 0;
    for (int w = 0; w < n; ++w)
      if (w != v && d[w] > 0) {
        tot += d[w];
        ++reach;
        if (comp[v] == largest && w > v) {
          s.diameter = std::max(s.diameter, d[w]);
          dist_sum += d[w];
          ++pairs;
        }
      }
    if (reach > 0) s.closeness[v] = (reach / tot) * (reach / nm1);
  }
  s.mean_distance = pairs ? dist_sum / static_cast<double>(pairs) : 0.0;

  // Brandes' betweenness; each unordered pair is counted once.
  for (int src = 0; src < n; ++src) {
    std::vector<int> stack, d(n, -1);
    std::vector<double> sigma(n, 0.0), delta(n, 0.0);
    std::vector<std::vector<int>> pred(n);
    std::queue<int> q;
    d[src] = 0;
    sigma[src] = 1.0;
    q.push(src);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      stack.push_back(v);
      for (int w : nb[v]) {
        if (d[w] < 0) {
          d[w] = d[v] + 1;
          q.push(w);
        }
        if (d[w] == d[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    while (!stack.empty()) {
      const int w = stack.back();
      stack.pop_back();
      for (int v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != src) s.raw_betweenness[w] += delta[w];
    }
  }
  for (int v = 0; v < n; ++v) {
    s.raw_betweenness[v] /= 2.0;
    s.betweenness[v] = n > 2 ? s.raw_betweenness[v] * 2.0 / (nm1 * (n - 2.0)) : 0.0;
  }

  // Eigenvector centrality: leading eigenvector of the adjacency matrix.
  if (g.edges() > 0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.adj.cast<double>());
    Eigen::VectorXd ev = es.eigenvectors().col(n - 1).cwiseAbs();
    ev /= ev.maxCoeff();
    for (int v = 0; v < n; ++v) s.eigenvector[v] = ev[v];
  }

  s.mean_clustering = mean_local_clustering(g, &s.clustering);
  if (!partition.empty()) s.modularity = modularity(g, partition);
  auto mean = [n](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / n; };
  s.mean_degree = mean(s.degree);
  s.mean_closeness = mean(s.closeness);
  s.mean_betweenness = mean(s.betweenness);
  s.mean_eigenvector = mean(s.eigenvector);
  return s;
}

// ---------------------------------------------------------------------------
// Hierarchical clustering
// ---------------------------------------------------------------------------

/// Number of positions where the closed neighbourhoods of a and b differ
/// (each node counts as its own neighbour). Divide by n for the fraction.
inline Eigen::MatrixXi hamming_counts(const Graph& g) {
  const int n = g.size();
  Eigen::MatrixXi closed = g.adj + Eigen::MatrixXi::Identity(n, n);
  Eigen::MatrixXi d = Eigen::MatrixXi::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) d(a, b) = d(b, a) = (closed.row(a) - closed.row(b)).cwiseAbs().sum();
  return d;
}

/// Complete-linkage agglomeration on an integer-valued distance matrix,
/// cut at k clusters. Ties go to the pair of clusters with the smallest
/// (first, second) representative indices; a cluster's representative is its
/// smallest member. Labels are numbered by smallest member.
inline std::vector<int> complete_linkage(const Eigen::MatrixXi& dist, int k) {
  const int n = static_cast<int>(dist.rows());
  if (k < 1 || k > n) fail(ErrorCode::InvalidArgument, "hierarchical_cluster: k must be in [1, node count]");
  Eigen::MatrixXi d = dist;
  std::vector<int> rep(n);
  std::iota(rep.begin(), rep.end(), 0);
  std::vector<bool> active(n, true);
  for (int clusters = n; clusters > k; --clusters) {
    int ba = -1, bb = -1;
    for (int a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (int b = a + 1; b < n; ++b)
        if (active[b] && (ba < 0 || d(a, b) < d(ba, bb))) ba = a, bb = b;
    }
    for (int c = 0; c < n; ++c)
      if (active[c]) d(ba, c) = d(c, ba) = std::max(d(ba, c), d(bb, c));
    active[bb] = false;
    for (int& r : rep)
      if (r == bb) r = ba;
  }
  std::vector<int> label(n, -1), out(n);
  int next = 0;
  for (int v = 0; v < n; ++v) {
    if (label[rep[v]] < 0) label[rep[v]] = next++;
    out[v] = label[rep[v]];
  }
  return out;
}

inline std::vector<int> hierarchical_cluster(const Graph& g, int k) { return complete_linkage(hamming_counts(g), k); }

// ---------------------------------------------------------------------------
// Erdős–Rényi null comparison
// ---------------------------------------------------------------------------

/// Uniform graph with n nodes and exactly m edges.
inline Graph sample_gnm(int n, int m, Rng& rng) {
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (m < 0 || static_cast<std::uint64_t>(m) > total) fail(ErrorCode::InvalidArgument, "sample_gnm: bad edge count");
  std::vector<std::uint64_t> slots(total);
  std::iota(slots.begin(), slots.end(), 0);
  for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(m); ++k)
    std::swap(slots[k], slots[k + rng.below(total - k)]);
  Graph g(n);
  for (int e = 0; e < m; ++e) {
    std::uint64_t s = slots[e];
    int a = 0;
    while (s >= static_cast<std::uint64_t>(n - 1 - a)) s -= n - 1 - a++;
    g.add_edge(a, a + 1 + static_cast<int>(s));
  }
  return g;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov–Smirnov test with the asymptotic distribution.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d)};
}

struct NullStatistic {
  double observed = 0.0;
  double null_mean = 0.0;
  double null_sd = 0.0;
  double p_value = 1.0;  ///< (1 + #{|null − mean| ≥ |obs − mean|}) / (R + 1)
};

struct NullReport {
  int reps = 0;
  int edges = 0;
  NullStatistic clustering;
  NullStatistic modularity;
  KsResult degree_ks;
};

inline NullStatistic empirical_two_sided(double observed, const std::vector<double>& null) {
  NullStatistic s;
  s.observed = observed;
  const double r = null.size();
  s.null_mean = std::accumulate(null.begin(), null.end(), 0.0) / r;
  double ss = 0.0;
  for (double v : null) ss += (v - s.null_mean) * (v - s.null_mean);
  s.null_sd = null.size() > 1 ? std::sqrt(ss / (r - 1)) : 0.0;
  const double dev = std::abs(observed - s.null_mean);
  int extreme = 0;
  for (double v : null) extreme += std::abs(v - s.null_mean) >= dev - 1e-12;
  s.p_value = (1.0 + extreme) / (r + 1.0);
  return s;
}

/// Compares clustering, modularity (under a k-cluster cut) and the degree
/// distribution of `g` with G(n, M) graphs of the same size.
inline NullReport er_null_comparison(const Graph& g, int n_reps, int k, std::uint64_t seed, int threads = 1) {
  if (n_reps < 100) fail(ErrorCode::InvalidArgument, "er_null_comparison: need at least 100 replicates");
  const int n = g.size();
  NullReport out;
  out.reps = n_reps;
  out.edges = g.edges();
  std::vector<double> clus(n_reps), mod(n_reps);
  std::vector<std::vector<double>> degs(n_reps);
  parallel_for(static_cast<std::size_t>(n_reps), threads, [&](std::size_t r) {
    Rng rng(seed, 0, r);
    const Graph h = sample_gnm(n, out.edges, rng);
    clus[r] = mean_local_clustering(h);
    mod[r] = modularity(h, hierarchical_cluster(h, k));
    degs[r].resize(n);
    for (int v = 0; v < n; ++v) degs[r][v] = h.degree(v);
  });
  out.clustering = empirical_two_sided(mean_local_clustering(g), clus);
  out.modularity = empirical_two_sided(modularity(g, hierarchical_cluster(g, k)), mod);
  std::vector<double> observed(n), pooled;
  for (int v = 0; v < n; ++v) observed[v] = g.degree(v);
  for (const auto& d : degs) pooled.insert(pooled.end(), d.begin(), d.end());
  out.degree_ks = ks_two_sample(observed, pooled);
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap stability
// ---------------------------------------------------------------------------

using PairSet = std::vector<std::pair<int, int>>;  ///< sorted (i < j)

inline PairSet significant_pairs(const DependenceNetwork& net) {
  PairSet s;
  for (int a = 0; a < net.graph.size(); ++a)
    for (int b = a + 1; b < net.graph.size(); ++b)
      if (net.graph.adj(a, b)) s.emplace_back(a, b);
  return s;
}

/// |A∩B| / min(|A|,|B|) and 2|A∩B| / (|A|+|B|); both are 1 when both sets
/// are empty and 0 when exactly one is.
inline std::pair<double, double> overlap_and_dice(const PairSet& a, const PairSet& b) {
  if (a.empty() && b.empty()) return {1.0, 1.0};
  PairSet common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double c = common.size();
  const double lo = std::min(a.size(), b.size());
  return {lo > 0 ? c / lo : 0.0, 2.0 * c / static_cast<double>(a.size() + b.size())};
}

struct StabilityReplicate {
  int significant = 0;
  int skipped = 0;
  double overlap = 0.0;
  double dice = 0.0;
};

struct StabilityReport {
  PairTable base;  ///< pair table of the original data
  PairSet original;
  std::vector<StabilityReplicate> replicates;
  std::vector<double> selection_frequency;  ///< per pair-table row
  double mean_overlap = 0.0;
  double mean_dice = 0.0;
};

struct StabilityOptions {
  double alpha = 0.01;
  FdrMethod fdr = FdrMethod::BenjaminiYekutieli;
  int boot = 50;
  std::uint64_t seed = 1;
  bool resample = true;  ///< false reuses the original rows (test mode)
  PairwiseOptions pairwise;
};

/// Resamples subjects with replacement, reruns the pipeline and compares each
/// replicate's significant set with the original one.
inline StabilityReport bootstrap_stability(const Eigen::MatrixXd& x, const std::vector<std::string>& taxa,
                                           const ZibRegressionSpec* spec, const StabilityOptions& opt) {
  if (opt.boot < 2) fail(ErrorCode::InvalidArgument, "bootstrap_stability: need at least two replicates");
  StabilityReport out;
  out.base = pairwise_analysis(x, taxa, spec, opt.pairwise);
  out.original = significant_pairs(build_network(out.base, opt.alpha, opt.fdr));
  out.selection_frequency.assign(out.base.rows.size(), 0.0);
  const Eigen::Index n = x.rows();
  for (int b = 0; b < opt.boot; ++b) {
    std::vector<Eigen::Index> rows(n);
    Rng rng(opt.seed, 1, static_cast<std::uint64_t>(b));
    for (Eigen::Index l = 0; l < n; ++l)
      rows[l] = opt.resample ? static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))) : l;
    Eigen::MatrixXd xb(n, x.cols());
    for (Eigen::Index l = 0; l < n; ++l) xb.row(l) = x.row(rows[l]);
    std::optional<ZibRegressionSpec> sb;
    if (spec) sb = spec->subset(rows);
    const PairTable t = pairwise_analysis(xb, taxa, sb ? &*sb : nullptr, opt.pairwise);
    const PairSet s = significant_pairs(build_network(t, opt.alpha, opt.fdr));
    StabilityReplicate rep;
    rep.significant = static_cast<int>(s.size());
    for (const auto& row : t.rows) rep.skipped += row.skipped.has_value();
    std::tie(rep.overlap, rep.dice) = overlap_and_dice(out.original, s);
    out.replicates.push_back(rep);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      if (std::binary_search(s.begin(), s.end(), std::make_pair(t.rows[r].i, t.rows[r].j)))
        out.selection_frequency[r] += 1.0 / opt.boot;
  }
  for (const auto& r : out.replicates) {
    out.mean_overlap += r.overlap / opt.boot;
    out.mean_dice += r.dice / opt.boot;
  }
  return out;
}

}  // namespace zibcop
