#pragma once

// Brute-force references for multiple testing and graph metrics. Written
// independently of the library: no sorting in the FDR oracle, Floyd–Warshall
// and explicit path enumeration for the graph metrics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// BY rejections without sorting: k* is the largest k with at least k p-values
// at or below k·α/(m·c(m)).
inline std::vector<bool> by_bruteforce(const std::vector<double>& p, double alpha) {
  const std::size_t m = p.size();
  double c = 0;
  for (std::size_t i = 1; i <= m; ++i) c += 1.0 / i;
  std::size_t k_star = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    const double thr = k * alpha / (m * c);
    std::size_t below = 0;
    for (double v : p) below += v <= thr;
    if (below >= k) k_star = k;
  }
  std::vector<bool> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = k_star > 0 && p[i] <= k_star * alpha / (m * c);
  return out;
}

// Brute-force metrics: Floyd–Warshall distances, shortest paths counted by
// enumerating simple paths, eigenvector by power iteration on A + I,
// clustering from closed walks of length three, modularity in e/a form.
struct BruteStats {
  std::vector<double> degree, closeness, betweenness, eigenvector;
  double density, mean_distance, mean_clustering, modularity;
  int diameter;
};

inline BruteStats brute_stats(const Eigen::MatrixXi& adj, const std::vector<int>& part) {
  const int n = static_cast<int>(adj.rows());
  auto degree = [&](int v) { return adj.row(v).sum(); };
  const int inf = 1 << 20;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) d[a][b] = a == b ? 0 : (adj(a, b) ? 1 : inf);
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) d[a][b] = std::min(d[a][b], d[a][k] + d[k][b]);

  // paths[s][t][v]: number of shortest s–t paths through v.
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0));
  std::vector<std::vector<std::vector<double>>> through(n, sigma);
  std::vector<int> path;
  std::vector<bool> used(n);
  std::function<void(int, int)> walk = [&](int v, int t) {
    if (v == t) {
      if (static_cast<int>(path.size()) - 1 == d[path.front()][t]) {
        sigma[path.front()][t] += 1;
        for (std::size_t k = 1; k + 1 < path.size(); ++k) through[path.front()][t][path[k]] += 1;
      }
      return;
    }
    for (int w = 0; w < n; ++w)
      if (adj(v, w) && !used[w]) {
        used[w] = true;
        path.push_back(w);
        walk(w, t);
        path.pop_back();
        used[w] = false;
      }
  };
  for (int s = 0; s < n; ++s)
    for (int t = s + 1; t < n; ++t) {
      std::fill(used.begin(), used.end(), false);
      used[s] = true;
      path = {s};
      walk(s, t);
    }

  BruteStats r;
  const double m = adj.sum() / 2;
  r.density = m / (n * (n - 1) / 2.0);
  r.diameter = 0;
  double sum = 0;
  for (int a = 0; a < n; ++a) {
    r.degree.push_back(degree(a) / (n - 1.0));
    double tot = 0;
    for (int b = 0; b < n; ++b) tot += d[a][b];
    r.closeness.push_back((n - 1.0) / tot);
    double bt = 0;
    for (int s = 0; s < n; ++s)
      for (int t = s + 1; t < n; ++t)
        if (s != a && t != a) bt += through[s][t][a] / sigma[s][t];
    r.betweenness.push_back(n > 2 ? bt * 2.0 / ((n - 1.0) * (n - 2.0)) : 0.0);
    for (int b = a + 1; b < n; ++b) {
      r.diameter = std::max(r.diameter, d[a][b]);
      sum += d[a][b];
    }
  }
  r.mean_distance = n > 1 ? sum / (n * (n - 1) / 2.0) : 0.0;

  std::vector<double> x(n, 1.0);
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> y(n, 0.0);
    for (int a = 0; a < n; ++a) {
      y[a] = x[a];
      for (int b = 0; b < n; ++b) y[a] += adj(a, b) * x[b];
    }
    const double mx = *std::max_element(y.begin(), y.end());
    double change = 0;
    for (int a = 0; a < n; ++a) change = std::max(change, std::abs(y[a] / mx - x[a])), x[a] = y[a] / mx;
    if (change < 1e-15) break;
  }
  r.eigenvector = m > 0 ? x : std::vector<double>(n, 0.0);

  const Eigen::MatrixXi a3 = adj * adj * adj;
  double cs = 0;
  int cnt = 0;
  for (int a = 0; a < n; ++a) {
    const double k = degree(a);
    if (k >= 2) cs += a3(a, a) / (k * (k - 1)), ++cnt;
  }
  r.mean_clustering = cnt ? cs / cnt : 0.0;

  const int groups = *std::max_element(part.begin(), part.end()) + 1;
  r.modularity = 0;
  if (m > 0)
    for (int c = 0; c < groups; ++c) {
      double inside = 0, ends = 0;
      for (int a = 0; a < n; ++a) {
        if (part[a] != c) continue;
        ends += degree(a);
        for (int b = 0; b < n; ++b) inside += part[b] == c && adj(a, b);
      }
      r.modularity += inside / (2 * m) - (ends / (2 * m)) * (ends / (2 * m));
    }
  return r;
}

// Complete linkage recomputing the maximum member distance at every step.
inline std::vector<int> linkage_oracle(const Eigen::MatrixXi& d, int k) {
  const int n = static_cast<int>(d.rows());
  std::vector<std::vector<int>> clusters;
  for (int v = 0; v < n; ++v) clusters.push_back({v});
  while (static_cast<int>(clusters.size()) > k) {
    int best = std::numeric_limits<int>::max(), ba = 0, bb = 0;
    for (std::size_t a = 0; a < clusters.size(); ++a)
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        int far = 0;
        for (int u : clusters[a])
          for (int v : clusters[b]) far = std::max(far, d(u, v));
        if (far < best) best = far, ba = a, bb = b;
      }
    clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + bb);
  }
  std::vector<int> out(n);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (int v : clusters[c]) out[v] = c;
  return out;
}

}  // namespace oracle
