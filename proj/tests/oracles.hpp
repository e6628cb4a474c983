#pragma once

// Test-only reference computations. Nothing here calls into the library's
// own quadrature, root finding or optimization code.

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

/// Tanh-sinh quadrature; tolerates integrable endpoint singularities.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b, tol);
}

/// Composite Gauss-Legendre (10 points per panel) for smooth 1-D integrands.
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels = 64) {
  static const double x[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845,
                              0.9739065285171717};
  static const double w[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820, 0.1494513491505806,
                              0.0666713443086881};
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double mid = a + (k + 0.5) * h;
    for (int i = 0; i < 5; ++i) {
      total += w[i] * (f(mid - 0.5 * h * x[i]) + f(mid + 0.5 * h * x[i]));
    }
  }
  return total * 0.5 * h;
}

/// Root of a nondecreasing function g with g(lo) <= target <= g(hi).
inline double bisect(const std::function<double(double)>& g, double target, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Central difference with one Richardson extrapolation step.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2 * s); };
  return (4 * d(h / 2) - d(h)) / 3;
}

/// Arg-max of f on a uniform grid of the given spacing.
inline double grid_argmax(const std::function<double(double)>& f, double lo, double hi, double step) {
  double best_x = lo;
  double best = -std::numeric_limits<double>::infinity();
  for (double x = lo; x <= hi + 1e-15; x += step) {
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

/// O(n²) Kendall tau-a on continuous data.
inline double kendall_tau_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = (x[i] - x[j]) * (y[i] - y[j]);
      s += a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
    }
  return s / (0.5 * n * (n - 1.0));
}

/// Kendall tau-a for tie-free data by counting inversions with a Fenwick tree.
inline double kendall_tau_fenwick(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> by_x(n), y_rank(n);
  std::iota(by_x.begin(), by_x.end(), 0);
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<std::size_t> by_y(n);
  std::iota(by_y.begin(), by_y.end(), 0);
  std::sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  for (std::size_t r = 0; r < n; ++r) y_rank[by_y[r]] = r + 1;
  std::vector<long long> tree(n + 1, 0);
  long long discordant = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t r = y_rank[by_x[k]];
    long long below = 0;
    for (std::size_t i = r; i > 0; i -= i & (~i + 1)) below += tree[i];
    discordant += static_cast<long long>(k) - below;
    for (std::size_t i = r; i <= n; i += i & (~i + 1)) ++tree[i];
  }
  const double pairs = 0.5 * n * (n - 1.0);
  return (pairs - 2.0 * discordant) / pairs;
}

/// Ranks 1..n of tie-free data.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = k + 1.0;
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
