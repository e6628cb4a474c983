#pragma once

// Sample correlation tests of independence: Pearson and Spearman with the
// Student-t approximation, Kendall's tau-b with the tie-corrected normal
// approximation and a unit continuity correction on S.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "zibcop/error.hpp"
#include "zibcop/numerics.hpp"

namespace zibcop {

struct CorrelationTest {
  double estimate = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  ///< a constant input; p-value set to 1
};

struct CorrelationTests {
  CorrelationTest pearson, spearman, kendall;
};

namespace detail {

inline void check_lengths(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidArgument, "correlation: length mismatch");
  if (x.size() < 5) fail(ErrorCode::InvalidArgument, "correlation: need at least five observations");
}

inline CorrelationTest t_test_of_r(double r, double n, bool degenerate) {
  if (degenerate) return {0.0, 1.0, true};
  r = std::clamp(r, -1.0, 1.0);
  if (std::abs(r) == 1.0) return {r, 0.0, false};
  const double t = r * std::sqrt((n - 2.0) / (1.0 - r * r));
  return {r, student_t_two_sided(t, n - 2.0), false};
}

inline double pearson_r(std::span<const double> x, std::span<const double> y, bool& degenerate) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  degenerate = !(sxx > 0.0) || !(syy > 0.0);
  return degenerate ? 0.0 : sxy / std::sqrt(sxx * syy);
}

/// Mid-ranks (ties share the average rank).
inline std::vector<double> mid_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

struct TieSums {
  double pairs = 0;  // Σ t(t-1)/2
  double v0 = 0;     // Σ t(t-1)(2t+5)
  double v1 = 0;     // Σ t(t-1)
  double v2 = 0;     // Σ t(t-1)(t-2)
  void add(double t) {
    pairs += t * (t - 1) / 2;
    v0 += t * (t - 1) * (2 * t + 5);
    v1 += t * (t - 1);
    v2 += t * (t - 1) * (t - 2);
  }
};

// Merge sort of `a` counting strict inversions.
inline std::int64_t count_inversions(std::vector<double>& a, std::vector<double>& buf, std::size_t lo,
                                     std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(a, buf, lo, mid) + count_inversions(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[i] <= a[j]) {
      buf[k++] = a[i++];
    } else {
      inv += static_cast<std::int64_t>(mid - i);
      buf[k++] = a[j++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, a.begin() + lo);
  return inv;
}

}  // namespace detail

inline CorrelationTest pearson_test(std::span<const double> x, std::span<const double> y) {
  detail::check_lengths(x, y);
  bool degenerate;
  const double r = detail::pearson_r(x, y, degenerate);
  return detail::t_test_of_r(r, static_cast<double>(x.size()), degenerate);
}

inline CorrelationTest spearman_test(std::span<const double> x, std::span<const double> y) {
  detail::check_lengths(x, y);
  const auto rx = detail::mid_ranks(x);
  const auto ry = detail::mid_ranks(y);
  bool degenerate;
  const double r = detail::pearson_r(rx, ry, degenerate);
  return detail::t_test_of_r(r, static_cast<double>(x.size()), degenerate);
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
inline CorrelationTest kendall_test(std::span<const double> x, std::span<const double> y) {
  detail::check_lengths(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  detail::TieSums tx, ty;
  double joint_pairs = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    tx.add(static_cast<double>(j - i + 1));
    for (std::size_t a = i; a <= j;) {
      std::size_t b = a;
      while (b + 1 <= j && y[idx[b + 1]] == y[idx[a]]) ++b;
      const double t = static_cast<double>(b - a + 1);
      joint_pairs += t * (t - 1) / 2;
      a = b + 1;
    }
    i = j + 1;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = y[idx[k]];
  const auto swaps = static_cast<double>(detail::count_inversions(ys, buf, 0, n));
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
    ty.add(static_cast<double>(j - i + 1));
    i = j + 1;
  }

  const double nd = static_cast<double>(n);
  const double n0 = nd * (nd - 1) / 2;
  if (tx.pairs == n0 || ty.pairs == n0) return {0.0, 1.0, true};
  const double s = n0 - tx.pairs - ty.pairs + joint_pairs - 2.0 * swaps;
  const double tau = s / std::sqrt((n0 - tx.pairs) * (n0 - ty.pairs));
  const double var = (nd * (nd - 1) * (2 * nd + 5) - tx.v0 - ty.v0) / 18.0 + tx.v1 * ty.v1 / (2 * nd * (nd - 1)) +
                     tx.v2 * ty.v2 / (9 * nd * (nd - 1) * (nd - 2));
  const double z = std::max(std::abs(s) - 1.0, 0.0) / std::sqrt(var);
  return {tau, std::erfc(z / std::numbers::sqrt2), false};
}

inline CorrelationTests correlation_tests(std::span<const double> x, std::span<const double> y) {
  return {pearson_test(x, y), spearman_test(x, y), kendall_test(x, y)};
}

}  // namespace zibcop
