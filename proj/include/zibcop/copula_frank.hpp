#pragma once

// Frank copula primitives. Every closed form is rewritten in terms of
//   X(u,v) = e^{-θu}(1 - e^{-θv}),  Y(v) = e^{-θv}(1 - e^{-θ(1-v)}),
// which share the sign of θ, so X + Y never cancels. For |θ| below
// kIndependenceBand the independence limits are returned instead.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "zibcop/error.hpp"

namespace zibcop {

inline constexpr double kIndependenceBand = 1e-8;
inline constexpr double kThetaBound = 35.0;

namespace detail {

inline void check_unit(double x, const char* who) {
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::Domain, std::string(who) + ": argument outside [0,1]");
}

inline bool independent(double theta) { return std::abs(theta) < kIndependenceBand; }

inline double frank_x(double u, double v, double theta) { return std::exp(-theta * u) * -std::expm1(-theta * v); }
inline double frank_y(double v, double theta) { return std::exp(-theta * v) * -std::expm1(-theta * (1.0 - v)); }

}  // namespace detail

/// C(u,v) = -(1/θ) log(1 + (e^{-θu}-1)(e^{-θv}-1)/(e^{-θ}-1)).
inline double frank_cdf(double u, double v, double theta) {
  detail::check_unit(u, "frank_cdf");
  detail::check_unit(v, "frank_cdf");
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  if (detail::independent(theta)) return u * v;
  const double d = std::expm1(-theta);
  const double r = std::expm1(-theta * u) * std::expm1(-theta * v) / d;
  if (std::abs(r) < 0.5) return -std::log1p(r) / theta;
  const double g = detail::frank_x(u, v, theta) + detail::frank_y(v, theta);
  return -std::log(g / -d) / theta;
}

/// log ∂C(u,v)/∂u, i.e. the log of Pr(V <= v | U = u).
inline double frank_log_cond_cdf(double v, double u, double theta) {
  detail::check_unit(u, "frank_cond_cdf");
  detail::check_unit(v, "frank_cond_cdf");
  if (v == 0.0) return -std::numeric_limits<double>::infinity();
  if (v == 1.0) return 0.0;
  if (detail::independent(theta)) return std::log(v);
  const double x = detail::frank_x(u, v, theta);
  const double y = detail::frank_y(v, theta);
  return std::log(std::abs(x)) - std::log(std::abs(x + y));
}

/// Pr(V <= v | U = u) = ∂C(u,v)/∂u.
inline double frank_cond_cdf(double v, double u, double theta) {
  detail::check_unit(u, "frank_cond_cdf");
  detail::check_unit(v, "frank_cond_cdf");
  if (v == 0.0) return 0.0;
  if (v == 1.0) return 1.0;
  if (detail::independent(theta)) return v;
  const double x = detail::frank_x(u, v, theta);
  const double y = detail::frank_y(v, theta);
  return std::clamp(x / (x + y), 0.0, 1.0);
}

inline double frank_log_pdf(double u, double v, double theta) {
  if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) fail(ErrorCode::Domain, "frank_pdf: arguments outside (0,1)");
  if (detail::independent(theta)) return 0.0;
  const double g = detail::frank_x(u, v, theta) + detail::frank_y(v, theta);
  return std::log(theta * -std::expm1(-theta)) - theta * (u + v) - 2.0 * std::log(std::abs(g));
}

/// c(u,v) = -θ(e^{-θ}-1)e^{-θ(u+v)} / [(e^{-θu}-1)(e^{-θv}-1) + (e^{-θ}-1)]².
inline double frank_pdf(double u, double v, double theta) { return std::exp(frank_log_pdf(u, v, theta)); }

/// Solves frank_cond_cdf(v, u) = w for v, v = -(1/θ) log(1 + s) with
/// s = w(e^{-θ}-1)/(w + e^{-θu}(1-w)). When s is near -1 the log is taken of
/// 1 + s = (w e^{-θ} + (1-w)e^{-θu}) / (w + (1-w)e^{-θu}), a ratio of
/// positive sums.
inline double frank_inv_cond(double w, double u, double theta) {
  detail::check_unit(w, "frank_inv_cond");
  detail::check_unit(u, "frank_inv_cond");
  if (w == 0.0) return 0.0;
  if (w == 1.0) return 1.0;
  if (detail::independent(theta)) return w;
  const double s = w * std::expm1(-theta) / (w + std::exp(-theta * u) * (1.0 - w));
  if (s >= -0.5) return std::clamp(-std::log1p(s) / theta, 0.0, 1.0);
  auto log_add = [](double a, double b) { return std::max(a, b) + std::log1p(std::exp(-std::abs(a - b))); };
  const double lw = std::log(w);
  const double l1w = std::log1p(-w) - theta * u;
  const double log_ratio = log_add(lw - theta, l1w) - log_add(lw, l1w);
  return std::clamp(-log_ratio / theta, 0.0, 1.0);
}

namespace detail {

// First Debye function D1(x) = (1/x) ∫_0^x t/(e^t - 1) dt for x > 0.
inline double debye1(double x) {
  auto integrand = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, x, 15, 1e-14);
  return integral / x;
}

}  // namespace detail

/// Kendall's tau of the Frank copula, 1 - (4/θ)(1 - D1(θ)); odd in θ.
inline double theta_to_kendall_tau(double theta) {
  const double t = std::abs(theta);
  if (t < 1e-4) return theta / 9.0 - theta * theta * theta / 900.0;
  const double tau = 1.0 - 4.0 / t * (1.0 - detail::debye1(t));
  return theta < 0.0 ? -tau : tau;
}

/// Spearman's rho of the Frank copula, 12 ∫∫ C(u,v) du dv - 3, by nested
/// Gauss-Kronrod quadrature.
inline double theta_to_spearman_rho(double theta) {
  if (detail::independent(theta)) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [theta](double u) {
    auto f = [u, theta](double v) { return frank_cdf(u, v, theta); };
    return gauss_kronrod<double, 31>::integrate(f, 0.0, 1.0, 10, 1e-13);
  };
  const double total = gauss_kronrod<double, 31>::integrate(inner, 0.0, 1.0, 10, 1e-12);
  return 12.0 * total - 3.0;
}

}  // namespace zibcop
