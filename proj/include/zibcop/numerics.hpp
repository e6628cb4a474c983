#pragma once

/**
 * @file numerics.hpp
 * @brief Special functions and scalar/vector optimizers shared by the
 *        margin, copula and two-stage estimation code.
 *
 * All routines are pure functions of their arguments and safe to call from
 * any number of threads.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "zibcop/error.hpp"

namespace zibcop {

namespace tol {
inline constexpr double kSpecial = 1e-10;
inline constexpr double kOptimizer = 1e-8;
inline constexpr int kMaxIter = 200;
inline constexpr int kMaxHalvings = 30;
}  // namespace tol

// ---------------------------------------------------------------------------
// Gamma family
// ---------------------------------------------------------------------------

/// ln Γ(x) for x > 0. Uses the reentrant glibc routine so concurrent callers
/// never race on `signgam`.
inline double log_gamma(double x) {
  if (!(x > 0.0)) fail(ErrorCode::Domain, "log_gamma: x must be positive");
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

inline double log_beta(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

/// ψ(x): upward recurrence into x >= 10, then the asymptotic series.
inline double digamma(double x) {
  if (!(x > 0.0)) fail(ErrorCode::Domain, "digamma: x must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / x;
  const double r2 = r * r;
  const double series =
      r2 * (1.0 / 12 -
            r2 * (1.0 / 120 -
                  r2 * (1.0 / 252 -
                        r2 * (1.0 / 240 -
                              r2 * (1.0 / 132 - r2 * (691.0 / 32760 - r2 / 12))))));
  return acc + std::log(x) - 0.5 * r - series;
}

/// ψ'(x): same recurrence/asymptotic split as digamma.
inline double trigamma(double x) {
  if (!(x > 0.0)) fail(ErrorCode::Domain, "trigamma: x must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / x;
  const double r2 = r * r;
  const double series =
      r * (1.0 + r * (0.5 + r * (1.0 / 6 -
                                 r2 * (1.0 / 30 -
                                       r2 * (1.0 / 42 -
                                             r2 * (1.0 / 30 -
                                                   r2 * (5.0 / 66 -
                                                         r2 * (691.0 / 2730 - r2 * 7.0 / 6))))))));
  return acc + series;
}

// ---------------------------------------------------------------------------
// Normal helpers
// ---------------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Wichura's AS 241 (PPND16), relative accuracy about 1e-16.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    fail(ErrorCode::Domain, "normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -val : val;
}

// ---------------------------------------------------------------------------
// Incomplete beta
// ---------------------------------------------------------------------------

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a,b).
inline double beta_continued_fraction(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 20000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  return h;
}

inline void check_beta_shapes(double a, double b, const char* who) {
  if (!(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b)))
    fail(ErrorCode::Domain, std::string(who) + ": shape parameters must be positive and finite");
}

}  // namespace detail

/// Log density of Beta(a, b) at x in (0,1).
inline double beta_log_pdf(double x, double a, double b) {
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b);
}

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
  detail::check_beta_shapes(a, b, "reg_inc_beta");
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::Domain, "reg_inc_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < a / (a + b)) {
    return std::clamp(std::exp(log_front) * detail::beta_continued_fraction(x, a, b) / a, 0.0, 1.0);
  }
  return std::clamp(1.0 - std::exp(log_front) * detail::beta_continued_fraction(1.0 - x, b, a) / b, 0.0,
                    1.0);
}

/// Inverse of I_x(a,b) in x. Seeded by a normal-approximation quantile (or the
/// small-shape power approximation) and refined by bracketed Newton/Halley.
inline double inv_reg_inc_beta(double q, double a, double b) {
  detail::check_beta_shapes(a, b, "inv_reg_inc_beta");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::Domain, "inv_reg_inc_beta: q outside [0,1]");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;

  double x;
  if (a >= 1.0 && b >= 1.0) {
    const double z = normal_quantile(q);
    const double al = (z * z - 3.0) / 6.0;
    const double h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
    const double w = z * std::sqrt(al + h) / h -
                     (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
    x = a / (a + b * std::exp(2.0 * w));
  } else {
    const double lna = std::log(a / (a + b));
    const double lnb = std::log(b / (a + b));
    const double t = std::exp(a * lna) / a;
    const double u = std::exp(b * lnb) / b;
    const double w = t + u;
    x = q < t / w ? std::pow(a * w * q, 1.0 / a) : 1.0 - std::pow(b * w * (1.0 - q), 1.0 / b);
  }
  if (!(x > 0.0 && x < 1.0)) x = 0.5;

  const double lbeta = log_beta(a, b);
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 1000; ++it) {
    const double err = reg_inc_beta(x, a, b) - q;
    if (err == 0.0) return x;
    if (err < 0.0) lo = x; else hi = x;
    const double log_d = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lbeta;
    double next = std::numeric_limits<double>::quiet_NaN();
    if (log_d < 700.0) {
      const double t = err / std::exp(log_d);
      const double corr = t * ((a - 1.0) / x - (b - 1.0) / (1.0 - x));
      const double step = t / (1.0 - 0.5 * std::min(1.0, corr));
      next = x - step;
    }
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::nextafter(lo, 2.0) >= hi) {
      // Bracket collapsed onto the double grid: keep the closer end.
      const double e_lo = std::abs(reg_inc_beta(lo, a, b) - q);
      const double e_hi = std::abs(reg_inc_beta(hi, a, b) - q);
      return e_lo <= e_hi ? lo : hi;
    }
    if (std::abs(next - x) <= 1e-15 * std::max(next, 1e-300)) {
      if (std::abs(err) <= 1e-14) return next;
      next = 0.5 * (lo + hi);  // stalled Newton step near a density spike
    }
    x = next;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Reference distributions used by the tests
// ---------------------------------------------------------------------------

/// Upper tail of χ² with one degree of freedom.
inline double chi2_1_sf(double x) {
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return std::isnan(t) ? t : 0.0;
  return reg_inc_beta(df / (df + t * t), 0.5 * df, 0.5);
}

/// Asymptotic Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}.
inline double kolmogorov_sf(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

struct OptimResult {
  double arg = 0.0;    ///< maximizer
  double value = 0.0;  ///< objective at `arg`
  int iterations = 0;
  bool converged = false;
  bool hit_boundary = false;
};

/// Brent's derivative-free search for a local maximum of `f` on [lo, hi].
template <class F>
OptimResult brent_optimize(F&& f, double lo, double hi, double tolerance = tol::kOptimizer,
                           int max_iter = tol::kMaxIter) {
  if (!(lo < hi)) fail(ErrorCode::InvalidArgument, "brent_optimize: lo must be < hi");
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  auto neg = [&](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "brent_optimize: objective not finite at " + std::to_string(x));
    return -v;
  };

  double a = lo;
  double b = hi;
  double v = a + golden * (b - a);
  double w = v;
  double x = v;
  double d = 0.0;
  double e = 0.0;
  double fx = neg(x);
  double fv = fx;
  double fw = fx;

  OptimResult out;
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    const double xm = 0.5 * (a + b);
    const double tol1 = sqrt_eps * std::abs(x) + tolerance / 3.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) {
      out.converged = true;
      break;
    }
    bool golden_step = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p; else q = -q;
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x >= xm) ? a - x : b - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = neg(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  out.arg = x;
  out.value = -fx;
  const double edge_tol = 3.0 * (sqrt_eps * std::abs(x) + tolerance);
  out.hit_boundary = (x - lo) <= edge_tol || (hi - x) <= edge_tol;
  return out;
}

/// Value, gradient and Hessian of an objective to be maximized.
struct NewtonEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

struct NewtonOptions {
  double tolerance = tol::kOptimizer;  ///< on the max-norm of the gradient
  int max_iter = tol::kMaxIter;
  int max_halvings = tol::kMaxHalvings;
};

struct NewtonResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool used_fallback = false;  ///< a non-negative-definite Hessian forced steepest ascent
};

/// Newton-Raphson maximization with step halving. `eval(x)` returns a
/// NewtonEval; it may return a non-finite value for infeasible points, which
/// the line search treats as "no improvement".
template <class Eval>
NewtonResult newton_raphson(Eval&& eval, Eigen::VectorXd init, const NewtonOptions& opt = {}) {
  NewtonResult out;
  out.x = std::move(init);
  if (!out.x.allFinite()) fail(ErrorCode::NonFinite, "newton_raphson: non-finite initial point");
  NewtonEval cur = eval(out.x);
  if (!std::isfinite(cur.value)) fail(ErrorCode::NonFinite, "newton_raphson: objective not finite at init");

  for (int it = 0; it < opt.max_iter; ++it) {
    out.gradient_norm = cur.gradient.template lpNorm<Eigen::Infinity>();
    if (out.gradient_norm <= opt.tolerance) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd step;
    Eigen::LLT<Eigen::MatrixXd> llt(-cur.hessian);
    bool newton_ok = llt.info() == Eigen::Success;
    if (newton_ok) {
      step = llt.solve(cur.gradient);
      newton_ok = step.allFinite();
    }
    if (!newton_ok) {
      out.used_fallback = true;
      step = cur.gradient / std::max(1.0, cur.gradient.norm());
    }
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= opt.max_halvings; ++h, scale *= 0.5) {
      Eigen::VectorXd trial = out.x + scale * step;
      NewtonEval next = eval(trial);
      // Near the optimum the objective stops resolving improvements, so a
      // change within rounding of the current value still counts.
      const double slack = 1e-13 * (1.0 + std::abs(cur.value));
      if (std::isfinite(next.value) && next.value >= cur.value - slack) {
        out.x = std::move(trial);
        cur = std::move(next);
        ++out.iterations;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  out.value = cur.value;
  out.gradient_norm = cur.gradient.template lpNorm<Eigen::Infinity>();
  if (!out.converged && out.gradient_norm <= opt.tolerance) out.converged = true;
  return out;
}

}  // namespace zibcop
