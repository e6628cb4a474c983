#pragma once

/**
 * @file two_stage.hpp
 * @brief Inference-for-margins estimation of the Frank dependence parameter,
 *        leave-one-out jackknife covariance of all estimates, and the
 *        re-scaled likelihood-ratio test.
 *
 * Stage one fits each zero-inflated beta margin on its own. Stage two
 * maximizes the pair log-likelihood over θ with the margins frozen, using
 * Brent's method on [-35, 35].
 *
 * The parameter vector η stacks margin i, margin j and θ. A margin fitted
 * without covariates contributes its natural parameters (p, μ, φ); a margin
 * with covariates contributes its coefficient vectors (ρ, δ, κ).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "zibcop/copula_frank.hpp"
#include "zibcop/error.hpp"
#include "zibcop/joint_model.hpp"
#include "zibcop/margin_zib.hpp"
#include "zibcop/numerics.hpp"

namespace zibcop {

struct PairStatus {
  bool boundary_hit = false;
  bool too_few_nonzero = false;
  bool mutually_exclusive = false;
  bool nonconverged = false;
  bool degraded_jackknife = false;  ///< more than 10% of leave-one-out refits were skipped
  bool undefined_test = false;      ///< non-negative curvature or zero jackknife variance

  bool clean() const {
    return !boundary_hit && !too_few_nonzero && !mutually_exclusive && !nonconverged && !degraded_jackknife &&
           !undefined_test;
  }
};

struct PairFit {
  ZibFit fit_i;
  ZibFit fit_j;
  double theta_hat = 0.0;
  double loglik = 0.0;  ///< ℓ(θ̃, γ̃_i, γ̃_j)
  double theta_var = std::numeric_limits<double>::quiet_NaN();  ///< jackknife variance of θ̃
  Eigen::MatrixXd cov;                                           ///< jackknife covariance of η̃
  double lambda = std::numeric_limits<double>::quiet_NaN();      ///< unscaled Λ
  double lrt_stat = std::numeric_limits<double>::quiet_NaN();    ///< Λ' = ω Λ
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double omega = std::numeric_limits<double>::quiet_NaN();
  double curvature = std::numeric_limits<double>::quiet_NaN();  ///< ℓ''(θ̃)
  int n = 0;
  int jackknife_skipped = 0;
  PairStatus status;
};

struct TwoStageOptions {
  double theta_lo = -kThetaBound;
  double theta_hi = kThetaBound;
  double brent_tol = tol::kOptimizer;
  int jackknife_newton_iter = 50;
  double jackknife_bracket = 3.0;  ///< half-width of the warm-started θ search
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

inline void check_pair_preconditions(std::span<const PairObservation> data) {
  int nz_i = 0, nz_j = 0, both = 0;
  for (const auto& o : data) {
    nz_i += o.xi > 0.0;
    nz_j += o.xj > 0.0;
    both += o.scenario == Scenario::S1;
  }
  if (nz_i < 3 || nz_j < 3) fail(ErrorCode::TooFewNonzero, "pair: a margin has fewer than three non-zero values");
  if (both < 2)
    fail(ErrorCode::MutuallyExclusive, "pair: fewer than two observations are non-zero in both margins");
}

inline ZibFit fit_margin(std::span<const double> x, const ZibRegressionSpec* spec, const FitOptions& opt = {}) {
  return spec != nullptr ? fit_zib_regression(x, *spec, opt) : fit_zib(x, opt);
}

inline MarginEval evaluate_fit(std::span<const double> x, const ZibFit& fit, const ZibRegressionSpec* spec) {
  return evaluate_margin(x, params_per_obs(fit, spec, x.size()));
}

/// Parameters a margin contributes to η (see file comment).
inline Eigen::VectorXd margin_eta(const ZibFit& fit) {
  if (!fit.has_covariates) return Eigen::Vector3d(fit.params.p, fit.params.mu, fit.params.phi);
  Eigen::VectorXd out(fit.rho.size() + fit.delta.size() + fit.kappa.size());
  out << fit.rho, fit.delta, fit.kappa;
  return out;
}

inline Eigen::VectorXd pair_eta(const ZibFit& fi, const ZibFit& fj, double theta) {
  const Eigen::VectorXd ei = margin_eta(fi);
  const Eigen::VectorXd ej = margin_eta(fj);
  Eigen::VectorXd out(ei.size() + ej.size() + 1);
  out << ei, ej, theta;
  return out;
}

/// Brent search for θ̃; widens to the full interval when a narrowed
/// bracket's interior edge is hit.
inline OptimResult maximize_theta(const PairLikelihood& lik, const TwoStageOptions& opt,
                                  std::optional<double> center = std::nullopt) {
  auto f = [&lik](double t) { return lik.copula_part(t); };
  if (center) {
    const double lo = std::max(opt.theta_lo, *center - opt.jackknife_bracket);
    const double hi = std::min(opt.theta_hi, *center + opt.jackknife_bracket);
    OptimResult r = brent_optimize(f, lo, hi, opt.brent_tol);
    const bool interior_edge = r.hit_boundary && ((std::abs(r.arg - lo) < std::abs(r.arg - hi) && lo > opt.theta_lo) ||
                                                  (std::abs(r.arg - hi) <= std::abs(r.arg - lo) && hi < opt.theta_hi));
    if (!interior_edge) return r;
  }
  return brent_optimize(f, opt.theta_lo, opt.theta_hi, opt.brent_tol);
}

// ---------------------------------------------------------------------------
// Two-stage fit
// ---------------------------------------------------------------------------

inline PairFit two_stage_fit(std::span<const PairObservation> data, const ZibRegressionSpec* spec_i = nullptr,
                             const ZibRegressionSpec* spec_j = nullptr, const TwoStageOptions& opt = {}) {
  check_pair_preconditions(data);
  const std::vector<double> xi = column_i(data);
  const std::vector<double> xj = column_j(data);

  PairFit out;
  out.n = static_cast<int>(data.size());
  out.fit_i = fit_margin(xi, spec_i);
  out.fit_j = fit_margin(xj, spec_j);
  const PairLikelihood lik(evaluate_fit(xi, out.fit_i, spec_i), evaluate_fit(xj, out.fit_j, spec_j));
  const OptimResult r = maximize_theta(lik, opt);
  out.theta_hat = r.arg;
  out.loglik = lik(r.arg);
  out.status.boundary_hit = r.hit_boundary;
  out.status.nonconverged = !out.fit_i.converged || !out.fit_j.converged || !r.converged;
  return out;
}

// ---------------------------------------------------------------------------
// Jackknife
// ---------------------------------------------------------------------------

/// Leave-one-out refits of one margin. `fits[l]` is empty when dropping row l
/// leaves fewer than three non-zero values or the refit fails. When
/// `cache_evals` is set the margin evaluations under each refit are stored so
/// they can be shared by every pair containing this margin.
struct MarginJackknife {
  std::vector<std::optional<ZibFit>> fits;
  std::vector<MarginEval> evals;

  MarginEval eval(std::size_t l, std::span<const double> x, const ZibRegressionSpec* spec) const {
    if (!evals.empty()) return evals[l];
    return evaluate_fit(x, *fits[l], spec);
  }
};

inline MarginJackknife margin_leave_one_out(std::span<const double> x, const ZibFit& full,
                                            const ZibRegressionSpec* spec, bool cache_evals,
                                            const TwoStageOptions& opt = {}) {
  const std::size_t n = x.size();
  MarginJackknife out;
  out.fits.resize(n);
  if (cache_evals) out.evals.resize(n);
  int nonzero = 0;
  for (double v : x) nonzero += v > 0.0;

  FitOptions fopt;
  fopt.warm_start = &full;
  fopt.newton.max_iter = opt.jackknife_newton_iter;
  std::vector<double> sub(n - 1);
  std::vector<Eigen::Index> keep(n - 1);
  for (std::size_t l = 0; l < n; ++l) {
    if (nonzero - (x[l] > 0.0) < 3) continue;
    for (std::size_t r = 0, k = 0; r < n; ++r) {
      if (r == l) continue;
      sub[k] = x[r];
      keep[k] = static_cast<Eigen::Index>(r);
      ++k;
    }
    try {
      if (spec != nullptr) {
        const ZibRegressionSpec sub_spec = spec->subset(keep);
        out.fits[l] = fit_zib_regression(sub, sub_spec, fopt);
      } else {
        out.fits[l] = fit_zib(sub, fopt);
      }
    } catch (const Error&) {
      continue;
    }
    if (cache_evals) out.evals[l] = evaluate_fit(x, *out.fits[l], spec);
  }
  return out;
}

struct JackknifeResult {
  Eigen::MatrixXd cov;
  int skipped = 0;
  bool degraded = false;
};

/// Σ_l (η̃⁽ˡ⁾ − η̃)(η̃⁽ˡ⁾ − η̃)ᵀ from precomputed margin refits.
inline JackknifeResult jackknife_cov(std::span<const PairObservation> data, const PairFit& fit,
                                     const MarginJackknife& jk_i, const MarginJackknife& jk_j,
                                     const ZibRegressionSpec* spec_i = nullptr,
                                     const ZibRegressionSpec* spec_j = nullptr, const TwoStageOptions& opt = {}) {
  const std::size_t n = data.size();
  const std::vector<double> xi = column_i(data);
  const std::vector<double> xj = column_j(data);
  int co_nonzero = 0;
  for (const auto& o : data) co_nonzero += o.scenario == Scenario::S1;

  const Eigen::VectorXd eta = pair_eta(fit.fit_i, fit.fit_j, fit.theta_hat);
  JackknifeResult out;
  out.cov = Eigen::MatrixXd::Zero(eta.size(), eta.size());
  for (std::size_t l = 0; l < n; ++l) {
    if (!jk_i.fits[l] || !jk_j.fits[l] || co_nonzero - (data[l].scenario == Scenario::S1) < 2) {
      ++out.skipped;
      continue;
    }
    const PairLikelihood lik(jk_i.eval(l, xi, spec_i), jk_j.eval(l, xj, spec_j), l);
    double theta_l;
    try {
      theta_l = maximize_theta(lik, opt, fit.theta_hat).arg;
    } catch (const Error&) {
      ++out.skipped;
      continue;
    }
    const Eigen::VectorXd d = pair_eta(*jk_i.fits[l], *jk_j.fits[l], theta_l) - eta;
    if (d.size() != eta.size() || !d.allFinite()) {
      ++out.skipped;
      continue;
    }
    out.cov.noalias() += d * d.transpose();
  }
  out.degraded = out.skipped > 0.1 * static_cast<double>(n);
  return out;
}

inline JackknifeResult jackknife_cov(std::span<const PairObservation> data, const PairFit& fit,
                                     const ZibRegressionSpec* spec_i = nullptr,
                                     const ZibRegressionSpec* spec_j = nullptr, const TwoStageOptions& opt = {}) {
  const std::vector<double> xi = column_i(data);
  const std::vector<double> xj = column_j(data);
  const MarginJackknife jk_i = margin_leave_one_out(xi, fit.fit_i, spec_i, false, opt);
  const MarginJackknife jk_j = margin_leave_one_out(xj, fit.fit_j, spec_j, false, opt);
  return jackknife_cov(data, fit, jk_i, jk_j, spec_i, spec_j, opt);
}

/// Copies a jackknife result into the fit, including the θ variance entry.
inline void attach_jackknife(PairFit& fit, const JackknifeResult& jk) {
  fit.cov = jk.cov;
  fit.theta_var = jk.cov(jk.cov.rows() - 1, jk.cov.cols() - 1);
  fit.jackknife_skipped = jk.skipped;
  fit.status.degraded_jackknife = jk.degraded;
}

// ---------------------------------------------------------------------------
// Re-scaled likelihood-ratio test
// ---------------------------------------------------------------------------

struct LrtResult {
  double lambda = 0.0;        ///< −2[ℓ(θ₀) − ℓ(θ̃)]
  double lambda_prime = 0.0;  ///< ω Λ
  double p_value = 1.0;
  double omega = 1.0;
  double curvature = 0.0;     ///< ℓ''(θ̃) by central differences
};

/// Λ' = ω Λ with ω = (ṽ Ĩ_θθ)⁻¹, where Ĩ_θθ = −ℓ''(θ̃)/n and ṽ = n·Var_jk(θ̃)
/// is the jackknife estimate of the asymptotic variance of √n(θ̃ − θ).
inline LrtResult rescaled_lrt(const PairLikelihood& lik, double theta_hat, double theta_var, double theta0) {
  if (!(theta0 >= -kThetaBound && theta0 <= kThetaBound))
    fail(ErrorCode::InvalidArgument, "rescaled_lrt: theta0 outside [-35, 35]");
  const double n = static_cast<double>(lik.size());
  LrtResult out;
  const double l_hat = lik.copula_part(theta_hat);
  out.lambda = -2.0 * (lik.copula_part(theta0) - l_hat);
  if (out.lambda < 0.0 && std::abs(out.lambda) < 1e-8) out.lambda = 0.0;

  const double h = 1e-4 * (1.0 + std::abs(theta_hat));
  out.curvature = (lik.copula_part(theta_hat + h) - 2.0 * l_hat + lik.copula_part(theta_hat - h)) / (h * h);
  if (!(out.curvature < 0.0))
    fail(ErrorCode::NonpositiveCurvature, "rescaled_lrt: profile log-likelihood is not curved downward at theta");
  if (!(theta_var > 0.0) || !std::isfinite(theta_var))
    fail(ErrorCode::NonpositiveCurvature, "rescaled_lrt: jackknife variance of theta is not positive");

  const double info = -out.curvature / n;
  const double v = n * theta_var;
  out.omega = 1.0 / (v * info);
  out.lambda_prime = out.omega * out.lambda;
  out.p_value = chi2_1_sf(out.lambda_prime);
  return out;
}

inline LrtResult rescaled_lrt(std::span<const PairObservation> data, const PairFit& fit, double theta0,
                              const ZibRegressionSpec* spec_i = nullptr, const ZibRegressionSpec* spec_j = nullptr) {
  const PairLikelihood lik(evaluate_fit(column_i(data), fit.fit_i, spec_i),
                           evaluate_fit(column_j(data), fit.fit_j, spec_j));
  return rescaled_lrt(lik, fit.theta_hat, fit.theta_var, theta0);
}

inline void attach_test(PairFit& fit, const LrtResult& t) {
  fit.lambda = t.lambda;
  fit.lrt_stat = t.lambda_prime;
  fit.p_value = t.p_value;
  fit.omega = t.omega;
  fit.curvature = t.curvature;
}

/// Two-stage fit, jackknife covariance and the test of θ = 0. A test that
/// cannot be formed is reported through `status.undefined_test` with a NaN
/// p-value rather than an exception.
inline PairFit independence_test(std::span<const PairObservation> data, const ZibRegressionSpec* spec_i = nullptr,
                                 const ZibRegressionSpec* spec_j = nullptr, const TwoStageOptions& opt = {}) {
  PairFit fit = two_stage_fit(data, spec_i, spec_j, opt);
  attach_jackknife(fit, jackknife_cov(data, fit, spec_i, spec_j, opt));
  try {
    attach_test(fit, rescaled_lrt(data, fit, 0.0, spec_i, spec_j));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonpositiveCurvature) throw;
    fit.status.undefined_test = true;
  }
  return fit;
}

}  // namespace zibcop
