#pragma once

// Zero-inflated beta margin: point mass p at zero plus (1-p) Beta(mu*phi,
// (1-mu)*phi) on (0,1). Covariates enter through logit(p), logit(mu) and
// log(phi).

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zibcop/error.hpp"
#include "zibcop/numerics.hpp"

namespace zibcop {

inline constexpr double kLogFloor = -745.0;         ///< per-term floor used for underflowing log terms
inline constexpr double kUpperClamp = 1.0 - 1e-10;  ///< relative abundances at 1 are moved here

inline double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

/// log(1 + e^eta) without overflow.
inline double log1p_exp(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

struct ZibParams {
  double p = 0.0;    ///< Pr(x = 0)
  double mu = 0.5;   ///< beta mean
  double phi = 1.0;  ///< beta precision

  double a() const { return mu * phi; }
  double b() const { return (1.0 - mu) * phi; }

  bool valid() const {
    return p >= 0.0 && p < 1.0 && mu > 0.0 && mu < 1.0 && phi > 0.0 && std::isfinite(phi) && a() > 0.0 &&
           b() > 0.0;
  }
  void validate() const {
    if (!valid()) fail(ErrorCode::Domain, "ZibParams: require 0<=p<1, 0<mu<1, phi>0");
  }
};

enum class Link { Logit, Log };

struct Links {
  Link p = Link::Logit;
  Link mu = Link::Logit;
  Link phi = Link::Log;
};

/// Design matrices for the three regression components. Each must contain an
/// intercept column and have one row per observation.
struct ZibRegressionSpec {
  Eigen::MatrixXd q;  ///< presence-absence design (models Pr(x = 0))
  Eigen::MatrixXd w;  ///< mean design
  Eigen::MatrixXd z;  ///< dispersion design
  Links links;

  static ZibRegressionSpec intercept_only(Eigen::Index n) {
    return {Eigen::MatrixXd::Ones(n, 1), Eigen::MatrixXd::Ones(n, 1), Eigen::MatrixXd::Ones(n, 1), {}};
  }

  Eigen::Index rows() const { return q.rows(); }

  /// Keep only the listed rows of all three designs.
  ZibRegressionSpec subset(std::span<const Eigen::Index> keep) const {
    ZibRegressionSpec out{Eigen::MatrixXd(keep.size(), q.cols()), Eigen::MatrixXd(keep.size(), w.cols()),
                          Eigen::MatrixXd(keep.size(), z.cols()), links};
    for (std::size_t r = 0; r < keep.size(); ++r) {
      out.q.row(r) = q.row(keep[r]);
      out.w.row(r) = w.row(keep[r]);
      out.z.row(r) = z.row(keep[r]);
    }
    return out;
  }

  void validate(Eigen::Index n) const {
    if (q.rows() != n || w.rows() != n || z.rows() != n)
      fail(ErrorCode::InvalidArgument, "ZibRegressionSpec: design row counts must match the data length");
    if (q.cols() < 1 || w.cols() < 1 || z.cols() < 1)
      fail(ErrorCode::InvalidArgument, "ZibRegressionSpec: every design needs at least an intercept column");
    if (links.p != Link::Logit || links.mu != Link::Logit || links.phi != Link::Log)
      fail(ErrorCode::InvalidArgument, "ZibRegressionSpec: only logit (p, mu) and log (phi) links are supported");
  }
};

struct ZibFit {
  Eigen::VectorXd rho;    ///< presence-absence coefficients (logit Pr(x=0))
  Eigen::VectorXd delta;  ///< mean coefficients (logit mu)
  Eigen::VectorXd kappa;  ///< dispersion coefficients (log phi)
  ZibParams params;       ///< exact natural-scale parameters when fitted without covariates
  double loglik = 0.0;
  bool converged = false;
  bool perfect_separation = false;
  bool has_covariates = false;
  int n = 0;
  int n_nonzero = 0;
};

// ---------------------------------------------------------------------------
// Distribution functions
// ---------------------------------------------------------------------------

namespace detail {
inline void check_half_open(double x, const char* who) {
  if (!(x >= 0.0 && x < 1.0)) fail(ErrorCode::Domain, std::string(who) + ": x outside [0,1)");
}
inline void check_closed(double x, const char* who) {
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::Domain, std::string(who) + ": argument outside [0,1]");
}
}  // namespace detail

/// Probability at x = 0, density (1-p) f_beta(x) elsewhere. Log scale.
inline double zib_log_pdf(double x, const ZibParams& g) {
  detail::check_half_open(x, "zib_pdf");
  if (x == 0.0) return std::log(g.p);
  return std::log1p(-g.p) + beta_log_pdf(x, g.a(), g.b());
}

inline double zib_pdf(double x, const ZibParams& g) {
  detail::check_half_open(x, "zib_pdf");
  if (x == 0.0) return g.p;
  return (1.0 - g.p) * std::exp(beta_log_pdf(x, g.a(), g.b()));
}

inline double zib_cdf(double x, const ZibParams& g) {
  detail::check_closed(x, "zib_cdf");
  if (x >= 1.0) return 1.0;
  if (x == 0.0) return g.p;
  return g.p + (1.0 - g.p) * reg_inc_beta(x, g.a(), g.b());
}

/// F(x-): zero at the atom, equal to F(x) elsewhere.
inline double zib_cdf_left(double x, const ZibParams& g) {
  detail::check_closed(x, "zib_cdf_left");
  if (x == 0.0) return 0.0;
  return zib_cdf(x, g);
}

/// Generalized inverse of zib_cdf.
inline double zib_quantile(double u, const ZibParams& g) {
  detail::check_closed(u, "zib_quantile");
  if (u <= g.p) return 0.0;
  const double x = inv_reg_inc_beta((u - g.p) / (1.0 - g.p), g.a(), g.b());
  return std::min(x, kUpperClamp);
}

struct LogLik {
  double value = 0.0;
  bool underflow = false;  ///< at least one term was -inf and replaced by kLogFloor
};

inline LogLik zib_loglik(std::span<const double> data, std::span<const ZibParams> params) {
  if (data.size() != params.size()) fail(ErrorCode::InvalidArgument, "zib_loglik: size mismatch");
  LogLik out;
  for (std::size_t l = 0; l < data.size(); ++l) {
    double t = zib_log_pdf(data[l], params[l]);
    if (!(t > kLogFloor)) {
      t = kLogFloor;
      out.underflow = true;
    }
    out.value += t;
  }
  return out;
}

inline LogLik zib_loglik(std::span<const double> data, const ZibParams& params) {
  std::vector<ZibParams> rep(data.size(), params);
  return zib_loglik(data, rep);
}

/// Moves values at (or numerically at) 1 onto the support; returns the count.
/// Negative or non-finite values are rejected.
inline std::size_t clamp_to_support(std::span<double> data) {
  std::size_t moved = 0;
  for (double& x : data) {
    if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorCode::Domain, "relative abundance must be finite and >= 0");
    if (x > 1.0 + 1e-9) fail(ErrorCode::Domain, "relative abundance exceeds 1");
    if (x > kUpperClamp) {
      x = kUpperClamp;
      ++moved;
    }
  }
  return moved;
}

// ---------------------------------------------------------------------------
// Parameters per observation
// ---------------------------------------------------------------------------

inline ZibParams params_at(const ZibFit& fit, const ZibRegressionSpec* spec, Eigen::Index row) {
  if (spec == nullptr || !fit.has_covariates) return fit.params;
  return {logistic(spec->q.row(row).dot(fit.rho)), logistic(spec->w.row(row).dot(fit.delta)),
          std::exp(spec->z.row(row).dot(fit.kappa))};
}

inline std::vector<ZibParams> params_per_obs(const ZibFit& fit, const ZibRegressionSpec* spec, std::size_t n) {
  std::vector<ZibParams> out(n);
  for (std::size_t l = 0; l < n; ++l) out[l] = params_at(fit, spec, static_cast<Eigen::Index>(l));
  return out;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

namespace detail {

// Log-likelihood of one beta observation and its derivatives in (mu, phi),
// with log x and log(1-x) supplied (averages when used with weights).
struct BetaTerms {
  double l, d_mu, d_phi, d_mumu, d_muphi, d_phiphi;
};

inline std::optional<BetaTerms> beta_terms(double mu, double phi, double log_x, double log_1mx) {
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  if (!(a > 0.0 && b > 0.0 && std::isfinite(phi)) || !(mu > 0.0 && mu < 1.0)) return std::nullopt;
  const double psi_a = digamma(a);
  const double psi_b = digamma(b);
  const double tri_a = trigamma(a);
  const double tri_b = trigamma(b);
  const double ystar = log_x - log_1mx;
  const double mustar = psi_a - psi_b;
  BetaTerms t;
  t.l = log_gamma(phi) - log_gamma(a) - log_gamma(b) + (a - 1.0) * log_x + (b - 1.0) * log_1mx;
  t.d_mu = phi * (ystar - mustar);
  t.d_phi = digamma(phi) + mu * (ystar - mustar) + log_1mx - psi_b;
  t.d_mumu = -phi * phi * (tri_a + tri_b);
  t.d_muphi = (ystar - mustar) - phi * (mu * tri_a - (1.0 - mu) * tri_b);
  t.d_phiphi = trigamma(phi) - mu * mu * tri_a - (1.0 - mu) * (1.0 - mu) * tri_b;
  return t;
}

inline NewtonEval infeasible(Eigen::Index dim) {
  return {-std::numeric_limits<double>::infinity(), Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
}

// Beta block in (logit mu, log phi) using sufficient statistics.
inline NewtonEval beta_intercept_eval(const Eigen::VectorXd& eta, double n1, double mean_log_x,
                                      double mean_log_1mx) {
  const double mu = logistic(eta[0]);
  const double phi = std::exp(eta[1]);
  const auto t = beta_terms(mu, phi, mean_log_x, mean_log_1mx);
  if (!t) return infeasible(2);
  const double dmu = mu * (1.0 - mu);
  const double d2mu = dmu * (1.0 - 2.0 * mu);
  NewtonEval e;
  e.value = n1 * t->l;
  e.gradient.resize(2);
  e.gradient << n1 * t->d_mu * dmu, n1 * t->d_phi * phi;
  e.hessian.resize(2, 2);
  e.hessian(0, 0) = n1 * (t->d_mumu * dmu * dmu + t->d_mu * d2mu);
  e.hessian(1, 1) = n1 * (t->d_phiphi * phi * phi + t->d_phi * phi);
  e.hessian(0, 1) = e.hessian(1, 0) = n1 * t->d_muphi * dmu * phi;
  return e;
}

// Beta block with per-observation designs; parameter vector is (delta, kappa).
inline NewtonEval beta_regression_eval(const Eigen::VectorXd& par, const Eigen::MatrixXd& w,
                                       const Eigen::MatrixXd& z, const Eigen::VectorXd& log_x,
                                       const Eigen::VectorXd& log_1mx) {
  const Eigen::Index kw = w.cols();
  const Eigen::Index kz = z.cols();
  const Eigen::Index dim = kw + kz;
  NewtonEval e{0.0, Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
  const Eigen::VectorXd eta_mu = w * par.head(kw);
  const Eigen::VectorXd eta_phi = z * par.tail(kz);
  for (Eigen::Index l = 0; l < w.rows(); ++l) {
    const double mu = logistic(eta_mu[l]);
    const double phi = std::exp(eta_phi[l]);
    const auto t = beta_terms(mu, phi, log_x[l], log_1mx[l]);
    if (!t) return infeasible(dim);
    const double dmu = mu * (1.0 - mu);
    const double d2mu = dmu * (1.0 - 2.0 * mu);
    e.value += t->l;
    e.gradient.head(kw) += (t->d_mu * dmu) * w.row(l).transpose();
    e.gradient.tail(kz) += (t->d_phi * phi) * z.row(l).transpose();
    const double hmm = t->d_mumu * dmu * dmu + t->d_mu * d2mu;
    const double hpp = t->d_phiphi * phi * phi + t->d_phi * phi;
    const double hmp = t->d_muphi * dmu * phi;
    e.hessian.topLeftCorner(kw, kw) += hmm * w.row(l).transpose() * w.row(l);
    e.hessian.bottomRightCorner(kz, kz) += hpp * z.row(l).transpose() * z.row(l);
    e.hessian.topRightCorner(kw, kz) += hmp * w.row(l).transpose() * z.row(l);
  }
  e.hessian.bottomLeftCorner(kz, kw) = e.hessian.topRightCorner(kw, kz).transpose();
  return e;
}

// Binary logistic log-likelihood for the zero indicator.
inline NewtonEval logistic_eval(const Eigen::VectorXd& rho, const Eigen::MatrixXd& q, const Eigen::VectorXd& y) {
  const Eigen::Index k = q.cols();
  NewtonEval e{0.0, Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, k)};
  const Eigen::VectorXd eta = q * rho;
  for (Eigen::Index l = 0; l < q.rows(); ++l) {
    const double p = logistic(eta[l]);
    e.value += y[l] * eta[l] - log1p_exp(eta[l]);
    e.gradient += (y[l] - p) * q.row(l).transpose();
    e.hessian -= (p * (1.0 - p)) * q.row(l).transpose() * q.row(l);
  }
  return e;
}

struct MomentStart {
  double mu, phi;
};

inline MomentStart moment_start(std::span<const double> nonzero) {
  double mean = 0.0;
  for (double x : nonzero) mean += x;
  mean /= static_cast<double>(nonzero.size());
  double var = 0.0;
  for (double x : nonzero) var += (x - mean) * (x - mean);
  var /= static_cast<double>(nonzero.size());
  double phi = var > 0.0 ? mean * (1.0 - mean) / var - 1.0 : 1e4;
  phi = std::clamp(phi, 0.1, 1e4);
  return {std::clamp(mean, 1e-6, 1.0 - 1e-6), phi};
}

inline void check_data(std::span<const double> data, int& n_nonzero) {
  n_nonzero = 0;
  for (double x : data) {
    if (!(x >= 0.0 && x < 1.0)) fail(ErrorCode::Domain, "fit: observations must lie in [0,1)");
    if (x > 0.0) ++n_nonzero;
  }
  if (n_nonzero < 3) fail(ErrorCode::TooFewNonzero, "fit: fewer than three non-zero observations");
}

inline void check_rank(const Eigen::MatrixXd& m, const char* which) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  if (qr.rank() < m.cols())
    fail(ErrorCode::RankDeficientDesign, std::string("design matrix for ") + which + " is rank deficient");
}

}  // namespace detail

struct FitOptions {
  NewtonOptions newton{};
  const ZibFit* warm_start = nullptr;  ///< start the beta block from these coefficients
};

/// Intercept-only maximum likelihood fit. p is the zero fraction in closed
/// form; (mu, phi) come from Newton-Raphson on (logit mu, log phi) seeded by
/// the method of moments (or by `opt.warm_start`).
inline ZibFit fit_zib(std::span<const double> data, const FitOptions& opt = {}) {
  ZibFit fit;
  detail::check_data(data, fit.n_nonzero);
  fit.n = static_cast<int>(data.size());
  const int zeros = fit.n - fit.n_nonzero;

  std::vector<double> nonzero;
  nonzero.reserve(fit.n_nonzero);
  double sum_lx = 0.0;
  double sum_l1x = 0.0;
  for (double x : data) {
    if (x > 0.0) {
      nonzero.push_back(x);
      sum_lx += std::log(x);
      sum_l1x += std::log1p(-x);
    }
  }
  const double n1 = fit.n_nonzero;
  const double mlx = sum_lx / n1;
  const double ml1x = sum_l1x / n1;
  auto eval = [&](const Eigen::VectorXd& eta) { return detail::beta_intercept_eval(eta, n1, mlx, ml1x); };

  auto run = [&](const Eigen::VectorXd& start) { return newton_raphson(eval, start, opt.newton); };
  const auto mom = detail::moment_start(nonzero);
  Eigen::VectorXd mom_start(2);
  mom_start << logit(mom.mu), std::log(mom.phi);

  NewtonResult nr;
  if (opt.warm_start != nullptr && opt.warm_start->delta.size() == 1 && opt.warm_start->kappa.size() == 1) {
    Eigen::VectorXd warm(2);
    warm << opt.warm_start->delta[0], opt.warm_start->kappa[0];
    nr = run(warm);
    if (!nr.converged) nr = run(mom_start);
  } else {
    nr = run(mom_start);
  }

  const double p_hat = static_cast<double>(zeros) / fit.n;
  fit.params = {p_hat, logistic(nr.x[0]), std::exp(nr.x[1])};
  fit.rho = Eigen::VectorXd::Constant(1, zeros == 0 ? -std::numeric_limits<double>::infinity() : logit(p_hat));
  fit.delta = nr.x.head(1);
  fit.kappa = nr.x.tail(1);
  fit.converged = nr.converged;
  double binary = 0.0;
  if (zeros > 0) binary += zeros * std::log(p_hat);
  binary += fit.n_nonzero * std::log1p(-p_hat);
  fit.loglik = binary + nr.value;
  return fit;
}

/// Zero-inflated beta regression. The zero-indicator block (rho) and the
/// beta block (delta, kappa) share no parameters, so each is maximized on
/// its own.
inline ZibFit fit_zib_regression(std::span<const double> data, const ZibRegressionSpec& spec,
                                 const FitOptions& opt = {}) {
  ZibFit fit;
  detail::check_data(data, fit.n_nonzero);
  const auto n = static_cast<Eigen::Index>(data.size());
  spec.validate(n);
  fit.n = static_cast<int>(n);
  fit.has_covariates = true;
  const int zeros = fit.n - fit.n_nonzero;

  Eigen::VectorXd y(n);
  std::vector<Eigen::Index> nz_rows;
  for (Eigen::Index l = 0; l < n; ++l) {
    y[l] = data[l] == 0.0 ? 1.0 : 0.0;
    if (data[l] > 0.0) nz_rows.push_back(l);
  }
  const auto n1 = static_cast<Eigen::Index>(nz_rows.size());
  Eigen::MatrixXd w1(n1, spec.w.cols());
  Eigen::MatrixXd z1(n1, spec.z.cols());
  Eigen::VectorXd log_x(n1);
  Eigen::VectorXd log_1mx(n1);
  std::vector<double> nonzero(n1);
  for (Eigen::Index r = 0; r < n1; ++r) {
    const Eigen::Index l = nz_rows[r];
    w1.row(r) = spec.w.row(l);
    z1.row(r) = spec.z.row(l);
    nonzero[r] = data[l];
    log_x[r] = std::log(data[l]);
    log_1mx[r] = std::log1p(-data[l]);
  }
  detail::check_rank(spec.q, "presence-absence");
  detail::check_rank(w1, "mean");
  detail::check_rank(z1, "dispersion");

  // Zero-indicator block.
  const Eigen::Index kq = spec.q.cols();
  const double p_hat = static_cast<double>(zeros) / fit.n;
  Eigen::VectorXd rho0 = Eigen::VectorXd::Zero(kq);
  rho0[0] = logit(std::clamp(p_hat, 0.5 / fit.n, 1.0 - 0.5 / fit.n));
  if (opt.warm_start != nullptr && opt.warm_start->rho.size() == kq && opt.warm_start->rho.allFinite())
    rho0 = opt.warm_start->rho;
  auto binary_eval = [&](const Eigen::VectorXd& r) { return detail::logistic_eval(r, spec.q, y); };
  NewtonResult bin = newton_raphson(binary_eval, rho0, opt.newton);
  fit.rho = bin.x;
  {
    const Eigen::VectorXd eta = spec.q * fit.rho;
    bool separated = zeros == 0;
    if (!separated) {
      separated = true;
      for (Eigen::Index l = 0; l < n; ++l) {
        const double p = logistic(eta[l]);
        if ((y[l] == 1.0 && p < 1.0 - 1e-8) || (y[l] == 0.0 && p > 1e-8)) {
          separated = false;
          break;
        }
      }
    }
    fit.perfect_separation = separated || eta.cwiseAbs().maxCoeff() > 30.0;
  }

  // Beta block.
  const Eigen::Index kw = spec.w.cols();
  const Eigen::Index kz = spec.z.cols();
  auto beta_eval = [&](const Eigen::VectorXd& par) {
    return detail::beta_regression_eval(par, w1, z1, log_x, log_1mx);
  };
  const auto mom = detail::moment_start(nonzero);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(kw + kz);
  start[0] = logit(mom.mu);
  start[kw] = std::log(mom.phi);
  NewtonResult nr;
  if (opt.warm_start != nullptr && opt.warm_start->delta.size() == kw && opt.warm_start->kappa.size() == kz) {
    Eigen::VectorXd warm(kw + kz);
    warm << opt.warm_start->delta, opt.warm_start->kappa;
    nr = newton_raphson(beta_eval, warm, opt.newton);
    if (!nr.converged) nr = newton_raphson(beta_eval, start, opt.newton);
  } else {
    nr = newton_raphson(beta_eval, start, opt.newton);
  }
  fit.delta = nr.x.head(kw);
  fit.kappa = nr.x.tail(kz);
  fit.converged = nr.converged && bin.converged;
  fit.params = params_at(fit, &spec, 0);
  fit.loglik = bin.value + nr.value;
  return fit;
}

}  // namespace zibcop
