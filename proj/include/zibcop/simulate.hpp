#pragma once

// Sampling from the ZIB-Frank model by inverting the Rosenblatt transform,
// and the Monte-Carlo harness for bias, variance, size and power studies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zibcop/copula_frank.hpp"
#include "zibcop/correlation.hpp"
#include "zibcop/error.hpp"
#include "zibcop/joint_model.hpp"
#include "zibcop/margin_zib.hpp"
#include "zibcop/parallel.hpp"
#include "zibcop/rng.hpp"
#include "zibcop/two_stage.hpp"

namespace zibcop {

inline constexpr int kGuardCap = 1000;

struct Sample {
  std::vector<PairObservation> data;
  std::vector<double> covariate_i;  ///< per-margin covariates; empty unless drawn with one
  std::vector<double> covariate_j;
  int redraws = 0;                ///< datasets discarded by the guards
};

namespace detail {

// A dataset is kept when each margin has at least three non-zero values and
// at least two observations are non-zero in both.
inline bool guard_ok(std::span<const PairObservation> data) {
  int nz_i = 0, nz_j = 0, both = 0;
  for (const auto& o : data) {
    nz_i += o.xi > 0.0;
    nz_j += o.xj > 0.0;
    both += o.scenario == Scenario::S1;
  }
  return nz_i >= 3 && nz_j >= 3 && both >= 2;
}

}  // namespace detail

/// Latent Frank pair: u uniform, v = C⁻¹(w | u) for an independent uniform w.
inline std::pair<double, double> sample_latent(double theta, Rng& rng) {
  const double u = rng.uniform();
  const double w = rng.uniform();
  return {u, frank_inv_cond(w, u, theta)};
}

inline Sample sample_pair(int n, const ZibParams& gi, const ZibParams& gj, double theta, Rng& rng) {
  gi.validate();
  gj.validate();
  if (n < 1) fail(ErrorCode::InvalidArgument, "sample_pair: n must be positive");
  Sample s;
  s.data.resize(n);
  for (;;) {
    for (int l = 0; l < n; ++l) {
      const auto [u, v] = sample_latent(theta, rng);
      s.data[l] = PairObservation(zib_quantile(u, gi), zib_quantile(v, gj));
    }
    if (detail::guard_ok(s.data)) return s;
    if (++s.redraws >= kGuardCap) fail(ErrorCode::GuardExhausted, "sample_pair: resampling guard exhausted");
  }
}

/// True coefficients for the covariate setting: logit p_k = ρ_k0 + ρ_k1 c_k,
/// where c_i and c_j are independent standard normals (one per margin, so the
/// zero indicators are not linked through the covariate); intercept-only mean
/// (logit) and dispersion (log) models.
struct RegressionTruth {
  Eigen::Vector2d rho_i{0.0, 0.0};
  Eigen::Vector2d rho_j{0.0, 0.0};
  double delta_i = -0.7;
  double delta_j = -1.0;
  double kappa_i = 1.5;
  double kappa_j = 1.5;
};

inline Sample sample_pair_regression(int n, const RegressionTruth& truth, double theta, Rng& rng) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "sample_pair_regression: n must be positive");
  const double mu_i = logistic(truth.delta_i), mu_j = logistic(truth.delta_j);
  const double phi_i = std::exp(truth.kappa_i), phi_j = std::exp(truth.kappa_j);
  Sample s;
  s.data.resize(n);
  s.covariate_i.resize(n);
  s.covariate_j.resize(n);
  for (;;) {
    for (int l = 0; l < n; ++l) {
      const double ci = rng.normal();
      const double cj = rng.normal();
      const auto [u, v] = sample_latent(theta, rng);
      const ZibParams gi{logistic(truth.rho_i[0] + truth.rho_i[1] * ci), mu_i, phi_i};
      const ZibParams gj{logistic(truth.rho_j[0] + truth.rho_j[1] * cj), mu_j, phi_j};
      s.covariate_i[l] = ci;
      s.covariate_j[l] = cj;
      s.data[l] = PairObservation(zib_quantile(u, gi), zib_quantile(v, gj));
    }
    if (detail::guard_ok(s.data)) return s;
    if (++s.redraws >= kGuardCap)
      fail(ErrorCode::GuardExhausted, "sample_pair_regression: resampling guard exhausted");
  }
}

/// Presence-absence design [1, c] with intercept-only mean and dispersion.
inline ZibRegressionSpec covariate_on_p_spec(std::span<const double> covariate) {
  const auto n = static_cast<Eigen::Index>(covariate.size());
  ZibRegressionSpec spec = ZibRegressionSpec::intercept_only(n);
  spec.q.conservativeResize(n, 2);
  for (Eigen::Index l = 0; l < n; ++l) spec.q(l, 1) = covariate[l];
  return spec;
}

// ---------------------------------------------------------------------------
// Study harness
// ---------------------------------------------------------------------------

enum class CovariateMode { None, OneNormalOnP };

struct MarginSetting {
  ZibParams gi, gj;
};

struct SimConfig {
  int n = 50;
  int reps = 500;
  std::vector<double> theta_grid{-2.5, -1.0, 0.0, 0.5, 1.5, 3.0};
  std::vector<MarginSetting> margins;        ///< used when covariate_mode == None
  std::vector<RegressionTruth> regression;   ///< used when covariate_mode == OneNormalOnP
  CovariateMode covariate_mode = CovariateMode::None;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  int threads = 1;
  bool keep_replicates = false;

  std::size_t settings() const {
    return covariate_mode == CovariateMode::None ? margins.size() : regression.size();
  }
  std::size_t cells() const { return settings() * theta_grid.size(); }

  void validate() const {
    if (n < 10) fail(ErrorCode::InvalidArgument, "SimConfig: n must be at least 10");
    if (reps < 1) fail(ErrorCode::InvalidArgument, "SimConfig: reps must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "SimConfig: alpha must lie in (0,1)");
    if (theta_grid.empty() || settings() == 0) fail(ErrorCode::InvalidArgument, "SimConfig: empty grid");
    for (double t : theta_grid)
      if (!(std::abs(t) <= kThetaBound)) fail(ErrorCode::InvalidArgument, "SimConfig: theta outside [-35, 35]");
    for (const auto& m : margins) {
      m.gi.validate();
      m.gj.validate();
    }
  }
};

/// One replicate's estimates and test outcomes.
struct ReplicateRecord {
  double theta_hat = std::numeric_limits<double>::quiet_NaN();
  double theta_var = std::numeric_limits<double>::quiet_NaN();
  double omega = std::numeric_limits<double>::quiet_NaN();
  double lrt_stat = std::numeric_limits<double>::quiet_NaN();
  double p_lrt = std::numeric_limits<double>::quiet_NaN();
  CorrelationTests competitors;
  PairStatus status;
  int redraws = 0;
  bool failed = false;            ///< the fit raised an error
  bool guard_exhausted = false;
};

struct CellResult {
  std::size_t cell = 0;
  std::size_t setting = 0;
  double theta = 0.0;
  int reps = 0;
  int completed = 0;
  int failed = 0;
  bool infeasible = false;  ///< the resampling guard gave up
  long redraws = 0;
  int boundary_hits = 0;
  int undefined_tests = 0;
  int degraded_jackknife = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  double empirical_var = std::numeric_limits<double>::quiet_NaN();
  double mean_jackknife_var = std::numeric_limits<double>::quiet_NaN();
  double median_omega = std::numeric_limits<double>::quiet_NaN();
  double reject_lrt = std::numeric_limits<double>::quiet_NaN();
  double reject_pearson = std::numeric_limits<double>::quiet_NaN();
  double reject_spearman = std::numeric_limits<double>::quiet_NaN();
  double reject_kendall = std::numeric_limits<double>::quiet_NaN();
  std::vector<ReplicateRecord> replicates;  ///< filled when keep_replicates is set
};

struct StudyResult {
  SimConfig config;
  bool with_tests = false;
  std::vector<CellResult> cells;
};

/// Draws and analyzes replicate `rep` of `cell`. The random stream depends
/// only on (seed, cell, rep).
inline ReplicateRecord run_replicate(const SimConfig& cfg, std::size_t cell, int rep, bool with_tests) {
  const std::size_t setting = cell / cfg.theta_grid.size();
  const double theta = cfg.theta_grid[cell % cfg.theta_grid.size()];
  Rng rng(cfg.seed, cell, static_cast<std::uint64_t>(rep));
  ReplicateRecord rec;
  Sample s;
  try {
    s = cfg.covariate_mode == CovariateMode::None
            ? sample_pair(cfg.n, cfg.margins[setting].gi, cfg.margins[setting].gj, theta, rng)
            : sample_pair_regression(cfg.n, cfg.regression[setting], theta, rng);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::GuardExhausted) throw;
    rec.failed = true;
    rec.guard_exhausted = true;
    rec.redraws = kGuardCap;
    return rec;
  }
  rec.redraws = s.redraws;

  ZibRegressionSpec spec_i, spec_j;
  const ZibRegressionSpec *si = nullptr, *sj = nullptr;
  if (cfg.covariate_mode == CovariateMode::OneNormalOnP) {
    spec_i = covariate_on_p_spec(s.covariate_i);
    spec_j = covariate_on_p_spec(s.covariate_j);
    si = &spec_i;
    sj = &spec_j;
  }
  try {
    const PairFit fit = independence_test(s.data, si, sj);
    rec.theta_hat = fit.theta_hat;
    rec.theta_var = fit.theta_var;
    rec.omega = fit.omega;
    rec.lrt_stat = fit.lrt_stat;
    rec.p_lrt = fit.p_value;
    rec.status = fit.status;
  } catch (const Error&) {
    rec.failed = true;
  }
  if (with_tests) {
    const auto xi = column_i(s.data);
    const auto xj = column_j(s.data);
    rec.competitors = correlation_tests(xi, xj);
  }
  return rec;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline CellResult summarize_cell(const SimConfig& cfg, std::size_t cell, std::vector<ReplicateRecord> recs,
                                 bool with_tests) {
  CellResult c;
  c.cell = cell;
  c.setting = cell / cfg.theta_grid.size();
  c.theta = cfg.theta_grid[cell % cfg.theta_grid.size()];
  c.reps = static_cast<int>(recs.size());
  std::vector<double> est, jk, om;
  int rej[4] = {0, 0, 0, 0};
  for (const auto& r : recs) {
    c.redraws += r.redraws;
    c.infeasible = c.infeasible || r.guard_exhausted;
    if (r.failed) {
      ++c.failed;
      continue;
    }
    ++c.completed;
    est.push_back(r.theta_hat);
    if (std::isfinite(r.theta_var)) jk.push_back(r.theta_var);
    if (std::isfinite(r.omega)) om.push_back(r.omega);
    c.boundary_hits += r.status.boundary_hit;
    c.undefined_tests += r.status.undefined_test;
    c.degraded_jackknife += r.status.degraded_jackknife;
    if (with_tests) {
      // An undefined test counts as a non-rejection.
      rej[0] += r.p_lrt < cfg.alpha;
      rej[1] += r.competitors.pearson.p_value < cfg.alpha;
      rej[2] += r.competitors.spearman.p_value < cfg.alpha;
      rej[3] += r.competitors.kendall.p_value < cfg.alpha;
    }
  }
  if (!est.empty()) {
    const double m = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
    double ss = 0.0;
    for (double e : est) ss += (e - m) * (e - m);
    c.mean = m;
    c.median = median_of(est);
    if (est.size() > 1) {
      c.empirical_var = ss / (est.size() - 1.0);
      c.sd = std::sqrt(c.empirical_var);
    }
  }
  if (!jk.empty()) c.mean_jackknife_var = std::accumulate(jk.begin(), jk.end(), 0.0) / jk.size();
  c.median_omega = median_of(om);
  if (with_tests && c.completed > 0) {
    c.reject_lrt = static_cast<double>(rej[0]) / c.completed;
    c.reject_pearson = static_cast<double>(rej[1]) / c.completed;
    c.reject_spearman = static_cast<double>(rej[2]) / c.completed;
    c.reject_kendall = static_cast<double>(rej[3]) / c.completed;
  }
  if (cfg.keep_replicates) c.replicates = std::move(recs);
  return c;
}

inline StudyResult run_study(const SimConfig& cfg, bool with_tests) {
  cfg.validate();
  const std::size_t cells = cfg.cells();
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  std::vector<ReplicateRecord> all(cells * reps);
  parallel_for(all.size(), cfg.threads, [&](std::size_t k) {
    all[k] = run_replicate(cfg, k / reps, static_cast<int>(k % reps), with_tests);
  });
  StudyResult out;
  out.config = cfg;
  out.with_tests = with_tests;
  for (std::size_t c = 0; c < cells; ++c) {
    std::vector<ReplicateRecord> recs(all.begin() + c * reps, all.begin() + (c + 1) * reps);
    out.cells.push_back(summarize_cell(cfg, c, std::move(recs), with_tests));
  }
  return out;
}

}  // namespace detail

/// Per cell: θ̃ location and spread, empirical vs mean jackknife variance.
inline StudyResult run_bias_variance_study(const SimConfig& cfg) { return detail::run_study(cfg, false); }

/// Per cell: rejection rates of Λ' and of the Pearson, Spearman and Kendall
/// tests, plus everything the bias/variance study reports.
inline StudyResult run_power_study(const SimConfig& cfg) { return detail::run_study(cfg, true); }

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Pairings of the six beta settings into (margin i, margin j).
inline std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>> paper_beta_pairs() {
  return {{{2.0 / 7.0, 7.0}, {5.0 / 7.0, 7.0}}, {{0.5, 4.0}, {1.0 / 3.0, 9.0}}, {{2.0 / 3.0, 9.0}, {0.5, 6.0}}};
}

inline std::vector<std::pair<double, double>> paper_zero_pairs() {
  return {{0.10, 0.25}, {0.40, 0.50}, {0.60, 0.75}, {0.20, 0.75}};
}

/// Zero-pair × beta-pair grid without covariates.
inline SimConfig preset_paper_grid() {
  SimConfig cfg;
  for (const auto& [pi, pj] : paper_zero_pairs())
    for (const auto& [bi, bj] : paper_beta_pairs())
      cfg.margins.push_back({{pi, bi.first, bi.second}, {pj, bj.first, bj.second}});
  return cfg;
}

/// Larger-sample null runs over the same margins.
inline SimConfig preset_paper_grid_null_250() {
  SimConfig cfg = preset_paper_grid();
  cfg.n = 250;
  cfg.theta_grid = {0.0};
  return cfg;
}

/// One covariate on the zero probabilities: low-low, low-high and high-high
/// zero inflation.
inline SimConfig preset_paper_grid_regression() {
  SimConfig cfg;
  cfg.covariate_mode = CovariateMode::OneNormalOnP;
  const std::pair<Eigen::Vector2d, Eigen::Vector2d> rhos[] = {
      {{-0.5, 0.7}, {-0.3, 0.4}}, {{-0.1, 0.7}, {0.1, 0.4}}, {{0.5, 0.7}, {0.8, 0.4}}};
  for (const auto& [ri, rj] : rhos) {
    RegressionTruth t;
    t.rho_i = ri;
    t.rho_j = rj;
    cfg.regression.push_back(t);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Synthetic abundance tables
// ---------------------------------------------------------------------------

struct PlantedTable {
  Eigen::MatrixXd x;  ///< samples × taxa
  std::vector<std::string> taxa;
  std::vector<std::pair<int, int>> planted;
};

/// Taxa (2k, 2k+1) for k < planted_pairs are drawn as dependent pairs with
/// parameter θ; every other taxon is independent of the rest. Margins cycle
/// through the zero-probability and beta settings of the simulation grid.
inline PlantedTable sample_planted_table(int n, int taxa, int planted_pairs, double theta, std::uint64_t seed) {
  if (taxa < 2 * planted_pairs) fail(ErrorCode::InvalidArgument, "sample_planted_table: too few taxa for the pairs");
  const double zero_p[] = {0.10, 0.25, 0.40};
  const auto betas = paper_beta_pairs();
  auto margin = [&](int t) {
    const auto& b = betas[(t / 2) % betas.size()];
    const auto& mb = t % 2 == 0 ? b.first : b.second;
    return ZibParams{zero_p[t % 3], mb.first, mb.second};
  };
  PlantedTable out;
  out.x = Eigen::MatrixXd::Zero(n, taxa);
  char name[32];
  for (int t = 0; t < taxa; ++t) {
    std::snprintf(name, sizeof name, "taxon_%02d", t + 1);
    out.taxa.emplace_back(name);
  }
  Rng rng(seed);
  int t = 0;
  for (; t + 1 < taxa; t += 2) {
    const bool dependent = t / 2 < planted_pairs;
    const Sample s = sample_pair(n, margin(t), margin(t + 1), dependent ? theta : 0.0, rng);
    for (int l = 0; l < n; ++l) {
      out.x(l, t) = s.data[l].xi;
      out.x(l, t + 1) = s.data[l].xj;
    }
    if (dependent) out.planted.emplace_back(t, t + 1);
  }
  if (t < taxa) {
    const Sample s = sample_pair(n, margin(t), margin(0), 0.0, rng);
    for (int l = 0; l < n; ++l) out.x(l, t) = s.data[l].xi;
  }
  return out;
}

inline std::string setting_label(const SimConfig& cfg, std::size_t setting) {
  char buf[256];
  if (cfg.covariate_mode == CovariateMode::None) {
    const auto& m = cfg.margins[setting];
    std::snprintf(buf, sizeof buf, "p=(%.3g,%.3g) mu=(%.4g,%.4g) phi=(%.4g,%.4g)", m.gi.p, m.gj.p, m.gi.mu, m.gj.mu,
                  m.gi.phi, m.gj.phi);
  } else {
    const auto& r = cfg.regression[setting];
    std::snprintf(buf, sizeof buf, "rho_i=(%.3g,%.3g) rho_j=(%.3g,%.3g)", r.rho_i[0], r.rho_i[1], r.rho_j[0],
                  r.rho_j[1]);
  }
  return buf;
}

/// Tidy output: one row per cell × estimator × metric.
inline void write_study_tsv(std::ostream& os, const StudyResult& res) {
  os << "cell\tsetting\ttheta\testimator\tmetric\tvalue\n";
  char num[64];
  auto row = [&](const CellResult& c, const char* est, const char* metric, double v) {
    std::snprintf(num, sizeof num, "%.17g", v);
    os << c.cell << '\t' << setting_label(res.config, c.setting) << '\t';
    char th[64];
    std::snprintf(th, sizeof th, "%.17g", c.theta);
    os << th << '\t' << est << '\t' << metric << '\t' << num << '\n';
  };
  for (const auto& c : res.cells) {
    row(c, "two_stage", "mean", c.mean);
    row(c, "two_stage", "median", c.median);
    row(c, "two_stage", "sd", c.sd);
    row(c, "two_stage", "bias", c.mean - c.theta);
    row(c, "two_stage", "empirical_var", c.empirical_var);
    row(c, "jackknife", "mean_var", c.mean_jackknife_var);
    row(c, "lrt", "median_omega", c.median_omega);
    row(c, "run", "completed", c.completed);
    row(c, "run", "failed", c.failed);
    row(c, "run", "redraws", static_cast<double>(c.redraws));
    row(c, "run", "infeasible", c.infeasible ? 1.0 : 0.0);
    row(c, "run", "boundary_hits", c.boundary_hits);
    row(c, "run", "undefined_tests", c.undefined_tests);
    row(c, "run", "degraded_jackknife", c.degraded_jackknife);
    if (res.with_tests) {
      row(c, "lrt", "rejection_rate", c.reject_lrt);
      row(c, "pearson", "rejection_rate", c.reject_pearson);
      row(c, "spearman", "rejection_rate", c.reject_spearman);
      row(c, "kendall", "rejection_rate", c.reject_kendall);
    }
  }
}

}  // namespace zibcop
