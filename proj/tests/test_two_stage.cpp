#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "zibcop/simulate.hpp"
#include "zibcop/two_stage.hpp"

using namespace zibcop;

namespace {

const ZibParams kGi{0.10, 2.0 / 7.0, 7.0};
const ZibParams kGj{0.25, 5.0 / 7.0, 7.0};

std::vector<PairObservation> sample(int n, double theta, std::uint64_t seed, const ZibParams& gi = kGi,
                                    const ZibParams& gj = kGj) {
  Rng rng(seed);
  return sample_pair(n, gi, gj, theta, rng).data;
}

std::vector<PairObservation> swapped(const std::vector<PairObservation>& d) {
  std::vector<PairObservation> out;
  for (const auto& o : d) out.emplace_back(o.xj, o.xi);
  return out;
}

// Kolmogorov-Smirnov p-value of a sample against Uniform(0,1).
double ks_uniform_p(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = p.size();
  double d = 0;
  for (std::size_t k = 0; k < p.size(); ++k) d = std::max({d, (k + 1) / n - p[k], p[k] - k / n});
  return kolmogorov_sf((std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d);
}

}  // namespace

TEST(TwoStageFit, IndependentDataAndSeparableMargins) {
  const auto data = sample(500, 0.0, 1);
  const auto fit = two_stage_fit(data);
  EXPECT_LT(std::abs(fit.theta_hat), 0.6);
  const auto fi = fit_zib(column_i(data));
  const auto fj = fit_zib(column_j(data));
  EXPECT_EQ(fit.fit_i.params.p, fi.params.p);
  EXPECT_EQ(fit.fit_i.params.mu, fi.params.mu);
  EXPECT_EQ(fit.fit_j.params.phi, fj.params.phi);
  EXPECT_FALSE(fit.status.boundary_hit);
}

TEST(TwoStageFit, ConsistentAtLargeN) {
  const auto data = sample(5000, 1.5, 2);
  const auto fit = two_stage_fit(data);
  EXPECT_NEAR(fit.theta_hat, 1.5, 0.15);
  EXPECT_TRUE(fit.status.clean());
}

TEST(TwoStageFit, ProfileMaximizedAtEstimate) {
  const auto data = sample(80, -1.0, 3, {0.4, 0.5, 4.0}, {0.5, 1.0 / 3.0, 9.0});
  const auto fit = two_stage_fit(data);
  const auto mi = evaluate_fit(column_i(data), fit.fit_i, nullptr);
  const auto mj = evaluate_fit(column_j(data), fit.fit_j, nullptr);
  const PairLikelihood lik(mi, mj);
  const double grid = oracle::grid_argmax([&](double t) { return lik(t); }, -35.0, 35.0, 1e-3);
  EXPECT_NEAR(fit.theta_hat, grid, 1e-3);
  EXPECT_NEAR(fit.loglik, pair_loglik(data, fit.fit_i.params, fit.fit_j.params, fit.theta_hat), 1e-9);
}

TEST(TwoStageFit, Preconditions) {
  std::vector<PairObservation> few;
  for (int l = 0; l < 20; ++l) few.emplace_back(l < 2 ? 0.3 : 0.0, 0.1 + 0.01 * l);
  try {
    two_stage_fit(few);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewNonzero);
  }
  std::vector<PairObservation> exclusive;
  for (int l = 0; l < 20; ++l) exclusive.emplace_back(l % 2 ? 0.2 + 0.01 * l : 0.0, l % 2 ? 0.0 : 0.3 + 0.01 * l);
  try {
    independence_test(exclusive);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MutuallyExclusive);
  }
}

TEST(Jackknife, MatchesColdLeaveOneOutRefits) {
  const auto data = sample(30, 1.5, 4, {0.3, 0.4, 5.0}, {0.2, 0.6, 4.0});
  const auto fit = two_stage_fit(data);
  const auto jk = jackknife_cov(data, fit);
  const Eigen::VectorXd eta = pair_eta(fit.fit_i, fit.fit_j, fit.theta_hat);
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(7, 7);
  for (std::size_t l = 0; l < data.size(); ++l) {
    std::vector<PairObservation> rest = data;
    rest.erase(rest.begin() + l);
    const auto f = two_stage_fit(rest);
    const Eigen::VectorXd d = pair_eta(f.fit_i, f.fit_j, f.theta_hat) - eta;
    ref += d * d.transpose();
  }
  ASSERT_EQ(jk.cov.rows(), 7);
  EXPECT_EQ(jk.skipped, 0);
  EXPECT_LE((jk.cov - ref).cwiseAbs().maxCoeff(), 1e-6 * (1 + ref.cwiseAbs().maxCoeff()));
  EXPECT_LE((jk.cov - jk.cov.transpose()).norm(), 1e-15);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(jk.cov).eigenvalues().minCoeff(), -1e-12);
}

TEST(Jackknife, ThetaVarianceIsLastEntry) {
  const auto data = sample(50, 0.5, 5);
  auto fit = two_stage_fit(data);
  attach_jackknife(fit, jackknife_cov(data, fit));
  EXPECT_EQ(fit.theta_var, fit.cov(6, 6));
  EXPECT_GT(fit.theta_var, 0.0);
}

TEST(Jackknife, DuplicatedDataHalvesCovariance) {
  const auto data = sample(60, 1.5, 6);
  std::vector<PairObservation> twice = data;
  twice.insert(twice.end(), data.begin(), data.end());
  const auto f1 = two_stage_fit(data);
  const auto f2 = two_stage_fit(twice);
  const double v1 = jackknife_cov(data, f1).cov(6, 6);
  const double v2 = jackknife_cov(twice, f2).cov(6, 6);
  EXPECT_NEAR(v2 / v1, 0.5, 0.125);
}

TEST(Jackknife, RegressionMarginsContributeCoefficients) {
  Rng rng(7);
  RegressionTruth t;
  t.rho_i = {-0.5, 0.7};
  t.rho_j = {-0.3, 0.4};
  const auto s = sample_pair_regression(60, t, 1.5, rng);
  const auto si = covariate_on_p_spec(s.covariate_i);
  const auto sj = covariate_on_p_spec(s.covariate_j);
  const auto fit = independence_test(s.data, &si, &sj);
  EXPECT_EQ(fit.cov.rows(), 9);
  EXPECT_EQ(fit.theta_var, fit.cov(8, 8));
  EXPECT_TRUE(std::isfinite(fit.p_value));
}

TEST(Jackknife, ThetaVarianceTracksReplicateVarianceUnderIndependence) {
  const int reps = 60, n = 200;
  std::vector<double> est, jk;
  for (int r = 0; r < reps; ++r) {
    Rng rng(100, 0, r);
    const auto data = sample_pair(n, kGi, kGj, 0.0, rng).data;
    auto fit = two_stage_fit(data);
    attach_jackknife(fit, jackknife_cov(data, fit));
    est.push_back(fit.theta_hat);
    jk.push_back(fit.theta_var);
  }
  const double m = std::accumulate(est.begin(), est.end(), 0.0) / reps;
  double ss = 0;
  for (double e : est) ss += (e - m) * (e - m);
  const double emp = ss / (reps - 1);
  const double mean_jk = std::accumulate(jk.begin(), jk.end(), 0.0) / reps;
  EXPECT_GT(mean_jk / emp, 0.5);
  EXPECT_LT(mean_jk / emp, 2.0);
}

TEST(RescaledLrt, NullAtEstimateGivesZero) {
  const auto data = sample(60, 1.5, 8);
  auto fit = two_stage_fit(data);
  attach_jackknife(fit, jackknife_cov(data, fit));
  const auto t = rescaled_lrt(data, fit, fit.theta_hat);
  EXPECT_EQ(t.lambda_prime, 0.0);
  EXPECT_EQ(t.p_value, 1.0);
  EXPECT_GT(t.omega, 0.0);
  EXPECT_THROW(rescaled_lrt(data, fit, 40.0), Error);
}

TEST(RescaledLrt, OmegaNearOneUnderIndependence) {
  std::vector<double> om;
  for (int r = 0; r < 20; ++r) {
    Rng rng(200, 0, r);
    const auto data = sample_pair(250, kGi, kGj, 0.0, rng).data;
    const auto fit = independence_test(data);
    if (std::isfinite(fit.omega)) om.push_back(std::abs(fit.omega - 1.0));
  }
  ASSERT_GE(om.size(), 15u);
  std::sort(om.begin(), om.end());
  EXPECT_LE(om[om.size() / 2], 0.2);
}

TEST(RescaledLrt, InvariantUnderRelabeling) {
  const auto data = sample(70, -1.0, 9, {0.4, 0.5, 4.0}, {0.2, 1.0 / 3.0, 9.0});
  const auto a = independence_test(data);
  const auto b = independence_test(swapped(data));
  EXPECT_NEAR(a.theta_hat, b.theta_hat, 1e-7);
  EXPECT_NEAR(a.lrt_stat, b.lrt_stat, 1e-5 * (1 + a.lrt_stat));
  EXPECT_NEAR(a.p_value, b.p_value, 1e-6);
}

TEST(IndependenceTest, ComonotoneDataIsHighlySignificant) {
  Rng rng(10);
  std::vector<PairObservation> data;
  for (int l = 0; l < 100; ++l) {
    const double x = 0.05 + 0.9 * rng.uniform();
    data.emplace_back(x, x * x);
  }
  const auto fit = independence_test(data);
  EXPECT_LT(fit.p_value, 1e-6);
}

TEST(IndependenceTest, ShuffledColumnsGiveUniformPValues) {
  std::vector<double> ps;
  for (int r = 0; r < 150; ++r) {
    Rng rng(300, 0, r);
    auto data = sample_pair(50, {0.4, 0.5, 4.0}, {0.5, 1.0 / 3.0, 9.0}, 2.0, rng).data;
    std::vector<double> xj = column_j(data);
    for (std::size_t k = xj.size() - 1; k > 0; --k) std::swap(xj[k], xj[rng.below(k + 1)]);
    std::vector<PairObservation> shuffled;
    for (std::size_t l = 0; l < data.size(); ++l) shuffled.emplace_back(data[l].xi, xj[l]);
    try {
      const auto fit = independence_test(shuffled);
      if (std::isfinite(fit.p_value)) ps.push_back(fit.p_value);
    } catch (const Error&) {
    }
  }
  ASSERT_GE(ps.size(), 120u);
  EXPECT_GT(ks_uniform_p(ps), 0.01);
}
