#pragma once

// Bivariate mixed (atom at zero + continuous) density of two zero-inflated
// beta margins joined by a Frank copula.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "zibcop/copula_frank.hpp"
#include "zibcop/error.hpp"
#include "zibcop/margin_zib.hpp"

namespace zibcop {

/// S1: both non-zero; S2: x_i = 0 < x_j; S3: x_j = 0 < x_i; S4: both zero.
enum class Scenario { S1, S2, S3, S4 };

inline Scenario classify_scenario(double xi, double xj) {
  if (!(xi >= 0.0 && xi < 1.0 && xj >= 0.0 && xj < 1.0))
    fail(ErrorCode::Domain, "classify_scenario: abundances must lie in [0,1)");
  if (xi > 0.0) return xj > 0.0 ? Scenario::S1 : Scenario::S3;
  return xj > 0.0 ? Scenario::S2 : Scenario::S4;
}

struct PairObservation {
  double xi = 0.0;
  double xj = 0.0;
  Scenario scenario = Scenario::S4;

  PairObservation() = default;
  PairObservation(double a, double b) : xi(a), xj(b), scenario(classify_scenario(a, b)) {}
};

inline std::vector<PairObservation> make_pairs(std::span<const double> xi, std::span<const double> xj) {
  if (xi.size() != xj.size()) fail(ErrorCode::InvalidArgument, "make_pairs: length mismatch");
  std::vector<PairObservation> out;
  out.reserve(xi.size());
  for (std::size_t l = 0; l < xi.size(); ++l) out.emplace_back(xi[l], xj[l]);
  return out;
}

inline std::vector<double> column_i(std::span<const PairObservation> data) {
  std::vector<double> out(data.size());
  for (std::size_t l = 0; l < data.size(); ++l) out[l] = data[l].xi;
  return out;
}

inline std::vector<double> column_j(std::span<const PairObservation> data) {
  std::vector<double> out(data.size());
  for (std::size_t l = 0; l < data.size(); ++l) out[l] = data[l].xj;
  return out;
}

/// Count of observations per scenario, indexed by Scenario.
inline std::array<int, 4> scenario_counts(std::span<const PairObservation> data) {
  std::array<int, 4> c{};
  for (const auto& o : data) ++c[static_cast<int>(o.scenario)];
  return c;
}

namespace detail {

inline double floor_log(double t) { return t > kLogFloor ? t : kLogFloor; }

// CDF values enter the copula density, which needs the open unit square.
inline double open_unit(double u) {
  return std::clamp(u, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

}  // namespace detail

/// Log of the joint density (S1) or mixed density/probability (S2-S4).
inline double joint_log_density(double xi, double xj, const ZibParams& gi, const ZibParams& gj, double theta) {
  switch (classify_scenario(xi, xj)) {
    case Scenario::S1: {
      const double u = detail::open_unit(zib_cdf(xi, gi));
      const double v = detail::open_unit(zib_cdf(xj, gj));
      return frank_log_pdf(u, v, theta) + zib_log_pdf(xi, gi) + zib_log_pdf(xj, gj);
    }
    case Scenario::S2: {
      const double v = zib_cdf(xj, gj);
      return zib_log_pdf(xj, gj) + frank_log_cond_cdf(gi.p, v, theta);
    }
    case Scenario::S3: {
      const double u = zib_cdf(xi, gi);
      return zib_log_pdf(xi, gi) + frank_log_cond_cdf(gj.p, u, theta);
    }
    case Scenario::S4:
      return std::log(frank_cdf(gi.p, gj.p, theta));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline double joint_density(double xi, double xj, const ZibParams& gi, const ZibParams& gj, double theta) {
  return std::exp(joint_log_density(xi, xj, gi, gj, theta));
}

/// Sum of log joint densities; per-observation margin parameters.
inline double pair_loglik(std::span<const PairObservation> data, std::span<const ZibParams> gi,
                          std::span<const ZibParams> gj, double theta) {
  if (data.empty()) fail(ErrorCode::InvalidArgument, "pair_loglik: empty data");
  if (gi.size() != data.size() || gj.size() != data.size())
    fail(ErrorCode::InvalidArgument, "pair_loglik: parameter vectors must match the data length");
  double total = 0.0;
  for (std::size_t l = 0; l < data.size(); ++l)
    total += detail::floor_log(joint_log_density(data[l].xi, data[l].xj, gi[l], gj[l], theta));
  return total;
}

inline double pair_loglik(std::span<const PairObservation> data, const ZibParams& gi, const ZibParams& gj,
                          double theta) {
  std::vector<ZibParams> vi(data.size(), gi);
  std::vector<ZibParams> vj(data.size(), gj);
  return pair_loglik(data, vi, vj, theta);
}

// ---------------------------------------------------------------------------
// Profile likelihood in θ with the margins frozen
// ---------------------------------------------------------------------------

/// Per-observation margin quantities under fixed margin parameters.
struct MarginEval {
  std::vector<double> cdf;      ///< F(x), clamped into (0,1) for non-zero x
  std::vector<double> log_pdf;  ///< log f(x) (log p at zero)
  std::vector<double> p;        ///< zero mass for this observation
  std::vector<bool> zero;
};

inline MarginEval evaluate_margin(std::span<const double> x, std::span<const ZibParams> params) {
  if (x.size() != params.size()) fail(ErrorCode::InvalidArgument, "evaluate_margin: size mismatch");
  MarginEval m;
  const std::size_t n = x.size();
  m.cdf.resize(n);
  m.log_pdf.resize(n);
  m.p.resize(n);
  m.zero.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    m.zero[l] = x[l] == 0.0;
    m.p[l] = params[l].p;
    m.log_pdf[l] = zib_log_pdf(x[l], params[l]);
    m.cdf[l] = m.zero[l] ? params[l].p : detail::open_unit(zib_cdf(x[l], params[l]));
  }
  return m;
}

/// ℓ(θ) for a pair with frozen margins, split by scenario so each θ
/// evaluation touches only the copula terms.
class PairLikelihood {
 public:
  /// Observation `skip` (if any) is left out, which is how leave-one-out
  /// refits reuse margin evaluations.
  PairLikelihood(const MarginEval& mi, const MarginEval& mj, std::optional<std::size_t> skip = std::nullopt) {
    const std::size_t n = mi.cdf.size();
    if (mj.cdf.size() != n) fail(ErrorCode::InvalidArgument, "PairLikelihood: margin lengths differ");
    for (std::size_t l = 0; l < n; ++l) {
      if (skip && *skip == l) continue;
      ++n_;
      const double lm = detail::floor_log(mi.log_pdf[l]) + detail::floor_log(mj.log_pdf[l]);
      if (!mi.zero[l] && !mj.zero[l]) {
        marginal_ += lm;
        s1_.push_back({mi.cdf[l], mj.cdf[l]});
      } else if (mi.zero[l] && !mj.zero[l]) {
        marginal_ += detail::floor_log(mj.log_pdf[l]);
        s2_.push_back({mi.p[l], mj.cdf[l]});
      } else if (!mi.zero[l] && mj.zero[l]) {
        marginal_ += detail::floor_log(mi.log_pdf[l]);
        s3_.push_back({mj.p[l], mi.cdf[l]});
      } else {
        s4_.push_back({mi.p[l], mj.p[l]});
      }
    }
  }

  /// Copula contribution; zero at θ = 0 up to the S2-S4 marginal masses.
  double copula_part(double theta) const {
    double s = 0.0;
    for (const auto& [u, v] : s1_) s += detail::floor_log(frank_log_pdf(u, v, theta));
    for (const auto& [pi, v] : s2_) s += detail::floor_log(frank_log_cond_cdf(pi, v, theta));
    for (const auto& [pj, u] : s3_) s += detail::floor_log(frank_log_cond_cdf(pj, u, theta));
    for (const auto& [pi, pj] : s4_) s += detail::floor_log(std::log(frank_cdf(pi, pj, theta)));
    return s;
  }

  double marginal_part() const { return marginal_; }
  double operator()(double theta) const { return marginal_ + copula_part(theta); }

  std::size_t size() const { return n_; }
  std::size_t co_nonzero() const { return s1_.size(); }

 private:
  struct Pt {
    double a, b;
  };
  std::vector<Pt> s1_, s2_, s3_, s4_;
  double marginal_ = 0.0;
  std::size_t n_ = 0;
};

}  // namespace zibcop
