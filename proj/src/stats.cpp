#include "ctskills/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "ctskills/error.hpp"

namespace ctskills::stats {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double mean_of(const Sample& s) { return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()); }

void check_groups(const Groups& groups, const char* what) {
  if (groups.size() < 2) throw Error(ErrorCode::precondition, std::string(what) + " needs at least 2 groups");
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorCode::precondition, std::string(what) + " needs non-empty groups");
    for (double x : g) {
      if (!std::isfinite(x)) throw Error(ErrorCode::precondition, std::string(what) + " needs finite observations");
    }
    n += g.size();
  }
  if (n <= groups.size()) throw Error(ErrorCode::precondition, std::string(what) + " needs more observations than groups");
}

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

// Phi(z) - Phi(z - w), computed on the side with less cancellation.
double normal_mass(double z, double w) {
  if (z > 0) return 0.5 * (std::erfc((z - w) * kInvSqrt2) - std::erfc(z * kInvSqrt2));
  return 0.5 * (std::erfc(-z * kInvSqrt2) - std::erfc(-(z - w) * kInvSqrt2));
}

// P(range of k iid standard normals <= w).
double normal_range_cdf(double w, int k) {
  if (w <= 0) return 0.0;
  if (w > 40) return 1.0;
  auto integrand = [w, k](double z) {
    return kInvSqrt2Pi * std::exp(-0.5 * z * z) * std::pow(normal_mass(z, w), k - 1);
  };
  // The integrand lives on z in [-9, 9] and, for small w, is concentrated
  // near 0; splitting at 0 keeps the adaptive rule honest.
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double lo = GK::integrate(integrand, -9.0, 0.0, 15, 1e-13);
  double hi = GK::integrate(integrand, 0.0, w + 9.0, 15, 1e-13);
  return clamp01(k * (lo + hi));
}

}  // namespace

double f_cdf(double x, double df1, double df2) {
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::cdf(boost::math::fisher_f_distribution<double>(df1, df2), x);
}

double f_sf(double x, double df1, double df2) {
  if (x <= 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(df1, df2), x));
}

double chi2_cdf(double x, double df) {
  if (x <= 0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<double>(df), x);
}

double chi2_sf(double x, double df) {
  if (x <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double ptukey(double q, int k, double df) {
  if (k < 2) throw Error(ErrorCode::precondition, "studentized range needs k >= 2");
  if (!(q > 0)) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (df <= 0 || df > 25000) return normal_range_cdf(q, k);

  // P(Q <= q) = integral over s of f_s(s) * W(q s), s = sqrt(chi2_df / df).
  const double log_norm = 0.5 * df * std::log(df) - boost::math::lgamma(0.5 * df) - (0.5 * df - 1) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0) return 0.0;
    return std::exp(log_norm + (df - 1) * std::log(s) - 0.5 * df * s * s);
  };
  boost::math::chi_squared_distribution<double> chi(df);
  const double s_lo = std::sqrt(boost::math::quantile(chi, 1e-14) / df);
  const double s_hi = std::sqrt(boost::math::quantile(boost::math::complement(chi, 1e-14)) / df);
  auto integrand = [&](double s) { return density(s) * normal_range_cdf(q * s, k); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
  // Split at the mode of the scaled chi density.
  const double mode = df > 1 ? std::sqrt((df - 1) / df) : 0.5 * (s_lo + s_hi);
  const double split = std::clamp(mode, s_lo, s_hi);
  double total = GK::integrate(integrand, s_lo, split, 12, 1e-11) + GK::integrate(integrand, split, s_hi, 12, 1e-11);
  return clamp01(total);
}

double tukey_sf(double q, int k, double df) { return clamp01(1.0 - ptukey(q, k, df)); }

double qtukey(double p, int k, double df) {
  if (!(p > 0 && p < 1)) throw Error(ErrorCode::precondition, "qtukey needs 0 < p < 1");
  auto f = [&](double q) { return ptukey(q, k, df) - p; };
  double hi = 10;
  while (f(hi) < 0) hi *= 2;
  boost::math::tools::eps_tolerance<double> tol(40);
  std::uintmax_t iterations = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, -p, f(hi), tol, iterations);
  return 0.5 * (a + b);
}

AnovaResult one_way_anova(const Groups& groups) {
  check_groups(groups, "ANOVA");
  AnovaResult r;
  std::size_t n = 0;
  double sum = 0;
  for (const auto& g : groups) {
    n += g.size();
    sum += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double grand = sum / static_cast<double>(n);
  for (const auto& g : groups) {
    const double m = mean_of(g);
    r.ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) {
      r.ss_within += (x - m) * (x - m);
      r.ss_total += (x - grand) * (x - grand);
    }
  }
  r.df_between = static_cast<int>(groups.size()) - 1;
  r.df_within = static_cast<int>(n - groups.size());
  r.ms_between = r.ss_between / r.df_between;
  r.ms_within = r.ss_within / r.df_within;
  // Relative noise floor so that exactly equal group means give F = 0.
  const double scale = std::max(r.ss_total, std::numeric_limits<double>::min());
  if (r.ss_between <= 1e-14 * scale) r.ss_between = r.ms_between = 0;
  if (r.ss_within <= 1e-14 * scale) r.ss_within = r.ms_within = 0;
  if (r.ms_within == 0 && r.ms_between == 0) {
    r.undefined = true;
    r.f = std::numeric_limits<double>::quiet_NaN();
    r.p_value = std::numeric_limits<double>::quiet_NaN();
  } else if (r.ms_within == 0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p_value = 0;
  } else {
    r.f = r.ms_between / r.ms_within;
    r.p_value = f_sf(r.f, r.df_between, r.df_within);
  }
  return r;
}

ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table, bool continuity_correction) {
  const std::size_t rows = table.size();
  if (rows < 2) throw Error(ErrorCode::precondition, "chi-square needs at least 2 rows");
  const std::size_t cols = table.front().size();
  if (cols < 2) throw Error(ErrorCode::precondition, "chi-square needs at least 2 columns");
  std::vector<double> row_total(rows, 0.0), col_total(cols, 0.0);
  double total = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw Error(ErrorCode::precondition, "chi-square table is ragged");
    for (std::size_t j = 0; j < cols; ++j) {
      const double o = table[i][j];
      if (!(o >= 0) || !std::isfinite(o)) throw Error(ErrorCode::precondition, "chi-square counts must be non-negative");
      row_total[i] += o;
      col_total[j] += o;
      total += o;
    }
  }
  for (double t : row_total) {
    if (t <= 0) throw Error(ErrorCode::precondition, "chi-square row total is zero");
  }
  for (double t : col_total) {
    if (t <= 0) throw Error(ErrorCode::precondition, "chi-square column total is zero");
  }
  ChiSquareResult r;
  r.corrected = continuity_correction && rows == 2 && cols == 2;
  r.df = static_cast<int>((rows - 1) * (cols - 1));
  r.expected.assign(rows, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = row_total[i] * col_total[j] / total;
      r.expected[i][j] = e;
      double d = std::abs(table[i][j] - e);
      if (r.corrected) d = std::max(0.0, d - 0.5);
      // Exact independence must give exactly zero, not rounding residue.
      if (d <= 1e-12 * std::max(1.0, e)) d = 0;
      r.statistic += d * d / e;
    }
  }
  r.p_value = chi2_sf(r.statistic, r.df);
  return r;
}

TukeyResult tukey_hsd(const Groups& groups, double alpha) {
  const auto anova = one_way_anova(groups);
  if (!(anova.ms_within > 0)) throw Error(ErrorCode::precondition, "Tukey HSD needs positive within-group variance");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorCode::precondition, "alpha must lie in (0, 1)");
  TukeyResult r;
  r.k = static_cast<int>(groups.size());
  r.df = anova.df_within;
  r.ms_within = anova.ms_within;
  r.q_critical = qtukey(1 - alpha, r.k, r.df);
  std::vector<double> means;
  for (const auto& g : groups) means.push_back(mean_of(g));
  for (int a = 1; a < r.k; ++a) {
    for (int b = 0; b < a; ++b) {
      TukeyPair pair;
      pair.a = a;
      pair.b = b;
      pair.md = means[a] - means[b];
      const double se = std::sqrt(0.5 * r.ms_within * (1.0 / groups[a].size() + 1.0 / groups[b].size()));
      pair.q = std::abs(pair.md) / se;
      pair.p_value = tukey_sf(pair.q, r.k, r.df);
      pair.lower = pair.md - r.q_critical * se;
      pair.upper = pair.md + r.q_critical * se;
      pair.significant = pair.p_value < alpha;
      r.pairs.push_back(pair);
    }
  }
  return r;
}

VarianceComponent variance_component(const Groups& groups) {
  const auto anova = one_way_anova(groups);
  VarianceComponent c;
  c.levels = static_cast<int>(groups.size());
  double n = 0, sum_sq = 0;
  for (const auto& g : groups) {
    n += static_cast<double>(g.size());
    sum_sq += static_cast<double>(g.size()) * static_cast<double>(g.size());
  }
  c.observations = static_cast<int>(n);
  c.ms_between = anova.ms_between;
  c.ms_within = anova.ms_within;
  c.n0 = (n - sum_sq / n) / (c.levels - 1);
  const double raw = (c.ms_between - c.ms_within) / c.n0;
  c.truncated = raw < 0;
  c.variance = std::max(0.0, raw);
  c.sd = std::sqrt(c.variance);
  c.residual_variance = c.ms_within;
  return c;
}

}  // namespace ctskills::stats
