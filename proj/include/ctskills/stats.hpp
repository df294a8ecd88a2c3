#pragma once

// Classical tests used by the analytics tables. Everything here is pure and
// operates on plain samples; the analytics layer decides what a sample is.

#include <optional>
#include <string>
#include <vector>

namespace ctskills::stats {

using Sample = std::vector<double>;
using Groups = std::vector<Sample>;

// Distribution helpers. cdf is P(X <= x), sf is P(X > x).
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);
double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);

// Studentized range of k means with df error degrees of freedom, by
// two-dimensional numerical integration (absolute error well below 1e-6).
// df <= 0 means infinite error degrees of freedom.
double ptukey(double q, int k, double df);
double tukey_sf(double q, int k, double df);
// Smallest q with ptukey(q) >= p.
double qtukey(double p, int k, double df);

struct AnovaResult {
  double ss_between = 0, ss_within = 0, ss_total = 0;
  int df_between = 0, df_within = 0;
  double ms_between = 0, ms_within = 0;
  double f = 0;
  double p_value = 1;
  // Both variance sources are zero: F is 0/0.
  bool undefined = false;
};

// Requires >= 2 groups, each non-empty, and more observations than groups.
AnovaResult one_way_anova(const Groups& groups);

struct ChiSquareResult {
  double statistic = 0;
  int df = 0;
  double p_value = 1;
  std::vector<std::vector<double>> expected;
  bool corrected = false;
};

// Pearson test of independence on an r x c table of counts. Every row and
// column total must be positive. The continuity correction only applies to
// 2 x 2 tables.
ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table,
                                        bool continuity_correction = false);

struct TukeyPair {
  int a = 0, b = 0;     // group indices, a > b
  double md = 0;        // mean_a - mean_b
  double q = 0;
  double p_value = 1;
  double lower = 0, upper = 0;  // simultaneous confidence interval for md
  bool significant = false;
};

struct TukeyResult {
  int k = 0;
  int df = 0;
  double ms_within = 0;
  double q_critical = 0;
  std::vector<TukeyPair> pairs;  // ordered (1,0), (2,0), (2,1), (3,0), ...
};

// All pairwise comparisons. Requires the ANOVA preconditions and MSW > 0.
TukeyResult tukey_hsd(const Groups& groups, double alpha = 0.05);

struct VarianceComponent {
  int levels = 0;
  int observations = 0;
  double ms_between = 0, ms_within = 0;
  double n0 = 0;
  double variance = 0;  // between-level component, truncated at 0
  double sd = 0;
  double residual_variance = 0;
  bool truncated = false;
};

// One-way random-effects method-of-moments estimate. Requires >= 2 levels.
VarianceComponent variance_component(const Groups& groups);

}  // namespace ctskills::stats
