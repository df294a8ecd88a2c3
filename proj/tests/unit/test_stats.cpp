#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "../support/quadrature_oracle.hpp"
#include "ctskills/error.hpp"
#include "ctskills/stats.hpp"

using namespace ctskills;
using namespace ctskills::stats;

namespace {

std::vector<double> grid(double lo, double hi, int n = 20) {
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * i / (n - 1));
  return xs;
}

Groups random_groups(std::mt19937_64& rng, int k, int min_n, int max_n) {
  std::normal_distribution<double> normal(3.0, 1.2);
  std::uniform_int_distribution<int> size(min_n, max_n);
  Groups groups(k);
  for (auto& g : groups) {
    const int n = size(rng);
    for (int i = 0; i < n; ++i) g.push_back(normal(rng));
  }
  return groups;
}

}  // namespace

TEST_CASE("F and chi-square CDFs match quadrature on 20 grid points") {
  for (auto [d1, d2] : {std::pair{1.0, 4.0}, std::pair{5.0, 294.0}, std::pair{3.0, 12.0}}) {
    for (double x : grid(0.05, 15.0)) {
      CAPTURE(d1);
      CAPTURE(x);
      CHECK(std::abs(f_cdf(x, d1, d2) - oracle::f_cdf(x, d1, d2)) < 1e-4);
      CHECK(std::abs(f_sf(x, d1, d2) + f_cdf(x, d1, d2) - 1.0) < 1e-12);
    }
  }
  for (double df : {1.0, 4.0, 25.0}) {
    for (double x : grid(0.05, 40.0)) {
      CAPTURE(df);
      CAPTURE(x);
      CHECK(std::abs(chi2_cdf(x, df) - oracle::chi2_cdf(x, df)) < 1e-4);
    }
  }
}

TEST_CASE("studentized range CDF matches 2-D quadrature on 20 grid points") {
  for (auto [k, df] : {std::pair{3, 10.0}, std::pair{2, 5.0}, std::pair{6, 294.0}, std::pair{4, 2.0}}) {
    for (double q : grid(0.2, 7.0)) {
      CAPTURE(k);
      CAPTURE(df);
      CAPTURE(q);
      CHECK(std::abs(ptukey(q, k, df) - oracle::ptukey(q, k, df)) < 1e-4);
    }
  }
  for (double q : grid(0.2, 7.0)) CHECK(std::abs(ptukey(q, 4, 0) - oracle::normal_range_cdf(q, 4)) < 1e-4);
}

TEST_CASE("CDF helpers are monotone") {
  double f_prev = 0, c_prev = 0, t_prev = 0;
  for (double x = 0; x <= 12; x += 0.05) {
    const double f = f_cdf(x, 2, 7), c = chi2_cdf(x, 3), t = ptukey(x, 3, 10);
    CHECK(f >= f_prev);
    CHECK(c >= c_prev);
    CHECK(t >= t_prev - 1e-12);
    CHECK((t >= 0 && t <= 1));
    f_prev = f, c_prev = c, t_prev = t;
  }
}

TEST_CASE("studentized range reference points") {
  CHECK(std::abs(qtukey(0.95, 3, 10) - 3.877) < 0.01);
  CHECK(std::abs(qtukey(0.95, 3, 10) - 3.87678) < 1e-3);
  CHECK(std::abs(tukey_sf(3.0, 2, 5) - 0.0873593) < 1e-5);
  // Round trip through the quantile.
  for (double p : {0.5, 0.9, 0.99}) CHECK(std::abs(ptukey(qtukey(p, 5, 20), 5, 20) - p) < 1e-8);
  CHECK_THROWS_AS(ptukey(1.0, 1, 10), Error);
}

TEST_CASE("one-way ANOVA") {
  SUBCASE("hand-computed example") {
    auto r = one_way_anova({{1, 2, 3}, {4, 5, 6}});
    CHECK(r.ss_between == doctest::Approx(13.5));
    CHECK(r.ss_within == doctest::Approx(4.0));
    CHECK(r.df_between == 1);
    CHECK(r.df_within == 4);
    CHECK(std::abs(r.f - 13.5) < 1e-6);
    CHECK(std::abs(r.p_value - 0.0213) < 1e-4);
    CHECK(std::abs(r.p_value - (1.0 - oracle::f_cdf(13.5, 1, 4))) < 1e-4);
  }
  SUBCASE("identical groups") {
    auto r = one_way_anova({{1, 2, 3}, {1, 2, 3}});
    CHECK(r.f == 0.0);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("no variance at all is undefined") {
    auto r = one_way_anova({{2, 2}, {2, 2}});
    CHECK(r.undefined);
    CHECK(std::isnan(r.f));
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(one_way_anova({{1, 2, 3}}), Error);
    CHECK_THROWS_AS(one_way_anova({{1, 2}, {}}), Error);
    CHECK_THROWS_AS(one_way_anova({{1}, {2}}), Error);
  }
}

TEST_CASE("ANOVA decomposition and invariance properties") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 5);
    auto groups = random_groups(rng, k, 1, 12);
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    if (n <= groups.size()) continue;
    const auto r = one_way_anova(groups);
    CHECK(std::abs(r.ss_total - (r.ss_between + r.ss_within)) <= 1e-9 * r.ss_total);
    CHECK(r.f >= 0);

    auto shifted = groups;
    for (auto& g : shifted) for (auto& x : g) x += 17.25;
    const auto s = one_way_anova(shifted);
    CHECK(std::abs(s.f - r.f) <= 1e-9 * std::max(1.0, r.f));
    CHECK(std::abs(s.p_value - r.p_value) <= 1e-9);

    auto scaled = groups;
    for (auto& g : scaled) for (auto& x : g) x *= -3.5;
    CHECK(std::abs(one_way_anova(scaled).f - r.f) <= 1e-9 * std::max(1.0, r.f));
  }
}

TEST_CASE("chi-square independence") {
  SUBCASE("closed form 2x2") {
    auto r = chi_square_independence({{10, 20}, {20, 10}});
    // N (ad - bc)^2 / (row1 row2 col1 col2)
    const double closed = 60.0 * (100.0 - 400.0) * (100.0 - 400.0) / (30.0 * 30 * 30 * 30);
    CHECK(std::abs(r.statistic - closed) < 1e-12);
    CHECK(std::abs(r.statistic - 6.6667) < 1e-4);
    CHECK(r.df == 1);
    CHECK(std::abs(r.p_value - 0.0098) < 1e-4);
    CHECK(std::abs(r.p_value - (1.0 - oracle::chi2_cdf(closed, 1))) < 1e-4);
    CHECK_FALSE(r.corrected);
  }
  SUBCASE("continuity correction is opt-in") {
    auto r = chi_square_independence({{10, 20}, {20, 10}}, true);
    CHECK(r.corrected);
    // (|ad - bc| - N/2)^2 N / products
    CHECK(std::abs(r.statistic - 60.0 * 270.0 * 270.0 / (30.0 * 30 * 30 * 30)) < 1e-12);
    CHECK_FALSE(chi_square_independence({{1, 2, 3}, {3, 2, 1}}, true).corrected);
  }
  SUBCASE("outer products give exactly zero") {
    auto r = chi_square_independence({{2, 4}, {3, 6}});
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(2 + rng() % 4), b(2 + rng() % 5);
      for (auto& x : a) x = 1 + static_cast<double>(rng() % 9);
      for (auto& x : b) x = 1 + static_cast<double>(rng() % 9);
      std::vector<std::vector<double>> t(a.size(), std::vector<double>(b.size()));
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) t[i][j] = a[i] * b[j];
      CHECK(chi_square_independence(t).statistic == 0.0);
    }
  }
  SUBCASE("row and column permutations leave the statistic unchanged") {
    std::vector<std::vector<double>> t{{12, 5, 7, 1}, {3, 9, 4, 8}, {6, 6, 2, 11}};
    const double base = chi_square_independence(t).statistic;
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      std::shuffle(t.begin(), t.end(), rng);
      std::vector<std::size_t> cols{0, 1, 2, 3};
      std::shuffle(cols.begin(), cols.end(), rng);
      auto p = t;
      for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) p[i][j] = t[i][cols[j]];
      CHECK(std::abs(chi_square_independence(p).statistic - base) < 1e-9 * base);
    }
  }
  SUBCASE("empty margins are rejected") {
    CHECK_THROWS_AS(chi_square_independence({{0, 0}, {1, 2}}), Error);
    CHECK_THROWS_AS(chi_square_independence({{0, 3}, {0, 2}}), Error);
    CHECK_THROWS_AS(chi_square_independence({{1, 2}}), Error);
  }
}

TEST_CASE("Tukey HSD") {
  SUBCASE("mean differences") {
    auto r = tukey_hsd({{1, 2, 3}, {2, 3, 4}, {5, 6, 7}});
    REQUIRE(r.pairs.size() == 3);
    CHECK(r.pairs[0].a == 1);
    CHECK(r.pairs[0].b == 0);
    CHECK(r.pairs[0].md == doctest::Approx(1.0));
    CHECK(r.pairs[1].a == 2);
    CHECK(r.pairs[1].b == 0);
    CHECK(r.pairs[1].md == doctest::Approx(4.0));
    CHECK(r.pairs[2].md == doctest::Approx(3.0));
    for (const auto& p : r.pairs) CHECK((p.p_value >= 0 && p.p_value <= 1));
    CHECK(r.pairs[1].significant);
  }
  SUBCASE("swapping groups flips the sign, not the p-value") {
    auto ab = tukey_hsd({{1, 2, 3, 4}, {3, 5, 4, 6}});
    auto ba = tukey_hsd({{3, 5, 4, 6}, {1, 2, 3, 4}});
    CHECK(ab.pairs[0].md == doctest::Approx(-ba.pairs[0].md));
    CHECK(ab.pairs[0].p_value == doctest::Approx(ba.pairs[0].p_value).epsilon(1e-12));
  }
  SUBCASE("k = 2 agrees with ANOVA") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      auto groups = random_groups(rng, 2, 2, 15);
      auto t = tukey_hsd(groups);
      auto a = one_way_anova(groups);
      CHECK(std::abs(t.pairs[0].p_value - a.p_value) < 1e-6);
      CHECK(t.pairs[0].q * t.pairs[0].q == doctest::Approx(2 * a.f));
    }
  }
  SUBCASE("zero within-group variance is rejected") {
    CHECK_THROWS_AS(tukey_hsd({{1, 1}, {2, 2}}), Error);
  }
}

TEST_CASE("variance components") {
  SUBCASE("balanced toy") {
    auto c = variance_component({{4, 6}, {8, 10}});
    CHECK(c.ms_between == doctest::Approx(16.0));
    CHECK(c.ms_within == doctest::Approx(2.0));
    CHECK(c.n0 == doctest::Approx(2.0));
    CHECK(c.variance == doctest::Approx(7.0));
    CHECK(c.residual_variance == doctest::Approx(2.0));
    CHECK(c.sd == doctest::Approx(std::sqrt(7.0)));
    CHECK_FALSE(c.truncated);
  }
  SUBCASE("all observations equal") {
    auto c = variance_component({{3, 3, 3}, {3, 3}, {3}});
    CHECK(c.variance == 0.0);
    CHECK(c.residual_variance == 0.0);
    CHECK_FALSE(c.truncated);
  }
  SUBCASE("negative estimates are truncated and flagged") {
    auto c = variance_component({{1, 9}, {2, 8}});
    CHECK(c.truncated);
    CHECK(c.variance == 0.0);
  }
  SUBCASE("unbalanced n0") {
    auto c = variance_component({{1, 2}, {3, 4, 5, 6}});
    CHECK(c.n0 == doctest::Approx((6.0 - 20.0 / 6.0) / 1.0));
  }
}
