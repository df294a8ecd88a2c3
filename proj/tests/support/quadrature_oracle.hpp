#pragma once

// Independent reference values for the distribution helpers: composite
// Simpson quadrature of the densities, using nothing but <cmath>.

#include <cmath>
#include <functional>

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 4000) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// P(F <= x); x = u^2 removes the endpoint singularity when df1 = 1.
inline double f_cdf(double x, double d1, double d2) {
  if (x <= 0) return 0.0;
  auto density = [&](double t) {
    if (t <= 0) return 0.0;
    const double log_f = 0.5 * d1 * std::log(d1) + 0.5 * d2 * std::log(d2) + (0.5 * d1 - 1) * std::log(t) -
                         0.5 * (d1 + d2) * std::log(d1 * t + d2) - lbeta(0.5 * d1, 0.5 * d2);
    return std::exp(log_f);
  };
  auto integrand = [&](double u) {
    if (u <= 0) return d1 == 1 ? 2.0 / (std::sqrt(d2) * std::exp(lbeta(0.5, 0.5 * d2))) : 0.0;
    return 2.0 * u * density(u * u);
  };
  return simpson(integrand, 0.0, std::sqrt(x), 20000);
}

// P(chi2_df <= x), same substitution.
inline double chi2_cdf(double x, double df) {
  if (x <= 0) return 0.0;
  auto density = [&](double t) {
    if (t <= 0) return 0.0;
    return std::exp((0.5 * df - 1) * std::log(t) - 0.5 * t - 0.5 * df * std::log(2.0) - std::lgamma(0.5 * df));
  };
  auto integrand = [&](double u) {
    if (u <= 0) return df == 1 ? 2.0 / std::sqrt(2.0) / std::exp(std::lgamma(0.5)) : 0.0;
    return 2.0 * u * density(u * u);
  };
  return simpson(integrand, 0.0, std::sqrt(x), 20000);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(range of k standard normals <= w).
inline double normal_range_cdf(double w, int k) {
  if (w <= 0) return 0.0;
  auto integrand = [&](double z) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return phi * std::pow(normal_cdf(z) - normal_cdf(z - w), k - 1);
  };
  return k * simpson(integrand, -9.0, 9.0 + w, 600);
}

// P(Q <= q) for the studentized range with (k, df).
inline double ptukey(double q, int k, double df) {
  auto density = [&](double s) {
    if (s <= 0) return 0.0;
    return std::exp(0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1) * std::log(2.0) +
                    (df - 1) * std::log(s) - 0.5 * df * s * s);
  };
  const double upper = 1.0 + 12.0 / std::sqrt(df) + (df < 3 ? 40.0 : 0.0);
  return simpson([&](double s) { return density(s) * normal_range_cdf(q * s, k); }, 0.0, upper, 1200);
}

}  // namespace oracle
