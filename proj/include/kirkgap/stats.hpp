#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace kg {

struct MeanVar {
  long n = 0;
  double mean = 0, m2 = 0;
  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double var() const { return n > 1 ? m2 / (n - 1) : 0.0; }
  double sd() const { return std::sqrt(var()); }
  double se() const { return n > 0 ? sd() / std::sqrt((double)n) : 0.0; }
};

struct LinFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  double dx = n * sxx - sx * sx;
  LinFit f;
  f.slope = (n * sxy - sx * sy) / dx;
  f.intercept = (sy - f.slope * sx) / n;
  double ssres = 0, sstot = 0, ybar = sy / n;
  for (size_t i = 0; i < n; ++i) {
    double e = y[i] - (f.slope * x[i] + f.intercept);
    ssres += e * e;
    sstot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = sstot > 0 ? 1.0 - ssres / sstot : 1.0;
  return f;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample Kolmogorov-Smirnov statistic against a given CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  double d = 0;
  size_t n = xs.size();
  for (size_t i = 0; i < n; ++i) {
    double F = cdf(xs[i]);
    d = std::max(d, std::max(F - (double)i / n, (double)(i + 1) / n - F));
  }
  return d;
}

inline double ks_statistic_normal(const std::vector<double>& xs, double mean, double sd) {
  return ks_statistic(std::vector<double>(xs), [mean, sd](double x) { return normal_cdf((x - mean) / sd); });
}

// Two-sample KS statistic.
inline double ks_statistic_2s(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::fabs((double)i / a.size() - (double)j / b.size()));
  }
  return d;
}

// critical value at alpha=0.01: c(alpha)=1.63
inline double ks_threshold_1s(size_t n) { return 1.63 / std::sqrt((double)n); }
inline double ks_threshold_2s(size_t n1, size_t n2) {
  return 1.63 * std::sqrt((double)(n1 + n2) / ((double)n1 * (double)n2));
}

struct Interval {
  double lo = 0, hi = 0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Wilson score interval for a binomial proportion
inline Interval wilson_ci(long k, long n, double z = 2.576) {
  double p = (double)k / n, z2 = z * z;
  double den = 1.0 + z2 / n;
  double c = (p + z2 / (2.0 * n)) / den;
  double h = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / den;
  return {c - h, c + h};
}

inline double binomial_se(double p, long n) { return std::sqrt(p * (1 - p) / n); }

inline double median(std::vector<double> v) {
  if (v.empty()) return 0;
  size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2) return hi;
  std::nth_element(v.begin(), v.begin() + m - 1, v.end());
  return 0.5 * (hi + v[m - 1]);
}

}  // namespace kg
