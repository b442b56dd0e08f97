#pragma once
// Reference computations used only by the tests. Each is written directly
// from a defining sum or expectation, independent of the library code paths.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace oracle {

inline double harmonic(double alpha, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 1; i <= n; ++i) s += alpha / (alpha + static_cast<double>(i) - 1.0);
  return s;
}

inline long double poisson_pmf(unsigned x, long double lambda) {
  long double p = std::exp(-lambda);
  for (unsigned i = 1; i <= x; ++i) p *= lambda / i;
  return p;
}

/// Fixed 50-term power series of I_k(x) in long double.
inline long double bessel_i50(unsigned k, long double x) {
  long double half = x / 2.0L;
  long double term = 1.0L;
  for (unsigned i = 1; i <= k; ++i) term *= half / i;
  long double sum = 0.0L;
  for (unsigned m = 0; m < 50; ++m) {
    sum += term;
    term *= half * half / ((m + 1.0L) * (m + 1.0L + k));
  }
  return sum;
}

/// E[(a/(a+1))^{|u1-u2|}] over independent Poisson offsets, offsets <= cap.
inline double skellam_double_sum(double alpha, double l1, double l2, unsigned cap = 40) {
  const long double r = alpha / (alpha + 1.0);
  long double s = 0.0L;
  for (unsigned a = 0; a <= cap; ++a)
    for (unsigned b = 0; b <= cap; ++b)
      s += poisson_pmf(a, l1) * poisson_pmf(b, l2) * std::pow(r, static_cast<long double>(a > b ? a - b : b - a));
  return static_cast<double>(s);
}

/// E[(a/(a+1))^X] for X ~ Poisson(lambda), X <= cap.
inline double poisson_single_sum(double alpha, double lambda, unsigned cap = 80) {
  const long double r = alpha / (alpha + 1.0);
  long double s = 0.0L;
  for (unsigned x = 0; x <= cap; ++x) s += std::pow(r, static_cast<long double>(x)) * poisson_pmf(x, lambda);
  return static_cast<double>(s);
}

/// Every set partition of {0..n-1} as a restricted growth string.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& f) {
  std::vector<std::size_t> a(n, 0), m(n, 0);
  for (;;) {
    f(a);
    std::size_t i = n;
    while (i-- > 1) {
      if (a[i] <= m[i - 1]) break;
    }
    if (i == 0) return;
    ++a[i];
    m[i] = std::max(m[i - 1], a[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      m[j] = m[i];
    }
  }
}

/// (1/n) sum_i [log2 |C_i| - 2 log2 sum_{j in C_i} P_ij + log2 sum_j P_ij]
inline double vi_bound(const std::vector<std::size_t>& labels, const Eigen::MatrixXd& p) {
  const std::size_t n = labels.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double size = 0.0, within = 0.0, all = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      all += pij;
      if (labels[j] == labels[i]) {
        size += 1.0;
        within += pij;
      }
    }
    loss += std::log2(size) - 2.0 * std::log2(within) + std::log2(all);
  }
  return loss / static_cast<double>(n);
}

inline double normal_pdf(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * 3.14159265358979323846 * var);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

/// Batch-means standard error for an autocorrelated sequence.
inline MeanSe batch_mean_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t len = x.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
    means.push_back(s / static_cast<double>(len));
  }
  return mean_se(means);
}

}  // namespace oracle
