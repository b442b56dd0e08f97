#include "tddp/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace tddp::analytics {
namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite and > 0");
}

void check_probability(double p, const char* what) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in (0, 1]");
}

void check_rate(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("Poisson rate must be finite and >= 0");
}

CorrelationResult closed(double value) { return {std::clamp(value, 0.0, 1.0), 0.0}; }

constexpr double kBesselMaxX = 100.0;

// log of the first series term (x/2)^k / k!
double log_leading_term(unsigned k, double half_x) {
  if (k <= 20) {
    double factorial = 1.0;
    for (unsigned i = 2; i <= k; ++i) factorial *= i;
    return k * std::log(half_x) - std::log(factorial);
  }
  return k * std::log(half_x) - std::lgamma(k + 1.0);
}

// sum_{m>=0} t_m / t_0 with t_{m+1} / t_m = (x/2)^2 / ((m+1)(m+1+k))
double series_ratio_sum(unsigned k, double half_x) {
  const double q = half_x * half_x;
  double term = 1.0;
  double sum = 1.0;
  for (unsigned m = 0; m < 10000; ++m) {
    term *= q / ((m + 1.0) * (m + 1.0 + k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

double poisson_log_pmf(std::size_t x, double lambda) {
  return x * std::log(lambda) - lambda - std::lgamma(x + 1.0);
}

// Smallest N with P(Poisson(lambda) > N) < eps. Past the mode the tail is
// bounded by p(N+1) / (1 - lambda / (N+2)).
std::size_t poisson_upper(double lambda, double eps) {
  if (lambda == 0.0) return 0;
  for (std::size_t n = static_cast<std::size_t>(lambda);; ++n) {
    const double next = std::exp(poisson_log_pmf(n + 1, lambda));
    const double shrink = lambda / (n + 2.0);
    if (shrink < 1.0 && next / (1.0 - shrink) < eps) return n;
  }
}

// E[r^{|X1 - X2|}] for independent X_g ~ Poisson(lambda_g), by direct summation.
CorrelationResult poisson_double_sum(double ratio, double lambda1, double lambda2, double tolerance) {
  const double eps = std::max(tolerance, 1e-16) / 4.0;
  const std::size_t n1 = poisson_upper(lambda1, eps);
  const std::size_t n2 = poisson_upper(lambda2, eps);
  std::vector<double> p1(n1 + 1), p2(n2 + 1);
  for (std::size_t i = 0; i <= n1; ++i) p1[i] = lambda1 == 0.0 ? (i == 0) : std::exp(poisson_log_pmf(i, lambda1));
  for (std::size_t i = 0; i <= n2; ++i) p2[i] = lambda2 == 0.0 ? (i == 0) : std::exp(poisson_log_pmf(i, lambda2));
  double sum = 0.0;
  for (std::size_t a = 0; a <= n1; ++a) {
    for (std::size_t b = 0; b <= n2; ++b) {
      const std::size_t d = a > b ? a - b : b - a;
      sum += p1[a] * p2[b] * std::pow(ratio, static_cast<double>(d));
    }
  }
  return {std::clamp(sum, 0.0, 1.0), 2.0 * eps};
}

}  // namespace

CorrelationResult corr_conditional(double alpha, std::span<const std::uint8_t> ell1,
                                   std::span<const std::uint8_t> ell2, bool ones_tail) {
  check_alpha(alpha);
  if (ell1.size() != ell2.size()) throw std::invalid_argument("corr_conditional: sequences differ in length");
  const double shared_ratio = alpha / (alpha + 2.0);
  const double specific_ratio = alpha / (alpha + 1.0);
  // factor = (alpha/(alpha+2))^{s_j} (alpha/(alpha+1))^{q_j}
  double factor = 1.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < ell1.size(); ++j) {
    const bool a = ell1[j] != 0;
    const bool b = ell2[j] != 0;
    if (a && b) {
      sum += factor;
      factor *= shared_ratio;
    } else if (a != b) {
      factor *= specific_ratio;
    }
  }
  double value = 2.0 / (alpha + 2.0) * sum;
  // An all-ones continuation contributes 2/(alpha+2) * factor * (alpha+2)/2.
  if (ones_tail) return {std::clamp(value + factor, 0.0, 1.0), 0.0};
  return {std::clamp(value, 0.0, 1.0), factor};
}

CorrelationResult corr_eventually(double alpha, std::size_t u1, std::size_t u2) {
  check_alpha(alpha);
  if (u1 < 1 || u2 < 1) throw std::invalid_argument("corr_eventually: u_g must be >= 1");
  const double diff = u1 > u2 ? static_cast<double>(u1 - u2) : static_cast<double>(u2 - u1);
  return closed(std::pow(alpha / (alpha + 1.0), diff));
}

CorrelationResult corr_bernoulli(double alpha, double pi1, double pi2) {
  check_alpha(alpha);
  check_probability(pi1, "pi1");
  check_probability(pi2, "pi2");
  if (pi1 == pi2) return closed(pi1 * (alpha + 1.0) / (alpha + 2.0 - pi1));
  const double s = pi1 + pi2;
  return closed(2.0 * pi1 * pi2 * (alpha + 1.0) / (alpha * s + 2.0 * (s - pi1 * pi2)));
}

CorrelationResult corr_poisson(double alpha, double lambda1, double lambda2, double tolerance) {
  check_alpha(alpha);
  check_rate(lambda1);
  check_rate(lambda2);
  if (!(tolerance > 0.0)) throw std::invalid_argument("corr_poisson: tolerance must be > 0");
  const double ratio = alpha / (alpha + 1.0);
  if (lambda1 == 0.0 && lambda2 == 0.0) return {1.0, 0.0};
  // One offset degenerate at 1: E[r^X] for X ~ Poisson(lambda) = exp(-lambda/(alpha+1)).
  if (lambda1 == 0.0 || lambda2 == 0.0) return closed(std::exp(-(lambda1 + lambda2) / (alpha + 1.0)));

  const double x = 2.0 * std::sqrt(lambda1 * lambda2);
  const double half_log_ratio = 0.5 * std::log(lambda1 / lambda2);
  // Near the lambda -> 0 limit or beyond the validated Bessel range the direct
  // Skellam expectation is both cheaper and better conditioned.
  if (x > kBesselMaxX || std::abs(half_log_ratio) > 0.5 * std::log(1e8))
    return poisson_double_sum(ratio, lambda1, lambda2, tolerance);

  const double rho = std::abs(half_log_ratio);
  const double log_ratio = std::log(ratio);
  const double mode = std::abs(lambda1 - lambda2) + 1.0;
  double sum = std::exp(-lambda1 - lambda2 + log_bessel_i(0, x));
  int small_run = 0;
  for (unsigned k = 1; k < 100000; ++k) {
    const double log_base = -lambda1 - lambda2 + k * log_ratio + log_bessel_i(k, x);
    // (l1/l2)^{k/2} + (l2/l1)^{k/2} = e^{k rho} (1 + e^{-2 k rho})
    const double term = std::exp(log_base + k * rho) * (1.0 + std::exp(-2.0 * k * rho));
    sum += term;
    small_run = term < tolerance * sum ? small_run + 1 : 0;
    if (small_run >= 3 && k >= mode) {
      // Past the mode of |u2 - u1| successive terms shrink by at least `ratio`.
      const double tail = term * ratio / (1.0 - ratio);
      if (tail < tolerance) return {std::clamp(sum, 0.0, 1.0), tail};
    }
  }
  return {std::clamp(sum, 0.0, 1.0), std::numeric_limits<double>::infinity()};
}

CorrelationResult corr_poisson_diff(double alpha, double lambda) {
  check_alpha(alpha);
  check_rate(lambda);
  return closed(std::exp(-lambda / (alpha + 1.0)));
}

CorrelationResult corr_dependent_bernoulli(double alpha, double pi11, double pi00) {
  check_alpha(alpha);
  if (!(pi11 >= 0.0 && pi00 >= 0.0 && pi11 + pi00 <= 1.0 + 1e-12))
    throw std::invalid_argument("corr_dependent_bernoulli: need pi11, pi00 >= 0 and pi11 + pi00 <= 1");
  if (pi11 == 0.0) return {0.0, 0.0};
  return closed(2.0 * pi11 * (alpha + 1.0) / ((alpha + 2.0) * (1.0 - pi00) + alpha * pi11));
}

CorrelationResult corr_symmetric_blocked(double alpha, std::size_t b0, std::size_t b1, std::size_t b2) {
  check_alpha(alpha);
  const double shared = std::pow(alpha / (alpha + 2.0), static_cast<double>(b0));
  const double specific = std::pow(alpha / (alpha + 1.0), static_cast<double>(b1 + b2));
  return closed(1.0 - shared * (1.0 - specific));
}

CorrelationResult corr_symmetric_poisson(double alpha, double lambda0, double lambda1, double lambda2) {
  check_alpha(alpha);
  check_rate(lambda0);
  check_rate(lambda1);
  check_rate(lambda2);
  const double shared = std::exp(-2.0 * lambda0 / (alpha + 2.0));
  return closed(1.0 - shared * (-std::expm1(-(lambda1 + lambda2) / (alpha + 1.0))));
}

CorrelationResult corr_parent(double alpha, const ParentVariant& variant) {
  check_alpha(alpha);
  if (const auto* c = std::get_if<ParentConditional>(&variant)) {
    const std::vector<std::uint8_t> ones(c->ell.size(), 1);
    return corr_conditional(alpha, c->ell, ones, c->ones_tail);
  }
  if (const auto* e = std::get_if<ParentEventually>(&variant)) {
    if (e->u < 1) throw std::invalid_argument("corr_parent: u must be >= 1");
    return closed(std::pow(alpha / (alpha + 1.0), static_cast<double>(e->u - 1)));
  }
  if (const auto* b = std::get_if<ParentBernoulli>(&variant)) {
    check_probability(b->pi, "pi");
    return closed(2.0 * b->pi * (alpha + 1.0) / (alpha * (b->pi + 1.0) + 2.0));
  }
  const auto& p = std::get<ParentPoisson>(variant);
  check_rate(p.lambda);
  return closed(std::exp(-p.lambda / (alpha + 1.0)));
}

double dp_expected_distinct(double alpha, std::size_t n) {
  check_alpha(alpha);
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) sum += alpha / (alpha + static_cast<double>(i) - 1.0);
  return sum;
}

std::pair<double, double> expected_k_bounds(double alpha, std::size_t n1, std::size_t n2) {
  return {dp_expected_distinct(alpha, n1 + n2), dp_expected_distinct(alpha, n1) + dp_expected_distinct(alpha, n2)};
}

double expected_k_exact(double alpha, std::size_t n1, std::size_t n2, std::size_t u1, std::size_t u2) {
  using Real = boost::multiprecision::cpp_bin_float_50;
  check_alpha(alpha);
  if (u1 < 1 || u2 < 1) throw std::invalid_argument("expected_k_exact: u_g must be >= 1");
  // The closed form assumes u1 <= u2; the sample attached to u1 goes first.
  if (u1 > u2) {
    std::swap(u1, u2);
    std::swap(n1, n2);
  }
  if (n1 > kExpectedKExactMaxN)
    throw std::domain_error("expected_k_exact: alternating-sum instability for n1 > 30; use Monte Carlo");
  const std::size_t w = u2 - u1;
  const Real a = alpha;

  auto pow_w = [w](const Real& base) {
    Real out = 1;
    for (std::size_t i = 0; i < w; ++i) out *= base;
    return out;
  };
  std::vector<Real> dp_mean(n1 + n2 + 1, Real(0));
  for (std::size_t m = 1; m <= n1 + n2; ++m) dp_mean[m] = dp_mean[m - 1] + a / (a + Real(m - 1));
  // binom[r][l] for r <= n1
  std::vector<std::vector<Real>> binom(n1 + 1);
  for (std::size_t r = 0; r <= n1; ++r) {
    binom[r].assign(r + 1, Real(1));
    for (std::size_t l = 1; l < r; ++l) binom[r][l] = binom[r - 1][l - 1] + binom[r - 1][l];
  }

  // Atoms reachable only by the first sample:
  // sum_r (-1)^{r-1} C(n1,r) Gamma(a+1)Gamma(r)/Gamma(a+r) (1 - (a/(a+r))^w),
  // with Gamma(a+1)Gamma(r)/Gamma(a+r) = prod_{i<r} i/(a+i).
  Real first = 0;
  Real gamma_ratio = 1;
  for (std::size_t r = 1; r <= n1; ++r) {
    if (r > 1) gamma_ratio *= Real(r - 1) / (a + Real(r - 1));
    const Real term = binom[n1][r] * gamma_ratio * (Real(1) - pow_w(a / (a + Real(r))));
    first += (r % 2 == 1) ? term : Real(-term);
  }

  Real second = 0;
  for (std::size_t r = 0; r <= n1; ++r) {
    Real inner = 0;
    for (std::size_t l = 0; l <= r; ++l) {
      const Real term = binom[r][l] * pow_w(a / (a + Real(l + n1 - r)));
      inner += (l % 2 == 0) ? term : Real(-term);
    }
    second += binom[n1][r] * dp_mean[n1 + n2 - r] * inner;
  }
  return static_cast<double>(first + second);
}

double log_bessel_i(unsigned k, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("bessel_i: x must be >= 0");
  if (x > kBesselMaxX) throw std::domain_error("bessel_i: x outside validated range [0, 100]");
  if (x == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double half_x = 0.5 * x;
  return log_leading_term(k, half_x) + std::log(series_ratio_sum(k, half_x));
}

double bessel_i(unsigned k, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("bessel_i: x must be >= 0");
  if (x > kBesselMaxX) throw std::domain_error("bessel_i: x outside validated range [0, 100]");
  if (x == 0.0) return k == 0 ? 1.0 : 0.0;
  const double half_x = 0.5 * x;
  double leading = 1.0;
  if (k <= 20) {
    for (unsigned i = 1; i <= k; ++i) leading *= half_x / i;
  } else {
    leading = std::exp(log_leading_term(k, half_x));
  }
  return leading * series_ratio_sum(k, half_x);
}

}  // namespace tddp::analytics
