#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace tddp::analytics {

/// A correlation in [0, 1] together with a bound on the omitted part of a
/// series (exactly 0 for closed forms).
struct CorrelationResult {
  double value = 0.0;
  double truncation_error = 0.0;
};

/// Correlation of p_1(A), p_2(A) given two thinning sequences of equal length.
/// With `ones_tail` both sequences continue as all ones and the geometric tail
/// is added in closed form; otherwise the sum stops at the given length and
/// `truncation_error` bounds what any continuation could add.
CorrelationResult corr_conditional(double alpha, std::span<const std::uint8_t> ell1,
                                   std::span<const std::uint8_t> ell2, bool ones_tail);

/// (alpha / (alpha + 1))^{|u2 - u1|}
CorrelationResult corr_eventually(double alpha, std::size_t u1, std::size_t u2);

CorrelationResult corr_bernoulli(double alpha, double pi1, double pi2);

/// Independent Poisson offsets u_g - 1 ~ Poisson(lambda_g). Evaluated through
/// the modified-Bessel series; degenerate and out-of-range arguments fall back
/// to the exact closed form or to a direct double sum over the offsets.
CorrelationResult corr_poisson(double alpha, double lambda1, double lambda2, double tolerance = 1e-14);

/// |u2 - u1| ~ Poisson(lambda): exp(-lambda / (alpha + 1)).
CorrelationResult corr_poisson_diff(double alpha, double lambda);

CorrelationResult corr_dependent_bernoulli(double alpha, double pi11, double pi00);

CorrelationResult corr_symmetric_blocked(double alpha, std::size_t b0, std::size_t b1, std::size_t b2);

CorrelationResult corr_symmetric_poisson(double alpha, double lambda0, double lambda1, double lambda2);

/// Correlation between p_1(A) and the parent process p(A).
struct ParentConditional {
  std::vector<std::uint8_t> ell;
  bool ones_tail = true;
};
struct ParentEventually {
  std::size_t u = 1;
};
struct ParentBernoulli {
  double pi = 1.0;
};
struct ParentPoisson {
  double lambda = 0.0;
};
using ParentVariant = std::variant<ParentConditional, ParentEventually, ParentBernoulli, ParentPoisson>;

CorrelationResult corr_parent(double alpha, const ParentVariant& variant);

/// sum_{i=1}^{n} alpha / (alpha + i - 1): expected distinct values in a DP sample of size n.
double dp_expected_distinct(double alpha, std::size_t n);

/// (pooled-DP mean for n1 + n2, sum of the two single-sample means)
std::pair<double, double> expected_k_bounds(double alpha, std::size_t n1, std::size_t n2);

/// Exact E[K] for the eventually single-atom process with offsets (u1, u2).
/// The alternating binomial sums are evaluated in 50-digit binary floating
/// point. The sample attached to the smaller offset must have size <= 30;
/// larger sizes throw std::domain_error.
double expected_k_exact(double alpha, std::size_t n1, std::size_t n2, std::size_t u1, std::size_t u2);

inline constexpr std::size_t kExpectedKExactMaxN = 30;

/// Modified Bessel function of the first kind, integer order, by its power
/// series. Valid for 0 <= x <= 100; throws std::domain_error beyond.
double bessel_i(unsigned k, double x);

/// log I_k(x) by the same series, without underflow at large k.
double log_bessel_i(unsigned k, double x);

}  // namespace tddp::analytics
