#include "tddp/sticks.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

#include "tddp/error.hpp"

namespace tddp {

void DPParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(tau0 > 0.0) || !(gamma0 > 0.0) || !(lambda0 > 0.0))
    throw std::invalid_argument("base measure: tau0, gamma0, lambda0 must be > 0");
  if (!std::isfinite(mu0)) throw std::invalid_argument("base measure: mu0 must be finite");
}

Atom draw_atom(const DPParams& params, Rng& rng) {
  const double precision = draw_gamma(rng, params.gamma0, params.lambda0);
  const double sigma2 = 1.0 / precision;
  return {draw_normal(rng, params.mu0, std::sqrt(sigma2 / params.tau0)), sigma2};
}

Eigen::MatrixXd thinned_weights(const std::vector<double>& v, const ThinningSequences& ell) {
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (ell.rows() != rows) throw std::invalid_argument("thinned_weights: v and l row counts differ");
  Eigen::MatrixXd omega(rows, ell.cols());
  for (Eigen::Index g = 0; g < ell.cols(); ++g) {
    double remaining = 1.0;
    for (Eigen::Index j = 0; j < rows; ++j) {
      const double broken = ell(j, g) ? v[j] : 0.0;
      omega(j, g) = broken * remaining;
      remaining *= 1.0 - broken;
    }
  }
  return omega;
}

ThinnedSticks sample_sticks(const DPParams& params, const ThinningSequences& ell, std::uint64_t seed) {
  params.validate();
  if (ell.rows() < 1) throw std::invalid_argument("sample_sticks: T must be >= 1");
  Rng rng(seed);
  ThinnedSticks out;
  const auto rows = static_cast<std::size_t>(ell.rows());
  out.v.resize(rows);
  out.atoms.resize(rows);
  for (std::size_t j = 0; j < rows; ++j) {
    out.v[j] = draw_beta_one(rng, params.alpha);
    out.atoms[j] = draw_atom(params, rng);
  }
  out.ell = ell;
  out.omega = thinned_weights(out.v, ell);
  return out;
}

std::vector<std::vector<std::size_t>> sample_prior_observations(const ThinnedSticks& sticks,
                                                                const std::vector<std::size_t>& sizes,
                                                                std::uint64_t seed) {
  if (sizes.size() != sticks.groups()) throw std::invalid_argument("sample_prior_observations: one size per group");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> labels(sizes.size());
  std::vector<double> cumulative(sticks.truncation());
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    double total = 0.0;
    for (std::size_t j = 0; j < cumulative.size(); ++j) {
      total += sticks.omega(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(g));
      cumulative[j] = total;
    }
    if (!(total > 0.0))
      throw UnderTruncationError("sample_prior_observations: group " + std::to_string(g) + " has zero weight");
    labels[g].reserve(sizes[g]);
    for (std::size_t i = 0; i < sizes[g]; ++i) {
      const double u = uniform01(rng) * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      labels[g].push_back(static_cast<std::size_t>(it - cumulative.begin()));
    }
  }
  return labels;
}

PartitionCounts count_partition(const std::vector<std::vector<std::size_t>>& labels) {
  PartitionCounts out;
  std::vector<std::vector<std::size_t>> distinct(labels.size());
  std::vector<std::size_t> all;
  for (std::size_t g = 0; g < labels.size(); ++g) {
    distinct[g] = labels[g];
    std::sort(distinct[g].begin(), distinct[g].end());
    distinct[g].erase(std::unique(distinct[g].begin(), distinct[g].end()), distinct[g].end());
    out.per_group.push_back(distinct[g].size());
    all.insert(all.end(), distinct[g].begin(), distinct[g].end());
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  out.total = all.size();
  if (labels.size() == 2) {
    std::vector<std::size_t> both;
    std::set_intersection(distinct[0].begin(), distinct[0].end(), distinct[1].begin(), distinct[1].end(),
                          std::back_inserter(both));
    out.shared = both.size();
    out.specific = {distinct[0].size() - both.size(), distinct[1].size() - both.size()};
  }
  return out;
}

namespace {

// Lazily realized two-group prefix of a thinned stick-breaking draw.
class LazySticks {
 public:
  LazySticks(const ExpectedKRequest& req, Rng& rng) : req_(req), rng_(rng), gen_(req.model, 2, rng) {
    if (std::holds_alternative<EventuallySingleAtomThinning>(req.model)
            ? gen_.structured_prefix() >= req.truncation
            : gen_.structured_prefix() > req.truncation)
      throw UnderTruncationError("monte_carlo_expected_k: structured layout exceeds truncation");
  }

  std::size_t draw_label(std::size_t g) {
    double u = uniform01(rng_);
    auto& cum = cumulative_[g];
    while ((cum.empty() || cum.back() < u) && rows_ < req_.truncation) extend();
    if (cum.back() < u) {
      // Truncation reached: renormalize over the retained weights.
      if (!(cum.back() > 0.0))
        throw UnderTruncationError("monte_carlo_expected_k: zero-weight column; increase truncation");
      u = uniform01(rng_) * cum.back();
    }
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return static_cast<std::size_t>(it - cum.begin());
  }

 private:
  void extend() {
    gen_.next(rng_, row_);
    const double v = draw_beta_one(rng_, req_.params.alpha);
    for (std::size_t g = 0; g < 2; ++g) {
      const double broken = row_[g] ? v : 0.0;
      const double prev = cumulative_[g].empty() ? 0.0 : cumulative_[g].back();
      cumulative_[g].push_back(prev + broken * remaining_[g]);
      remaining_[g] *= 1.0 - broken;
    }
    ++rows_;
  }

  const ExpectedKRequest& req_;
  Rng& rng_;
  ThinningRowGenerator gen_;
  std::vector<std::uint8_t> row_;
  std::size_t rows_ = 0;
  double remaining_[2] = {1.0, 1.0};
  std::vector<double> cumulative_[2];
};

void check_request(const ExpectedKRequest& req) {
  req.params.validate();
  validate(req.model, 2);
  if (req.replications < 100) throw std::invalid_argument("monte_carlo_expected_k: R must be >= 100");
  if (req.truncation < 1) throw std::invalid_argument("monte_carlo_expected_k: T must be >= 1");
}

Estimate summarize(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

ExpectedKEstimate reduce(const std::vector<PartitionCounts>& reps) {
  std::vector<double> k0, k1, k2, k;
  for (const auto& c : reps) {
    k0.push_back(static_cast<double>(*c.shared));
    k1.push_back(static_cast<double>(c.specific[0]));
    k2.push_back(static_cast<double>(c.specific[1]));
    k.push_back(static_cast<double>(c.total));
  }
  return {summarize(k0), summarize(k1), summarize(k2), summarize(k), reps.size()};
}

}  // namespace

PartitionCounts expected_k_replicate(const ExpectedKRequest& req, std::uint64_t replicate_index) {
  Rng rng = make_rng(req.seed, replicate_index);
  LazySticks sticks(req, rng);
  std::vector<std::vector<std::size_t>> labels(2);
  labels[0].reserve(req.n1);
  labels[1].reserve(req.n2);
  for (std::size_t i = 0; i < req.n1; ++i) labels[0].push_back(sticks.draw_label(0));
  for (std::size_t i = 0; i < req.n2; ++i) labels[1].push_back(sticks.draw_label(1));
  return count_partition(labels);
}

ExpectedKEstimate monte_carlo_expected_k_serial(const ExpectedKRequest& req) {
  check_request(req);
  std::vector<PartitionCounts> reps(req.replications);
  for (std::size_t r = 0; r < req.replications; ++r) reps[r] = expected_k_replicate(req, r);
  return reduce(reps);
}

ExpectedKEstimate monte_carlo_expected_k(const ExpectedKRequest& req) {
  check_request(req);
  std::vector<PartitionCounts> reps(req.replications);
  std::exception_ptr failure;
  const auto count = static_cast<long long>(req.replications);
#pragma omp parallel for schedule(dynamic, 256)
  for (long long r = 0; r < count; ++r) {
    try {
      reps[static_cast<std::size_t>(r)] = expected_k_replicate(req, static_cast<std::uint64_t>(r));
    } catch (...) {
#pragma omp critical(tddp_mc_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return reduce(reps);
}

}  // namespace tddp
