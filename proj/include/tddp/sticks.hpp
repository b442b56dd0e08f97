#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tddp/thinning.hpp"

namespace tddp {

/// Concentration and normal-inverse-gamma base measure:
/// mu | sigma^2 ~ N(mu0, sigma^2 / tau0), 1 / sigma^2 ~ Gamma(gamma0, lambda0).
struct DPParams {
  double alpha = 1.0;
  double mu0 = 0.0;
  double tau0 = 0.01;
  double gamma0 = 2.5;
  double lambda0 = 1.5;

  void validate() const;
};

struct Atom {
  double mu = 0.0;
  double sigma2 = 1.0;
};

Atom draw_atom(const DPParams& params, Rng& rng);

struct ThinnedSticks {
  std::vector<double> v;
  std::vector<Atom> atoms;
  ThinningSequences ell;
  Eigen::MatrixXd omega;  // T x G

  std::size_t truncation() const { return v.size(); }
  std::size_t groups() const { return static_cast<std::size_t>(ell.cols()); }
};

/// omega_{j,g} = v_j l_{j,g} prod_{h<j} (1 - v_h l_{h,g}).
Eigen::MatrixXd thinned_weights(const std::vector<double>& v, const ThinningSequences& ell);

ThinnedSticks sample_sticks(const DPParams& params, const ThinningSequences& ell, std::uint64_t seed);

/// Atom-index labels (0-based) per group. Each column is renormalized over
/// its T retained weights; a zero-weight column throws UnderTruncationError.
std::vector<std::vector<std::size_t>> sample_prior_observations(const ThinnedSticks& sticks,
                                                                const std::vector<std::size_t>& sizes,
                                                                std::uint64_t seed);

/// Distinct-value counts. The shared/specific split is defined for two
/// groups only; for G != 2 `shared` is empty and `specific` holds nothing.
struct PartitionCounts {
  std::optional<std::size_t> shared;        // K_0
  std::vector<std::size_t> specific;        // K_1, K_2
  std::size_t total = 0;                    // K
  std::vector<std::size_t> per_group;       // distinct values within each group
};

PartitionCounts count_partition(const std::vector<std::vector<std::size_t>>& labels);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

struct ExpectedKEstimate {
  Estimate k0, k1, k2, k;
  std::size_t replications = 0;
};

struct ExpectedKRequest {
  DPParams params;
  ThinningModel model = BernoulliThinning{{1.0}};
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::size_t replications = 1000;
  std::size_t truncation = 1000;
  std::uint64_t seed = 1;
};

/// One prior replication: thinning rows and sticks are generated lazily, up
/// to the truncation, only as far as the sampled labels reach. Labels follow
/// the same renormalized-truncation law as sample_sticks followed by
/// sample_prior_observations.
PartitionCounts expected_k_replicate(const ExpectedKRequest& req, std::uint64_t replicate_index);

/// Monte Carlo E[K_0], E[K_1], E[K_2], E[K]. Replication r uses stream
/// derive_seed(seed, r); per-replication results are reduced in index order,
/// so the answer does not depend on the thread count.
ExpectedKEstimate monte_carlo_expected_k(const ExpectedKRequest& req);
ExpectedKEstimate monte_carlo_expected_k_serial(const ExpectedKRequest& req);

}  // namespace tddp
