#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tddp/rng.hpp"
#include "tddp/sticks.hpp"
#include "tddp/thinning.hpp"

namespace tddp {

/// Observations split into G groups. Group labels are carried for output.
struct GroupedDataset {
  std::vector<std::vector<double>> groups;
  std::vector<std::string> labels;

  std::size_t group_count() const { return groups.size(); }
  std::size_t total() const;
  double mean() const;
  double sd() const;
  double min() const;
  double max() const;
};

enum class Mode { thinned, complete_pooling, no_pooling };

const char* to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct ModelConfig {
  DPParams dp;
  double a_pi = 3.0;
  double b_pi = 3.0;
  std::size_t truncation = 100;
  Mode mode = Mode::thinned;

  /// alpha = 1, (mu0 = data mean, tau0 = 0.01, gamma0 = 2.5, lambda0 = 1.5),
  /// Beta(3, 3) thinning-probability prior, T = 100.
  static ModelConfig defaults_for(const GroupedDataset& data, Mode mode = Mode::thinned);
  void validate() const;
};

/// Full blocked-Gibbs state. Components are 0-based indices 0..T-1.
struct GibbsState {
  std::vector<std::vector<std::size_t>> z;
  std::vector<double> v;
  ThinningSequences ell;  // T x G
  std::vector<Atom> atoms;
  std::vector<double> pi;
  Eigen::MatrixXi counts;  // n_{k,g}, T x G
  Eigen::MatrixXd omega;   // T x G
  /// Dirichlet-process baseline: l = 1 and pi = 1 are held fixed.
  bool fixed_thinning = false;

  std::size_t truncation() const { return v.size(); }
  std::size_t groups() const { return z.size(); }

  void recount();
  /// 1 + the largest occupied component index over all groups; 0 when empty.
  std::size_t last_occupied() const;
  /// Throws std::logic_error naming the first violated state invariant.
  void check_invariants() const;
};

/// Quantile-binned allocations into min(10, T) components per group, sticks
/// from the prior, l = 1, pi_g = a / (a + b), kernel parameters drawn given
/// the initial allocations.
GibbsState initialize_state(const GroupedDataset& data, const ModelConfig& config, Rng& rng);

void update_thinning(GibbsState& state, const ModelConfig& config, Rng& rng);
void update_sticks(GibbsState& state, const ModelConfig& config, Rng& rng);
void update_allocations(GibbsState& state, const GroupedDataset& data, Rng& rng);
void update_allocations_serial(GibbsState& state, const GroupedDataset& data, Rng& rng);
void update_kernel_params(GibbsState& state, const GroupedDataset& data, const ModelConfig& config, Rng& rng);
void update_thinning_probs(GibbsState& state, const ModelConfig& config, Rng& rng);

/// P(l_{k,g} = 1 | rest) for an unoccupied component with `later` observations
/// of the group allocated above k.
double thinning_conditional(double v_k, std::size_t later, double pi_g);

/// One retained draw on a common component index space of size K. For the
/// no-pooling baseline component k of group g's chain is stored at g*T + k.
struct Draw {
  std::vector<std::vector<std::uint32_t>> z;
  Eigen::MatrixXd omega;  // K x G
  std::vector<double> mu;
  std::vector<double> sigma2;
  std::vector<double> pi;
  ThinningSequences ell;  // K x G
};

struct PosteriorSamples {
  Mode mode = Mode::thinned;
  std::size_t components = 0;
  std::size_t groups = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::vector<Draw> draws;
};

struct ChainOptions {
  std::size_t iterations = 3000;
  std::size_t burn_in = 2000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  /// Check the state invariants every this many iterations (0 = never;
  /// debug builds check every iteration regardless).
  std::size_t audit_every = 0;
};

/// Runs the sampler for the configured mode. Deterministic given the seed.
/// Throws NumericalError (with the iteration index) on NaN/Inf.
PosteriorSamples run_chain(const GroupedDataset& data, const ModelConfig& config, const ChainOptions& options);

}  // namespace tddp
