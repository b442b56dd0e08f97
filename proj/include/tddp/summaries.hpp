#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tddp/mcmc.hpp"

namespace tddp {

/// `points` equally spaced values from lo to hi inclusive.
std::vector<double> make_grid(double lo, double hi, std::size_t points);

struct GridDensity {
  std::vector<double> grid;
  double level = 0.95;
  std::vector<std::vector<double>> estimate;  // per group, per grid point
  std::vector<std::vector<double>> lower;
  std::vector<std::vector<double>> upper;

  double spacing() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }
};

/// Shortest interval containing ceil(level * n) of the values.
std::pair<double, double> hpd_interval(std::vector<double> values, double level);

struct DensityOptions {
  double level = 0.95;
  std::size_t min_draws = 100;
  bool serial = false;  // use the serial reference kernel
};

/// Posterior mean density per group on `grid` with pointwise HPD bands.
GridDensity density_estimate(const PosteriorSamples& samples, const std::vector<double>& grid,
                             const DensityOptions& options = {});

/// Mean over groups and grid points of the HPD band length.
double average_band_length(const GridDensity& density);

/// Allocation draws of one group (group >= 0) or of all observations
/// concatenated in group order (group < 0).
std::vector<std::vector<std::uint32_t>> allocation_draws(const PosteriorSamples& samples, int group);

/// Posterior similarity matrix over the given allocation draws.
Eigen::MatrixXd psm(const std::vector<std::vector<std::uint32_t>>& draws);

struct PartitionEstimate {
  std::vector<std::size_t> labels;  // 0-based, in order of first appearance
  double loss = 0.0;
};

/// Lower bound of the posterior expected variation of information (base 2)
/// of `labels` given a similarity matrix.
double vi_lower_bound(std::span<const std::size_t> labels, const Eigen::MatrixXd& similarity);

struct VIOptions {
  std::size_t restarts = 16;
  std::size_t max_sweeps = 100;
  std::uint64_t seed = 1;
  /// Extra starting partitions refined by the same local search (e.g. draws).
  std::vector<std::vector<std::size_t>> initial;
};

/// Greedy sequential allocation followed by reassignment and merge passes,
/// minimizing vi_lower_bound. Restarts after the first cap the number of
/// clusters of the greedy start at a random value; the best partition is then
/// coarsened one forced merge at a time and every level refined again. Ties
/// go to fewer clusters, then to the first found.
PartitionEstimate vi_partition(const Eigen::MatrixXd& similarity, const VIOptions& options = {});

/// Relabels to 0, 1, ... in order of first appearance.
std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels);

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// 0.5 * sum |f - g| dx, clamped to [0, 1].
double tv_distance(std::span<const double> f, std::span<const double> g, double dx);

struct GroupSimilarity {
  Eigen::MatrixXd matrix;
  PartitionEstimate partition;
};

/// Fraction of draws in which groups g and g' occupy exactly the same set
/// of components, and the VI partition of the groups under that matrix.
GroupSimilarity group_similarity(const PosteriorSamples& samples, const VIOptions& options = {});

/// Posterior mean over draws of the TV distance between every pair of group
/// densities on `grid`.
Eigen::MatrixXd pairwise_tv(const PosteriorSamples& samples, const std::vector<double>& grid);

}  // namespace tddp
