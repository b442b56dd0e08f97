#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version and a serial
// reference; both evaluate the same per-element function in the same order,
// so their outputs are bit-identical and the serial form serves as the test
// oracle and benchmark baseline.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tddp/sticks.hpp"
#include "tddp/thinning.hpp"

namespace tddp::kernels {

/// Component-side inputs of one allocation sweep.
struct AllocationModel {
  const std::vector<Atom>* atoms = nullptr;
  const Eigen::MatrixXd* omega = nullptr;  // T x G
  const ThinningSequences* ell = nullptr;  // T x G
};

/// Draws z_{i,g} with P(z = k) proportional to phi(y | mu_k, sigma2_k) omega_{k,g}
/// over components with l_{k,g} = 1. Observation i of group g uses the
/// counter-based uniform (key, offset_g + i). Throws NumericalError if an
/// observation has no admissible component.
/// The normalized allocation law of a single observation y in `group`
/// (zero for inadmissible components).
std::vector<double> allocation_probabilities(double y, std::size_t group, const AllocationModel& model);

void allocate(const std::vector<std::vector<double>>& data, const AllocationModel& model, std::uint64_t key,
              std::vector<std::vector<std::size_t>>& z);
void allocate_serial(const std::vector<std::vector<double>>& data, const AllocationModel& model, std::uint64_t key,
                     std::vector<std::vector<std::size_t>>& z);

/// Mixture density of one draw for one group, renormalized over its active
/// components; `out[i]` receives the value at `grid[i]`.
struct DrawMixture {
  std::span<const double> weights;
  std::span<const double> mu;
  std::span<const double> sigma2;
};

/// values(i, q) = density of mixture q at grid[i].
void mixture_grid(std::span<const DrawMixture> mixtures, std::span<const double> grid, Eigen::MatrixXd& values);
void mixture_grid_serial(std::span<const DrawMixture> mixtures, std::span<const double> grid,
                         Eigen::MatrixXd& values);

/// Posterior similarity: fraction of draws with labels[q][i] == labels[q][j].
Eigen::MatrixXd similarity(const std::vector<std::vector<std::uint32_t>>& labels);
Eigen::MatrixXd similarity_serial(const std::vector<std::vector<std::uint32_t>>& labels);

}  // namespace tddp::kernels
