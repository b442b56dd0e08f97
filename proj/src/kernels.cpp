#include "tddp/kernels.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tddp/error.hpp"
#include "tddp/rng.hpp"

namespace tddp::kernels {
namespace {

// Per-group log-weights and per-component Gaussian constants.
struct AllocationTables {
  std::vector<std::size_t> offsets;  // flattened observation offset of each group
  std::vector<std::vector<std::size_t>> active;   // admissible components per group
  std::vector<std::vector<double>> log_weight;    // aligned with `active`
  std::vector<double> log_norm;                   // -0.5 log(2 pi sigma2)
  std::vector<double> half_precision;             // 1 / (2 sigma2)
};

AllocationTables make_tables(const std::vector<std::vector<double>>& data, const AllocationModel& model) {
  const auto& atoms = *model.atoms;
  const auto& omega = *model.omega;
  const auto& ell = *model.ell;
  AllocationTables t;
  t.offsets.resize(data.size() + 1, 0);
  for (std::size_t g = 0; g < data.size(); ++g) t.offsets[g + 1] = t.offsets[g] + data[g].size();
  t.log_norm.resize(atoms.size());
  t.half_precision.resize(atoms.size());
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    t.log_norm[k] = -0.5 * std::log(2.0 * std::numbers::pi * atoms[k].sigma2);
    t.half_precision[k] = 0.5 / atoms[k].sigma2;
  }
  t.active.resize(data.size());
  t.log_weight.resize(data.size());
  for (std::size_t g = 0; g < data.size(); ++g) {
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const auto gi = static_cast<Eigen::Index>(g);
      const auto ki = static_cast<Eigen::Index>(k);
      if (ell(ki, gi) && omega(ki, gi) > 0.0) {
        t.active[g].push_back(k);
        t.log_weight[g].push_back(std::log(omega(ki, gi)));
      }
    }
  }
  return t;
}

// Unnormalized masses exp(log mass - peak) over the group's active components.
double fill_mass(double y, std::size_t g, const AllocationModel& model, const AllocationTables& t,
                 std::vector<double>& scratch) {
  const auto& active = t.active[g];
  const auto& lw = t.log_weight[g];
  const auto& atoms = *model.atoms;
  if (active.empty()) throw NumericalError("allocation: group " + std::to_string(g) + " has no admissible component");
  scratch.resize(active.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < active.size(); ++a) {
    const std::size_t k = active[a];
    const double d = y - atoms[k].mu;
    scratch[a] = lw[a] + t.log_norm[k] - d * d * t.half_precision[k];
    if (scratch[a] > peak) peak = scratch[a];
  }
  if (!std::isfinite(peak)) throw NumericalError("allocation: all component masses vanish (underflow)");
  double total = 0.0;
  for (double& s : scratch) {
    s = std::exp(s - peak);
    total += s;
  }
  return total;
}

std::size_t allocate_one(double y, std::size_t g, double u, const AllocationModel& model,
                         const AllocationTables& t, std::vector<double>& scratch) {
  const double total = fill_mass(y, g, model, t, scratch);
  const auto& active = t.active[g];
  const double target = u * total;
  double cum = 0.0;
  for (std::size_t a = 0; a < active.size(); ++a) {
    cum += scratch[a];
    if (target < cum) return active[a];
  }
  return active.back();
}

double mixture_at(const DrawMixture& m, double x) {
  double total = 0.0;
  double value = 0.0;
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    const double w = m.weights[k];
    if (w <= 0.0) continue;
    const double d = x - m.mu[k];
    value += w * std::exp(-0.5 * d * d / m.sigma2[k]) / std::sqrt(2.0 * std::numbers::pi * m.sigma2[k]);
    total += w;
  }
  return total > 0.0 ? value / total : 0.0;
}

// Observation-major copy of the draws: row i holds the Q labels of item i.
std::vector<std::uint32_t> transpose_labels(const std::vector<std::vector<std::uint32_t>>& labels) {
  const std::size_t q = labels.size();
  const std::size_t n = labels.front().size();
  std::vector<std::uint32_t> out(n * q);
  for (std::size_t d = 0; d < q; ++d) {
    if (labels[d].size() != n) throw std::invalid_argument("similarity: draws differ in length");
    for (std::size_t i = 0; i < n; ++i) out[i * q + d] = labels[d][i];
  }
  return out;
}

double similarity_entry(const std::uint32_t* a, const std::uint32_t* b, std::size_t q) {
  std::size_t same = 0;
  for (std::size_t d = 0; d < q; ++d) same += a[d] == b[d];
  return static_cast<double>(same) / static_cast<double>(q);
}

void resize_like(const std::vector<std::vector<double>>& data, std::vector<std::vector<std::size_t>>& z) {
  z.resize(data.size());
  for (std::size_t g = 0; g < data.size(); ++g) z[g].resize(data[g].size());
}

}  // namespace

std::vector<double> allocation_probabilities(double y, std::size_t group, const AllocationModel& model) {
  const std::vector<std::vector<double>> empty(static_cast<std::size_t>(model.ell->cols()));
  const auto t = make_tables(empty, model);
  std::vector<double> scratch;
  const double total = fill_mass(y, group, model, t, scratch);
  std::vector<double> out(model.atoms->size(), 0.0);
  for (std::size_t a = 0; a < scratch.size(); ++a) out[t.active[group][a]] = scratch[a] / total;
  return out;
}

void allocate_serial(const std::vector<std::vector<double>>& data, const AllocationModel& model, std::uint64_t key,
                     std::vector<std::vector<std::size_t>>& z) {
  const auto t = make_tables(data, model);
  resize_like(data, z);
  std::vector<double> scratch;
  for (std::size_t g = 0; g < data.size(); ++g)
    for (std::size_t i = 0; i < data[g].size(); ++i)
      z[g][i] = allocate_one(data[g][i], g, counter_uniform(key, t.offsets[g] + i), model, t, scratch);
}

void allocate(const std::vector<std::vector<double>>& data, const AllocationModel& model, std::uint64_t key,
              std::vector<std::vector<std::size_t>>& z) {
  const auto t = make_tables(data, model);
  resize_like(data, z);
  const auto total = static_cast<long long>(t.offsets.back());
  std::exception_ptr failure;
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (long long flat = 0; flat < total; ++flat) {
      const auto idx = static_cast<std::size_t>(flat);
      std::size_t g = 0;
      while (t.offsets[g + 1] <= idx) ++g;
      const std::size_t i = idx - t.offsets[g];
      try {
        z[g][i] = allocate_one(data[g][i], g, counter_uniform(key, idx), model, t, scratch);
      } catch (...) {
#pragma omp critical(tddp_allocate_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void mixture_grid_serial(std::span<const DrawMixture> mixtures, std::span<const double> grid,
                         Eigen::MatrixXd& values) {
  values.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(mixtures.size()));
  for (std::size_t q = 0; q < mixtures.size(); ++q)
    for (std::size_t i = 0; i < grid.size(); ++i)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) = mixture_at(mixtures[q], grid[i]);
}

void mixture_grid(std::span<const DrawMixture> mixtures, std::span<const double> grid, Eigen::MatrixXd& values) {
  values.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(mixtures.size()));
  const auto draws = static_cast<long long>(mixtures.size());
#pragma omp parallel for schedule(static)
  for (long long q = 0; q < draws; ++q)
    for (std::size_t i = 0; i < grid.size(); ++i)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q)) =
          mixture_at(mixtures[static_cast<std::size_t>(q)], grid[i]);
}

Eigen::MatrixXd similarity_serial(const std::vector<std::vector<std::uint32_t>>& labels) {
  if (labels.empty()) throw std::invalid_argument("similarity: no draws");
  const std::size_t n = labels.front().size();
  const std::size_t q = labels.size();
  const auto rows = transpose_labels(labels);
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = similarity_entry(&rows[i * q], &rows[j * q], q);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
    }
  return out;
}

Eigen::MatrixXd similarity(const std::vector<std::vector<std::uint32_t>>& labels) {
  if (labels.empty()) throw std::invalid_argument("similarity: no draws");
  const std::size_t n = labels.front().size();
  const std::size_t q = labels.size();
  const auto rows = transpose_labels(labels);
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (long long ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = similarity_entry(&rows[i * q], &rows[j * q], q);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
    }
  }
  return out;
}

}  // namespace tddp::kernels
