#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "tddp/rng.hpp"

namespace tddp {

/// Independent Bernoulli thinning, l_{j,g} ~ Bern(pi_g). A single entry is
/// broadcast to every group. pi_g = 1 expresses complete pooling.
struct BernoulliThinning {
  std::vector<double> pi;
};

/// u_g - 1 leading zeros, then ones. Either fixed offsets u_g >= 1 or
/// Poisson rates with u_g - 1 ~ Poisson(rate_g); exactly one is non-empty.
struct EventuallySingleAtomThinning {
  std::vector<std::size_t> offsets;
  std::vector<double> rates;

  static EventuallySingleAtomThinning fixed(std::vector<std::size_t> u) { return {std::move(u), {}}; }
  static EventuallySingleAtomThinning poisson(std::vector<double> r) { return {{}, std::move(r)}; }
  bool random() const { return offsets.empty(); }
};

/// Row pairs (l_{j,1}, l_{j,2}) drawn i.i.d. from a 2x2 joint table. G = 2 only.
struct DependentBernoulliThinning {
  double p11 = 0.25;
  double p10 = 0.25;
  double p01 = 0.25;
  double p00 = 0.25;
};

/// Shared prefix of b_0 rows, then one block of b_g rows per group in which
/// only group g is on, then all ones. Fixed block lengths or Poisson rates
/// (b_r ~ Poisson(rate_r)); each vector has G + 1 entries when used.
struct SymmetricBlockedThinning {
  std::vector<std::size_t> blocks;
  std::vector<double> rates;

  static SymmetricBlockedThinning fixed(std::vector<std::size_t> b) { return {std::move(b), {}}; }
  static SymmetricBlockedThinning poisson(std::vector<double> r) { return {{}, std::move(r)}; }
  bool random() const { return blocks.empty(); }
};

using ThinningModel = std::variant<BernoulliThinning, EventuallySingleAtomThinning,
                                   DependentBernoulliThinning, SymmetricBlockedThinning>;

/// T x G binary matrix; row j is truncation level j (0-based), column g a group.
using ThinningSequences = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Throws std::invalid_argument if `model` is malformed for `groups` groups.
void validate(const ThinningModel& model, std::size_t groups);

/// P(l_{j,g} = 1) for the row-independent variants. Throws std::domain_error
/// ("row-dependent marginal") for the structured variants.
double marginal_one_probability(const ThinningModel& model, std::size_t group);

/// Produces thinning rows one at a time. Random block lengths / offsets are
/// drawn at construction, so a generator represents one realization.
class ThinningRowGenerator {
 public:
  ThinningRowGenerator(const ThinningModel& model, std::size_t groups, Rng& rng);

  std::size_t groups() const { return groups_; }

  /// Fills `row` (size G) with the next row of the realization.
  void next(Rng& rng, std::vector<std::uint8_t>& row);

  /// Rows needed before the structured layout becomes all ones (0 for the
  /// Bernoulli variants).
  std::size_t structured_prefix() const { return prefix_; }

 private:
  ThinningModel model_;
  std::size_t groups_;
  std::size_t row_ = 0;
  std::size_t prefix_ = 0;
  std::vector<std::size_t> counts_;  // u_g or b_r for the structured variants
};

/// Samples a T x G realization. Throws UnderTruncationError if the layout
/// does not fit in T rows or any column has no ones.
ThinningSequences sample_thinning(const ThinningModel& model, std::size_t rows, std::size_t groups,
                                  std::uint64_t seed);

}  // namespace tddp
