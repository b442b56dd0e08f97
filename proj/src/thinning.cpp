#include "tddp/thinning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tddp/error.hpp"

namespace tddp {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <class T>
const T& broadcast(const std::vector<T>& values, std::size_t g) {
  return values.size() == 1 ? values.front() : values.at(g);
}

template <class T>
void check_length(const std::vector<T>& values, std::size_t expected, const char* what) {
  if (values.size() != 1 && values.size() != expected) {
    std::ostringstream msg;
    msg << what << ": expected 1 or " << expected << " entries, got " << values.size();
    throw std::invalid_argument(msg.str());
  }
}

void check_rates(const std::vector<double>& rates, const char* what) {
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument(std::string(what) + ": rates must be finite and >= 0");
  }
}

}  // namespace

void validate(const ThinningModel& model, std::size_t groups) {
  if (groups == 0) throw std::invalid_argument("thinning: at least one group required");
  std::visit(overloaded{
                 [&](const BernoulliThinning& m) {
                   if (m.pi.empty()) throw std::invalid_argument("bernoulli thinning: no probabilities");
                   check_length(m.pi, groups, "bernoulli thinning");
                   for (double p : m.pi) {
                     // pi = 0 empties the thinned process at any truncation.
                     if (!(p > 0.0 && p <= 1.0))
                       throw std::invalid_argument("bernoulli thinning: probabilities must lie in (0, 1]");
                   }
                 },
                 [&](const EventuallySingleAtomThinning& m) {
                   if (m.offsets.empty() == m.rates.empty())
                     throw std::invalid_argument("eventually single-atom thinning: give offsets or rates");
                   if (m.random()) {
                     check_length(m.rates, groups, "eventually single-atom thinning");
                     check_rates(m.rates, "eventually single-atom thinning");
                   } else {
                     check_length(m.offsets, groups, "eventually single-atom thinning");
                     for (auto u : m.offsets)
                       if (u < 1) throw std::invalid_argument("eventually single-atom thinning: u_g must be >= 1");
                   }
                 },
                 [&](const DependentBernoulliThinning& m) {
                   if (groups != 2) throw std::invalid_argument("dependent bernoulli thinning requires G = 2");
                   for (double p : {m.p11, m.p10, m.p01, m.p00})
                     if (!(p >= 0.0 && p <= 1.0))
                       throw std::invalid_argument("dependent bernoulli thinning: probabilities must lie in [0, 1]");
                   if (std::abs(m.p11 + m.p10 + m.p01 + m.p00 - 1.0) > 1e-12)
                     throw std::invalid_argument("dependent bernoulli thinning: joint table must sum to 1");
                 },
                 [&](const SymmetricBlockedThinning& m) {
                   if (m.blocks.empty() == m.rates.empty())
                     throw std::invalid_argument("symmetric blocked thinning: give block lengths or rates");
                   const std::size_t n = m.random() ? m.rates.size() : m.blocks.size();
                   if (n != groups + 1)
                     throw std::invalid_argument("symmetric blocked thinning: need G + 1 block entries");
                   if (m.random()) check_rates(m.rates, "symmetric blocked thinning");
                 },
             },
             model);
}

double marginal_one_probability(const ThinningModel& model, std::size_t group) {
  return std::visit(overloaded{
                        [&](const BernoulliThinning& m) -> double {
                          if (m.pi.size() != 1 && group >= m.pi.size())
                            throw std::out_of_range("marginal_one_probability: group index");
                          return broadcast(m.pi, group);
                        },
                        [&](const DependentBernoulliThinning& m) -> double {
                          if (group > 1) throw std::out_of_range("marginal_one_probability: group index");
                          return group == 0 ? m.p11 + m.p10 : m.p11 + m.p01;
                        },
                        [](const auto&) -> double {
                          throw std::domain_error("row-dependent marginal");
                        },
                    },
                    model);
}

ThinningRowGenerator::ThinningRowGenerator(const ThinningModel& model, std::size_t groups, Rng& rng)
    : model_(model), groups_(groups) {
  validate(model_, groups_);
  if (const auto* m = std::get_if<EventuallySingleAtomThinning>(&model_)) {
    counts_.resize(groups_);
    for (std::size_t g = 0; g < groups_; ++g)
      counts_[g] = m->random() ? 1 + draw_poisson(rng, broadcast(m->rates, g)) : broadcast(m->offsets, g);
    prefix_ = *std::max_element(counts_.begin(), counts_.end()) - 1;
  } else if (const auto* b = std::get_if<SymmetricBlockedThinning>(&model_)) {
    counts_.resize(groups_ + 1);
    for (std::size_t r = 0; r <= groups_; ++r) counts_[r] = b->random() ? draw_poisson(rng, b->rates[r]) : b->blocks[r];
    // A shared b_0 prefix with no specific blocks is still "structured"
    // only up to the end of the last block.
    prefix_ = std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
  }
}

void ThinningRowGenerator::next(Rng& rng, std::vector<std::uint8_t>& row) {
  row.assign(groups_, 0);
  const std::size_t j = row_++;  // 0-based row index
  std::visit(overloaded{
                 [&](const BernoulliThinning& m) {
                   for (std::size_t g = 0; g < groups_; ++g) row[g] = draw_bernoulli(rng, broadcast(m.pi, g));
                 },
                 [&](const EventuallySingleAtomThinning&) {
                   // column g is zero for 1-based rows 1..u_g-1
                   for (std::size_t g = 0; g < groups_; ++g) row[g] = (j + 1 >= counts_[g]) ? 1 : 0;
                 },
                 [&](const DependentBernoulliThinning& m) {
                   const double u = uniform01(rng);
                   if (u < m.p11) {
                     row[0] = 1;
                     row[1] = 1;
                   } else if (u < m.p11 + m.p10) {
                     row[0] = 1;
                   } else if (u < m.p11 + m.p10 + m.p01) {
                     row[1] = 1;
                   }
                 },
                 [&](const SymmetricBlockedThinning&) {
                   if (j < counts_[0] || j >= prefix_) {
                     row.assign(groups_, 1);
                     return;
                   }
                   std::size_t start = counts_[0];
                   for (std::size_t g = 0; g < groups_; ++g) {
                     if (j < start + counts_[g + 1]) {
                       row[g] = 1;
                       return;
                     }
                     start += counts_[g + 1];
                   }
                 },
             },
             model_);
}

ThinningSequences sample_thinning(const ThinningModel& model, std::size_t rows, std::size_t groups,
                                  std::uint64_t seed) {
  if (rows == 0) throw std::invalid_argument("sample_thinning: T must be >= 1");
  Rng rng(seed);
  ThinningRowGenerator gen(model, groups, rng);
  // u_g > T, or b_0 + ... + b_G > T
  const bool overflow = std::holds_alternative<EventuallySingleAtomThinning>(model)
                            ? gen.structured_prefix() >= rows
                            : gen.structured_prefix() > rows;
  if (overflow) {
    std::ostringstream msg;
    msg << "sample_thinning: structured layout needs more than " << gen.structured_prefix()
        << " rows but T = " << rows;
    throw UnderTruncationError(msg.str());
  }
  ThinningSequences ell(rows, groups);
  std::vector<std::uint8_t> row;
  for (std::size_t j = 0; j < rows; ++j) {
    gen.next(rng, row);
    for (std::size_t g = 0; g < groups; ++g) ell(j, g) = row[g];
  }
  for (std::size_t g = 0; g < groups; ++g) {
    bool any = false;
    for (std::size_t j = 0; j < rows && !any; ++j) any = ell(j, g) != 0;
    if (!any) throw UnderTruncationError("sample_thinning: column " + std::to_string(g) + " has no ones; increase T");
  }
  return ell;
}

}  // namespace tddp
