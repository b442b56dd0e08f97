#include "tddp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tddp/error.hpp"
#include "tddp/kernels.hpp"

namespace tddp {
namespace {

constexpr double kSigma2Floor = 1e-10;
constexpr double kStickFloor = 1e-12;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Sum_{h > k, h < K} n_{h,g} for every k, per group: later(k, g).
Eigen::MatrixXi later_counts(const GibbsState& s) {
  const std::size_t t = s.truncation();
  Eigen::MatrixXi later = Eigen::MatrixXi::Zero(idx(t), idx(s.groups()));
  for (std::size_t g = 0; g < s.groups(); ++g) {
    int running = 0;
    for (std::size_t k = t; k-- > 0;) {
      later(idx(k), idx(g)) = running;
      running += s.counts(idx(k), idx(g));
    }
  }
  return later;
}

void recompute_weights(GibbsState& s) { s.omega = thinned_weights(s.v, s.ell); }

bool state_is_finite(const GibbsState& s) {
  for (double v : s.v)
    if (!std::isfinite(v)) return false;
  for (const auto& a : s.atoms)
    if (!std::isfinite(a.mu) || !std::isfinite(a.sigma2)) return false;
  for (double p : s.pi)
    if (!std::isfinite(p)) return false;
  return s.omega.allFinite();
}

}  // namespace

std::size_t GroupedDataset::total() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

double GroupedDataset::mean() const {
  double sum = 0.0;
  for (const auto& g : groups) sum = std::accumulate(g.begin(), g.end(), sum);
  return sum / static_cast<double>(total());
}

double GroupedDataset::sd() const {
  const double m = mean();
  double ss = 0.0;
  for (const auto& g : groups)
    for (double y : g) ss += (y - m) * (y - m);
  return std::sqrt(ss / static_cast<double>(total() - 1));
}

double GroupedDataset::min() const {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& g : groups)
    for (double y : g) out = std::min(out, y);
  return out;
}

double GroupedDataset::max() const {
  double out = -std::numeric_limits<double>::infinity();
  for (const auto& g : groups)
    for (double y : g) out = std::max(out, y);
  return out;
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::thinned:
      return "thinned";
    case Mode::complete_pooling:
      return "complete_pooling";
    case Mode::no_pooling:
      return "no_pooling";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  if (name == "thinned") return Mode::thinned;
  if (name == "complete_pooling") return Mode::complete_pooling;
  if (name == "no_pooling") return Mode::no_pooling;
  throw std::invalid_argument("unknown model '" + name + "' (thinned, complete_pooling, no_pooling)");
}

ModelConfig ModelConfig::defaults_for(const GroupedDataset& data, Mode mode) {
  ModelConfig c;
  c.mode = mode;
  if (data.total() > 0) c.dp.mu0 = data.mean();
  return c;
}

void ModelConfig::validate() const {
  dp.validate();
  if (truncation < 2) throw std::invalid_argument("model config: truncation must be >= 2");
  if (!(a_pi > 0.0) || !(b_pi > 0.0)) throw std::invalid_argument("model config: a_pi, b_pi must be > 0");
}

void GibbsState::recount() {
  counts = Eigen::MatrixXi::Zero(idx(truncation()), idx(groups()));
  for (std::size_t g = 0; g < groups(); ++g)
    for (std::size_t k : z[g]) ++counts(idx(k), idx(g));
}

std::size_t GibbsState::last_occupied() const {
  for (std::size_t k = truncation(); k-- > 0;)
    if (counts.row(idx(k)).any()) return k + 1;
  return 0;
}

void GibbsState::check_invariants() const {
  Eigen::MatrixXi fresh = Eigen::MatrixXi::Zero(counts.rows(), counts.cols());
  for (std::size_t g = 0; g < groups(); ++g)
    for (std::size_t k : z[g]) {
      if (k >= truncation()) throw std::logic_error("gibbs state: allocation beyond truncation");
      if (!ell(idx(k), idx(g))) throw std::logic_error("gibbs state: observation allocated to a thinned component");
      ++fresh(idx(k), idx(g));
    }
  if (fresh != counts) throw std::logic_error("gibbs state: occupancy counts out of date");
  for (Eigen::Index k = 0; k < counts.rows(); ++k)
    for (Eigen::Index g = 0; g < counts.cols(); ++g)
      if (counts(k, g) > 0 && !ell(k, g)) throw std::logic_error("gibbs state: occupied component has l = 0");
}

double thinning_conditional(double v_k, std::size_t later, double pi_g) {
  // D^{-1} (1 - v_k)^m pi_g with D = (1 - v_k)^m pi_g + 1 - pi_g
  const double kept = std::exp(static_cast<double>(later) * std::log1p(-v_k)) * pi_g;
  return kept / (kept + 1.0 - pi_g);
}

GibbsState initialize_state(const GroupedDataset& data, const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t t = config.truncation;
  const std::size_t groups = data.group_count();
  GibbsState s;
  s.fixed_thinning = config.mode != Mode::thinned;
  s.z.resize(groups);
  const std::size_t bins = std::min<std::size_t>(10, t);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& y = data.groups[g];
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    s.z[g].resize(y.size());
    const std::size_t used = std::min(bins, std::max<std::size_t>(y.size(), 1));
    for (std::size_t r = 0; r < order.size(); ++r) s.z[g][order[r]] = r * used / y.size();
  }
  s.v.resize(t);
  for (auto& v : s.v) v = std::clamp(draw_beta_one(rng, config.dp.alpha), kStickFloor, 1.0 - kStickFloor);
  s.ell = ThinningSequences::Ones(idx(t), idx(groups));
  s.pi.assign(groups, s.fixed_thinning ? 1.0 : config.a_pi / (config.a_pi + config.b_pi));
  s.atoms.resize(t);
  s.recount();
  update_kernel_params(s, data, config, rng);
  recompute_weights(s);
  return s;
}

void update_thinning(GibbsState& s, const ModelConfig& /*config*/, Rng& rng) {
  if (s.fixed_thinning) return;
  const std::size_t last = s.last_occupied();
  const Eigen::MatrixXi later = later_counts(s);
  // k = K, K-1, ..., 1. `later` only involves counts above k, which this
  // sweep does not change.
  for (std::size_t k = last; k-- > 0;) {
    for (std::size_t g = 0; g < s.groups(); ++g) {
      if (s.counts(idx(k), idx(g)) > 0) {
        s.ell(idx(k), idx(g)) = 1;
        continue;
      }
      const double p = thinning_conditional(s.v[k], static_cast<std::size_t>(later(idx(k), idx(g))), s.pi[g]);
      s.ell(idx(k), idx(g)) = draw_bernoulli(rng, p);
    }
  }
  for (std::size_t k = last; k < s.truncation(); ++k)
    for (std::size_t g = 0; g < s.groups(); ++g) s.ell(idx(k), idx(g)) = draw_bernoulli(rng, s.pi[g]);
}

void update_sticks(GibbsState& s, const ModelConfig& config, Rng& rng) {
  const Eigen::MatrixXi later = later_counts(s);
  for (std::size_t k = 0; k < s.truncation(); ++k) {
    double a = 1.0;
    double b = config.dp.alpha;
    for (std::size_t g = 0; g < s.groups(); ++g) {
      a += s.counts(idx(k), idx(g));
      if (s.ell(idx(k), idx(g))) b += later(idx(k), idx(g));
    }
    s.v[k] = std::clamp(a == 1.0 ? draw_beta_one(rng, b) : draw_beta(rng, a, b), kStickFloor, 1.0 - kStickFloor);
  }
  recompute_weights(s);
}

namespace {
template <class Kernel>
void allocate_with(GibbsState& s, const GroupedDataset& data, Rng& rng, Kernel kernel) {
  const std::uint64_t key = rng();
  kernels::AllocationModel model{&s.atoms, &s.omega, &s.ell};
  kernel(data.groups, model, key, s.z);
  s.recount();
}
}  // namespace

void update_allocations(GibbsState& s, const GroupedDataset& data, Rng& rng) {
  allocate_with(s, data, rng, kernels::allocate);
}

void update_allocations_serial(GibbsState& s, const GroupedDataset& data, Rng& rng) {
  allocate_with(s, data, rng, kernels::allocate_serial);
}

void update_kernel_params(GibbsState& s, const GroupedDataset& data, const ModelConfig& config, Rng& rng) {
  const std::size_t t = s.truncation();
  const auto& dp = config.dp;
  std::vector<double> n(t, 0.0), sum(t, 0.0), ss(t, 0.0);
  for (std::size_t g = 0; g < s.groups(); ++g)
    for (std::size_t i = 0; i < s.z[g].size(); ++i) {
      n[s.z[g][i]] += 1.0;
      sum[s.z[g][i]] += data.groups[g][i];
    }
  for (std::size_t g = 0; g < s.groups(); ++g)
    for (std::size_t i = 0; i < s.z[g].size(); ++i) {
      const std::size_t k = s.z[g][i];
      const double d = data.groups[g][i] - sum[k] / n[k];
      ss[k] += d * d;
    }
  for (std::size_t k = 0; k < t; ++k) {
    const double mean = n[k] > 0.0 ? sum[k] / n[k] : 0.0;
    const double shape = dp.gamma0 + 0.5 * n[k];
    const double rate =
        dp.lambda0 + 0.5 * (ss[k] + dp.tau0 * n[k] * (mean - dp.mu0) * (mean - dp.mu0) / (dp.tau0 + n[k]));
    const double sigma2 = std::max(1.0 / draw_gamma(rng, shape, rate), kSigma2Floor);
    const double location = (dp.tau0 * dp.mu0 + sum[k]) / (dp.tau0 + n[k]);
    s.atoms[k] = {draw_normal(rng, location, std::sqrt(sigma2 / (dp.tau0 + n[k]))), sigma2};
  }
}

void update_thinning_probs(GibbsState& s, const ModelConfig& config, Rng& rng) {
  if (s.fixed_thinning) return;
  const auto t = static_cast<double>(s.truncation());
  for (std::size_t g = 0; g < s.groups(); ++g) {
    const double ones = s.ell.col(idx(g)).cast<double>().sum();
    s.pi[g] = draw_beta(rng, config.a_pi + ones, config.b_pi + t - ones);
  }
}

namespace {

void record(const GibbsState& s, Draw& d) {
  d.z.resize(s.groups());
  for (std::size_t g = 0; g < s.groups(); ++g) d.z[g].assign(s.z[g].begin(), s.z[g].end());
  d.omega = s.omega;
  d.mu.resize(s.truncation());
  d.sigma2.resize(s.truncation());
  for (std::size_t k = 0; k < s.truncation(); ++k) {
    d.mu[k] = s.atoms[k].mu;
    d.sigma2[k] = s.atoms[k].sigma2;
  }
  d.pi = s.pi;
  d.ell = s.ell;
}

// One chain over `data` with the state invariants of `config.mode`.
std::vector<Draw> sample(const GroupedDataset& data, const ModelConfig& config, const ChainOptions& opt,
                         std::uint64_t seed) {
  Rng rng(seed);
  GibbsState s = initialize_state(data, config, rng);
  std::vector<Draw> draws;
  draws.reserve((opt.iterations - opt.burn_in + opt.thin - 1) / opt.thin);
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    update_thinning(s, config, rng);
    update_sticks(s, config, rng);
    if (data.total() > 0) update_allocations(s, data, rng);
    update_kernel_params(s, data, config, rng);
    update_thinning_probs(s, config, rng);
    if (!state_is_finite(s)) {
      std::ostringstream msg;
      msg << "gibbs sampler: non-finite state at iteration " << it;
      throw NumericalError(msg.str());
    }
#ifndef NDEBUG
    s.check_invariants();
#else
    if (opt.audit_every > 0 && it % opt.audit_every == 0) s.check_invariants();
#endif
    if (it >= opt.burn_in && (it - opt.burn_in) % opt.thin == 0) record(s, draws.emplace_back());
  }
  return draws;
}

}  // namespace

PosteriorSamples run_chain(const GroupedDataset& data, const ModelConfig& config, const ChainOptions& opt) {
  config.validate();
  if (opt.burn_in >= opt.iterations) throw std::invalid_argument("run_chain: burn_in must be < iterations");
  if (opt.thin < 1) throw std::invalid_argument("run_chain: thin must be >= 1");
  if (data.group_count() == 0) throw std::invalid_argument("run_chain: no groups");
  for (const auto& g : data.groups)
    for (double y : g)
      if (!std::isfinite(y)) throw DataError("run_chain: non-finite observation");

  PosteriorSamples out;
  out.mode = config.mode;
  out.groups = data.group_count();
  out.seed = opt.seed;
  out.iterations = opt.iterations;
  out.burn_in = opt.burn_in;
  out.thin = opt.thin;
  const std::size_t t = config.truncation;
  const std::size_t groups = data.group_count();

  switch (config.mode) {
    case Mode::thinned: {
      out.components = t;
      out.draws = sample(data, config, opt, opt.seed);
      break;
    }
    case Mode::complete_pooling: {
      // One DP mixture over the merged sample; every group shares its weights.
      GroupedDataset pooled;
      pooled.groups.resize(1);
      for (const auto& g : data.groups) pooled.groups[0].insert(pooled.groups[0].end(), g.begin(), g.end());
      auto merged = sample(pooled, config, opt, opt.seed);
      out.components = t;
      out.draws.resize(merged.size());
      for (std::size_t q = 0; q < merged.size(); ++q) {
        auto& src = merged[q];
        auto& d = out.draws[q];
        d.z.resize(groups);
        std::size_t offset = 0;
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t n = data.groups[g].size();
          d.z[g].assign(src.z[0].begin() + static_cast<std::ptrdiff_t>(offset),
                        src.z[0].begin() + static_cast<std::ptrdiff_t>(offset + n));
          offset += n;
        }
        d.omega = src.omega.replicate(1, static_cast<Eigen::Index>(groups));
        d.mu = std::move(src.mu);
        d.sigma2 = std::move(src.sigma2);
        d.pi.assign(groups, 1.0);
        d.ell = ThinningSequences::Ones(idx(t), idx(groups));
      }
      break;
    }
    case Mode::no_pooling: {
      // Independent DP mixtures; group g's chain uses stream derive_seed(seed, g).
      std::vector<std::vector<Draw>> chains(groups);
      std::exception_ptr failure;
      const auto count = static_cast<long long>(groups);
#pragma omp parallel for schedule(dynamic, 1)
      for (long long gg = 0; gg < count; ++gg) {
        const auto g = static_cast<std::size_t>(gg);
        try {
          GroupedDataset single;
          single.groups = {data.groups[g]};
          chains[g] = sample(single, config, opt, derive_seed(opt.seed, g));
        } catch (...) {
#pragma omp critical(tddp_no_pooling_failure)
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);
      const std::size_t k_total = groups * t;
      out.components = k_total;
      const std::size_t q_count = chains.front().size();
      out.draws.resize(q_count);
      for (std::size_t q = 0; q < q_count; ++q) {
        auto& d = out.draws[q];
        d.z.resize(groups);
        d.omega = Eigen::MatrixXd::Zero(idx(k_total), idx(groups));
        d.ell = ThinningSequences::Zero(idx(k_total), idx(groups));
        d.mu.resize(k_total);
        d.sigma2.resize(k_total);
        d.pi.assign(groups, 1.0);
        for (std::size_t g = 0; g < groups; ++g) {
          const auto& src = chains[g][q];
          const auto base = static_cast<std::uint32_t>(g * t);
          d.z[g].resize(src.z[0].size());
          for (std::size_t i = 0; i < src.z[0].size(); ++i) d.z[g][i] = base + src.z[0][i];
          d.omega.block(idx(g * t), idx(g), idx(t), 1) = src.omega;
          d.ell.block(idx(g * t), idx(g), idx(t), 1) = src.ell;
          std::copy(src.mu.begin(), src.mu.end(), d.mu.begin() + static_cast<std::ptrdiff_t>(g * t));
          std::copy(src.sigma2.begin(), src.sigma2.end(), d.sigma2.begin() + static_cast<std::ptrdiff_t>(g * t));
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace tddp
