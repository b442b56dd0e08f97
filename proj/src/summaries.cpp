#include "tddp/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "tddp/kernels.hpp"
#include "tddp/rng.hpp"

namespace tddp {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<kernels::DrawMixture> group_mixtures(const PosteriorSamples& samples, std::size_t g) {
  std::vector<kernels::DrawMixture> out;
  out.reserve(samples.draws.size());
  for (const auto& d : samples.draws)
    out.push_back({std::span<const double>(d.omega.col(idx(g)).data(), static_cast<std::size_t>(d.omega.rows())),
                   d.mu, d.sigma2});
  return out;
}

}  // namespace

std::vector<double> make_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(hi > lo)) throw std::invalid_argument("make_grid: need >= 2 points and hi > lo");
  std::vector<double> grid(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
  return grid;
}

std::pair<double, double> hpd_interval(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("hpd_interval: no values");
  if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("hpd_interval: level must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9)));
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + m <= n; ++i) {
    const double w = values[i + m - 1] - values[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {values[best], values[best + m - 1]};
}

GridDensity density_estimate(const PosteriorSamples& samples, const std::vector<double>& grid,
                             const DensityOptions& options) {
  if (samples.draws.empty()) throw std::invalid_argument("density_estimate: empty sample set");
  if (samples.draws.size() < options.min_draws)
    throw std::invalid_argument("density_estimate: too few retained draws");
  GridDensity out;
  out.grid = grid;
  out.level = options.level;
  const std::size_t q = samples.draws.size();
  Eigen::MatrixXd values;
  std::vector<double> column(q);
  for (std::size_t g = 0; g < samples.groups; ++g) {
    const auto mixtures = group_mixtures(samples, g);
    if (options.serial)
      kernels::mixture_grid_serial(mixtures, grid, values);
    else
      kernels::mixture_grid(mixtures, grid, values);
    auto& est = out.estimate.emplace_back(grid.size());
    auto& lo = out.lower.emplace_back(grid.size());
    auto& hi = out.upper.emplace_back(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double sum = 0.0;
      for (std::size_t d = 0; d < q; ++d) {
        column[d] = values(idx(i), idx(d));
        sum += column[d];
      }
      est[i] = sum / static_cast<double>(q);
      std::tie(lo[i], hi[i]) = hpd_interval(column, options.level);
    }
  }
  return out;
}

double average_band_length(const GridDensity& density) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < density.lower.size(); ++g)
    for (std::size_t i = 0; i < density.lower[g].size(); ++i, ++n) sum += density.upper[g][i] - density.lower[g][i];
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<std::vector<std::uint32_t>> allocation_draws(const PosteriorSamples& samples, int group) {
  std::vector<std::vector<std::uint32_t>> out;
  out.reserve(samples.draws.size());
  for (const auto& d : samples.draws) {
    if (group >= 0) {
      out.push_back(d.z.at(static_cast<std::size_t>(group)));
    } else {
      auto& all = out.emplace_back();
      for (const auto& zg : d.z) all.insert(all.end(), zg.begin(), zg.end());
    }
  }
  return out;
}

Eigen::MatrixXd psm(const std::vector<std::vector<std::uint32_t>>& draws) { return kernels::similarity(draws); }

std::vector<std::size_t> canonical_labels(std::span<const std::size_t> labels) {
  std::map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], remap.size());
    out[i] = it->second;
  }
  return out;
}

double vi_lower_bound(std::span<const std::size_t> labels, const Eigen::MatrixXd& p) {
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(p.rows()) != n || p.rows() != p.cols())
    throw std::invalid_argument("vi_lower_bound: similarity matrix size mismatch");
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) ++sizes[l];
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double within = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (labels[j] == labels[i]) within += p(idx(i), idx(j));
    loss += std::log2(static_cast<double>(sizes[labels[i]])) - 2.0 * std::log2(within) + std::log2(p.row(idx(i)).sum());
  }
  return loss / static_cast<double>(n);
}

namespace {

// Local search state for the VI lower bound. Only the label-dependent part
// sum_i [log2 |C_i| - 2 log2 S_i], S_i = sum_{j in C_i} P_ij, is tracked.
class VISearch {
 public:
  explicit VISearch(const Eigen::MatrixXd& p) : p_(p), n_(static_cast<std::size_t>(p.rows())) { reset(); }

  void reset() {
    label_.assign(n_, kNone);
    within_.assign(n_, 0.0);
    members_.clear();
    log_sum_.clear();
  }

  void load(std::span<const std::size_t> labels) {
    reset();
    const auto canon = canonical_labels(labels);
    for (std::size_t i = 0; i < n_; ++i) {
      while (members_.size() <= canon[i]) open_cluster();
      add(i, canon[i]);
    }
  }

  // Greedy allocation in random order. Once `max_clusters` clusters are open
  // every further item joins the best existing one.
  void sequential(Rng& rng, std::size_t max_clusters) {
    reset();
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t x : order) place_best(x, kNone, live_clusters().size() >= max_clusters);
  }

  // Reassign items one at a time until no item moves.
  void sweeten(Rng& rng, std::size_t max_sweeps) {
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
      std::shuffle(order.begin(), order.end(), rng);
      bool moved = false;
      for (std::size_t x : order) {
        const std::size_t before = label_[x];
        remove(x);
        const std::size_t after = place_best(x, before);
        moved |= after != before;
      }
      if (!moved) break;
    }
  }

  // Apply the best improving merge while one exists. Returns true if any merge happened.
  bool merge_pass() {
    bool any = false;
    while (merge_best(-1e-12)) any = true;
    return any;
  }

  // Merge the pair with the smallest change below `threshold`, if any.
  bool merge_best(double threshold) {
    {
      const auto live = live_clusters();
      double best = threshold;
      std::pair<std::size_t, std::size_t> pick{kNone, kNone};
      for (std::size_t a = 0; a < live.size(); ++a)
        for (std::size_t b = a + 1; b < live.size(); ++b) {
          const double d = merge_delta(live[a], live[b]);
          if (d < best) {
            best = d;
            pick = {live[a], live[b]};
          }
        }
      if (pick.first == kNone) return false;
      for (std::size_t x : std::vector<std::size_t>(members_[pick.second])) {
        remove(x);
        add(x, pick.first);
      }
      return true;
    }
  }

  std::vector<std::size_t> labels() const { return canonical_labels(label_); }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t open_cluster() {
    for (std::size_t c = 0; c < members_.size(); ++c)
      if (members_[c].empty()) return c;
    members_.emplace_back();
    log_sum_.push_back(0.0);
    return members_.size() - 1;
  }

  std::vector<std::size_t> live_clusters() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < members_.size(); ++c)
      if (!members_[c].empty()) out.push_back(c);
    return out;
  }

  static double size_term(std::size_t m) { return m ? static_cast<double>(m) * std::log2(static_cast<double>(m)) : 0.0; }

  // Change in the tracked objective if x joins cluster c.
  double add_delta(std::size_t x, std::size_t c) const {
    const auto& mem = members_[c];
    if (mem.empty()) return 0.0;  // singleton: log2 1 - 2 log2 P_xx = 0
    double new_log = 0.0;
    double sx = p_(idx(x), idx(x));
    for (std::size_t i : mem) {
      const double pix = p_(idx(i), idx(x));
      new_log += std::log2(within_[i] + pix);
      sx += pix;
    }
    new_log += std::log2(sx);
    return size_term(mem.size() + 1) - 2.0 * new_log - (size_term(mem.size()) - 2.0 * log_sum_[c]);
  }

  double merge_delta(std::size_t a, std::size_t b) const {
    double merged_log = 0.0;
    for (std::size_t i : members_[a]) {
      double s = within_[i];
      for (std::size_t j : members_[b]) s += p_(idx(i), idx(j));
      merged_log += std::log2(s);
    }
    for (std::size_t j : members_[b]) {
      double s = within_[j];
      for (std::size_t i : members_[a]) s += p_(idx(i), idx(j));
      merged_log += std::log2(s);
    }
    const std::size_t na = members_[a].size(), nb = members_[b].size();
    return size_term(na + nb) - 2.0 * merged_log - (size_term(na) - 2.0 * log_sum_[a]) -
           (size_term(nb) - 2.0 * log_sum_[b]);
  }

  void refresh_log_sum(std::size_t c) {
    double s = 0.0;
    for (std::size_t i : members_[c]) s += std::log2(within_[i]);
    log_sum_[c] = s;
  }

  void add(std::size_t x, std::size_t c) {
    double sx = p_(idx(x), idx(x));
    for (std::size_t i : members_[c]) {
      const double pix = p_(idx(i), idx(x));
      within_[i] += pix;
      sx += pix;
    }
    within_[x] = sx;
    members_[c].push_back(x);
    label_[x] = c;
    refresh_log_sum(c);
  }

  void remove(std::size_t x) {
    const std::size_t c = label_[x];
    auto& mem = members_[c];
    mem.erase(std::find(mem.begin(), mem.end(), x));
    for (std::size_t i : mem) within_[i] -= p_(idx(i), idx(x));
    label_[x] = kNone;
    refresh_log_sum(c);
  }

  // Puts x where the objective grows least; `prefer` wins exact ties.
  std::size_t place_best(std::size_t x, std::size_t prefer = kNone, bool existing_only = false) {
    std::size_t best_c = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : live_clusters()) {
      const double d = add_delta(x, c);
      if (d < best - 1e-12 || (std::abs(d - best) <= 1e-12 && c == prefer)) {
        best = d;
        best_c = c;
      }
    }
    if (best_c == kNone || (!existing_only && 0.0 < best - 1e-12)) best_c = open_cluster();
    add(x, best_c);
    return best_c;
  }

  const Eigen::MatrixXd& p_;
  std::size_t n_;
  std::vector<std::size_t> label_;
  std::vector<double> within_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<double> log_sum_;
};

std::size_t cluster_count(const std::vector<std::size_t>& canon) {
  return canon.empty() ? 0 : *std::max_element(canon.begin(), canon.end()) + 1;
}

}  // namespace

PartitionEstimate vi_partition(const Eigen::MatrixXd& similarity, const VIOptions& options) {
  if (similarity.rows() != similarity.cols()) throw std::invalid_argument("vi_partition: matrix must be square");
  const auto n = static_cast<std::size_t>(similarity.rows());
  PartitionEstimate best;
  if (n == 0) return best;
  if (n == 1) return {{0}, vi_lower_bound(std::vector<std::size_t>{0}, similarity)};

  VISearch search(similarity);
  bool have = false;
  auto consider = [&](std::vector<std::size_t> labels) {
    const double loss = vi_lower_bound(labels, similarity);
    if (!have || loss < best.loss - 1e-10 ||
        (std::abs(loss - best.loss) <= 1e-10 && cluster_count(labels) < cluster_count(best.labels))) {
      best = {std::move(labels), loss};
      have = true;
    }
  };
  auto refine = [&](Rng& rng) {
    do {
      search.sweeten(rng, options.max_sweeps);
    } while (search.merge_pass());
    consider(search.labels());
  };

  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = make_rng(options.seed, r);
    const std::size_t cap = r == 0 ? n : 1 + static_cast<std::size_t>(rng() % n);
    search.sequential(rng, cap);
    refine(rng);
  }
  for (std::size_t c = 0; c < options.initial.size(); ++c) {
    if (options.initial[c].size() != n) throw std::invalid_argument("vi_partition: initial partition size mismatch");
    Rng rng = make_rng(options.seed, restarts + c);
    search.load(options.initial[c]);
    refine(rng);
  }
  // Coarsen the best partition one forced merge at a time and refine every level.
  std::vector<std::vector<std::size_t>> levels;
  search.load(best.labels);
  while (search.merge_best(std::numeric_limits<double>::infinity())) levels.push_back(search.labels());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    Rng rng = make_rng(options.seed, restarts + options.initial.size() + l);
    search.load(levels[l]);
    refine(rng);
  }
  return best;
}

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("ari: partitions differ in length");
  const std::size_t n = a.size();
  auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> table;
  std::map<std::size_t, std::size_t> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    ++table[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  long double index = 0.0L, sum_a = 0.0L, sum_b = 0.0L;
  for (const auto& [key, c] : table) index += choose2(static_cast<double>(c));
  for (const auto& [key, c] : rows) sum_a += choose2(static_cast<double>(c));
  for (const auto& [key, c] : cols) sum_b += choose2(static_cast<double>(c));
  const long double total = choose2(static_cast<double>(n));
  const long double num = 2.0L * (index * total - sum_a * sum_b);
  const long double den = (sum_a + sum_b) * total - 2.0L * sum_a * sum_b;
  if (den == 0.0L) {
    // Both partitions trivial (all singletons or one block): agree iff equal.
    return canonical_labels(a) == canonical_labels(b) ? 1.0 : 0.0;
  }
  return static_cast<double>(num / den);
}

double tv_distance(std::span<const double> f, std::span<const double> g, double dx) {
  if (f.size() != g.size()) throw std::invalid_argument("tv_distance: grids differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += std::abs(f[i] - g[i]);
  return std::clamp(0.5 * sum * dx, 0.0, 1.0);
}

GroupSimilarity group_similarity(const PosteriorSamples& samples, const VIOptions& options) {
  if (samples.draws.empty()) throw std::invalid_argument("group_similarity: empty sample set");
  const std::size_t groups = samples.groups;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(idx(groups), idx(groups));
  std::vector<std::vector<std::uint32_t>> occupied(groups);
  for (const auto& d : samples.draws) {
    for (std::size_t g = 0; g < groups; ++g) {
      occupied[g] = d.z[g];
      std::sort(occupied[g].begin(), occupied[g].end());
      occupied[g].erase(std::unique(occupied[g].begin(), occupied[g].end()), occupied[g].end());
    }
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t h = 0; h < groups; ++h) m(idx(g), idx(h)) += occupied[g] == occupied[h];
  }
  m /= static_cast<double>(samples.draws.size());
  GroupSimilarity out{m, {}};
  out.partition = vi_partition(m, options);
  return out;
}

Eigen::MatrixXd pairwise_tv(const PosteriorSamples& samples, const std::vector<double>& grid) {
  if (samples.draws.empty()) throw std::invalid_argument("pairwise_tv: empty sample set");
  const std::size_t groups = samples.groups;
  const std::size_t q = samples.draws.size();
  const double dx = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
  std::vector<Eigen::MatrixXd> per_group(groups);
  for (std::size_t g = 0; g < groups; ++g) kernels::mixture_grid(group_mixtures(samples, g), grid, per_group[g]);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(idx(groups), idx(groups));
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t h = g + 1; h < groups; ++h) {
      double sum = 0.0;
      for (std::size_t d = 0; d < q; ++d) {
        const auto& fg = per_group[g];
        const auto& fh = per_group[h];
        sum += tv_distance(std::span<const double>(fg.col(idx(d)).data(), grid.size()),
                           std::span<const double>(fh.col(idx(d)).data(), grid.size()), dx);
      }
      out(idx(g), idx(h)) = out(idx(h), idx(g)) = sum / static_cast<double>(q);
    }
  return out;
}

}  // namespace tddp
