#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tddp/mcmc.hpp"
#include "tddp/summaries.hpp"

namespace tddp::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Finite Gaussian mixture with a common component variance.
struct MixtureSpec {
  std::vector<double> means;
  std::vector<double> probs;
  double variance = 0.6;

  double density(double x) const;
};

/// Means (-5, 0, 5), probabilities (0.5, 0.25, 0.25), variance 0.6.
MixtureSpec mixture_a();
/// Means (5, 10), probabilities (0.4, 0.6), variance 0.6.
MixtureSpec mixture_b();

struct Scenario {
  std::string name;
  std::vector<std::size_t> sizes;
  /// "A" or "B" per group. Empty means the first ceil(G/2) groups use A.
  std::vector<std::string> generators;

  std::size_t groups() const { return sizes.size(); }
  std::vector<MixtureSpec> mixtures() const;
};

struct McmcSettings {
  std::size_t iterations = 3000;
  std::size_t burn_in = 2000;
  std::size_t thin = 1;
  std::size_t truncation = 100;
  double alpha = 1.0;
  double tau0 = 0.01;
  double gamma0 = 2.5;
  double lambda0 = 1.5;
  double a_pi = 3.0;
  double b_pi = 3.0;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::vector<Scenario> scenarios;
  std::size_t replications = 1;
  std::uint64_t seed = 1;
  std::vector<Mode> models{Mode::thinned, Mode::complete_pooling, Mode::no_pooling};
  McmcSettings mcmc;
  std::size_t grid_points = 300;
  /// Replications 0..density_replications-1 also write their density grids.
  std::size_t density_replications = 1;
  std::size_t vi_restarts = 16;
  /// OpenMP threads for the replication pool; 0 keeps the runtime default.
  std::size_t workers = 0;

  void validate() const;
};

/// Throws DataError on unknown keys, wrong types or a schema_version mismatch.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& config);
ScenarioConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a of the text.
std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t value);

struct SimulatedData {
  GroupedDataset data;
  std::vector<std::vector<std::size_t>> truth;  // generating component per observation
  std::vector<MixtureSpec> generators;

  double true_density(std::size_t group, double x) const { return generators.at(group).density(x); }
};

SimulatedData generate_dataset(const Scenario& scenario, std::size_t replication, std::uint64_t seed);

/// `points` values over [min(y) - 3 sd(y), max(y) + 3 sd(y)].
std::vector<double> default_grid(const GroupedDataset& data, std::size_t points);

ModelConfig model_config(const GroupedDataset& data, const McmcSettings& settings, Mode mode);

struct FitMetrics {
  std::vector<double> group_ari;
  std::vector<double> group_tv;
  double average_ari = 0.0;
  double mean_tv = 0.0;
  double hpd_length = 0.0;
};

/// Group-wise ARI of the VI partition against the truth, TV of the density
/// estimate against the generating density, and average HPD band length.
FitMetrics evaluate_fit(const SimulatedData& sim, const PosteriorSamples& samples, const GridDensity& density,
                        const VIOptions& vi);

struct ReplicationRecord {
  std::size_t scenario = 0;
  std::size_t replication = 0;
  Mode model = Mode::thinned;
  bool ok = false;
  std::string error;
  FitMetrics metrics;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::vector<ReplicationRecord> records;  // scenario, replication, model order
  std::size_t failures = 0;
};

/// Runs every (scenario, replication, model) fit and writes metrics.csv,
/// per_group.csv, densities.csv, failures.csv, timings.csv and manifest.json
/// into `out`. Only timings.csv and manifest.json carry wall-clock values.
ExperimentResult run_experiment(const ScenarioConfig& config, const std::filesystem::path& out,
                                std::ostream* log = nullptr);

/// Reads a `group,y` CSV. Groups map to 0..G-1 in first-appearance order.
/// Throws DataError naming the offending line.
GroupedDataset read_grouped_csv(std::istream& in);
GroupedDataset read_grouped_csv(const std::filesystem::path& path);

struct FitOptions {
  Mode mode = Mode::thinned;
  ChainOptions chain;
  std::optional<std::size_t> truncation;
  std::optional<double> alpha;
  std::size_t grid_points = 300;
  std::optional<double> grid_lo;
  std::optional<double> grid_hi;
  double level = 0.95;
  std::size_t vi_restarts = 16;
  bool write_draws = false;

  /// 10000 iterations, 5000 burn-in, T = 300.
  void apply_application_defaults();
};

/// Fits the model to a grouped CSV and writes density.csv, psm_global.csv,
/// psm_group_<g>.csv, partition.csv, group_similarity.csv,
/// group_partition.csv, tv_pairwise.csv and manifest.json (plus draws_*.csv
/// when requested).
PosteriorSamples fit_csv(const std::filesystem::path& input, const FitOptions& options,
                         const std::filesystem::path& out);
PosteriorSamples fit_dataset(const GroupedDataset& data, const FitOptions& options,
                             const std::filesystem::path& out, const std::string& source = "");

enum class PriorVariant { bernoulli, poisson };

struct PriorMcRequest {
  PriorVariant variant = PriorVariant::bernoulli;
  std::vector<double> values;      // pi (bernoulli) or lambda (poisson)
  std::vector<std::size_t> sizes;  // n1 = n2 = n
  double alpha = 1.0;
  std::size_t replications = 1000;
  std::size_t truncation = 1000;
  std::uint64_t seed = 1;
};

/// Writes one CSV row per (value, n) with the four estimates, their standard
/// errors and the pooled / independent bounds.
void prior_mc(const PriorMcRequest& request, std::ostream& out);

}  // namespace tddp::harness
