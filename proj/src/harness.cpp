#include "tddp/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "tddp/analytics.hpp"
#include "tddp/error.hpp"
#include "tddp/rng.hpp"
#include "tddp/sticks.hpp"

namespace tddp::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Shortest round-trip text for a double; identical input gives identical bytes.
std::string num(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json versions() {
  return {{"tddp", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"openmp", _OPENMP}};
}

void write_matrix(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << num(m(i, j));
    out << '\n';
  }
}

void write_labelled_matrix(const fs::path& path, const Eigen::MatrixXd& m, const std::vector<std::string>& labels) {
  auto out = open_out(path);
  out << "group";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << num(m(i, j));
    out << '\n';
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end())
      throw DataError("config: unknown key '" + key + "' in " + where);
}

std::size_t mode_index(Mode mode) { return static_cast<std::size_t>(mode); }

}  // namespace

double MixtureSpec::density(double x) const {
  double s = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double d = x - means[k];
    s += probs[k] * std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
  }
  return s;
}

MixtureSpec mixture_a() { return {{-5.0, 0.0, 5.0}, {0.5, 0.25, 0.25}, 0.6}; }
MixtureSpec mixture_b() { return {{5.0, 10.0}, {0.4, 0.6}, 0.6}; }

std::vector<MixtureSpec> Scenario::mixtures() const {
  std::vector<MixtureSpec> out;
  const std::size_t g = groups();
  for (std::size_t i = 0; i < g; ++i) {
    const std::string which = generators.empty() ? (i < (g + 1) / 2 ? "A" : "B") : generators[i];
    if (which == "A")
      out.push_back(mixture_a());
    else if (which == "B")
      out.push_back(mixture_b());
    else
      throw DataError("scenario " + name + ": generator must be \"A\" or \"B\"");
  }
  return out;
}

void ScenarioConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw DataError("config: schema_version " + std::to_string(schema_version) + " is not supported");
  if (scenarios.empty()) throw DataError("config: no scenarios");
  for (const auto& s : scenarios) {
    if (s.sizes.empty()) throw DataError("scenario " + s.name + ": no groups");
    for (auto n : s.sizes)
      if (n == 0) throw DataError("scenario " + s.name + ": sizes must be positive");
    if (!s.generators.empty() && s.generators.size() != s.sizes.size())
      throw DataError("scenario " + s.name + ": generators and sizes differ in length");
    (void)s.mixtures();
  }
  if (replications < 1) throw DataError("config: replications must be >= 1");
  if (models.empty()) throw DataError("config: no models");
  if (mcmc.burn_in >= mcmc.iterations) throw DataError("config: burn_in must be < iterations");
  if (mcmc.thin < 1) throw DataError("config: thin must be >= 1");
  if (mcmc.truncation < 2) throw DataError("config: truncation must be >= 2");
  if (grid_points < 2) throw DataError("config: grid_points must be >= 2");
}

ScenarioConfig config_from_json(const json& j) {
  try {
    if (!j.is_object()) throw DataError("config: top level must be an object");
    reject_unknown(j,
                   {"schema_version", "scenarios", "replications", "seed", "models", "mcmc", "grid_points",
                    "density_replications", "vi_restarts", "workers"},
                   "top level");
    if (!j.contains("schema_version")) throw DataError("config: missing schema_version");
    ScenarioConfig c;
    c.schema_version = j.at("schema_version").get<int>();
    for (const auto& s : j.at("scenarios")) {
      reject_unknown(s, {"name", "sizes", "generators"}, "scenario");
      Scenario sc;
      sc.name = s.at("name").get<std::string>();
      sc.sizes = s.at("sizes").get<std::vector<std::size_t>>();
      sc.generators = get_or(s, "generators", std::vector<std::string>{});
      c.scenarios.push_back(std::move(sc));
    }
    c.replications = get_or(j, "replications", c.replications);
    c.seed = get_or(j, "seed", c.seed);
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) c.models.push_back(parse_mode(m.get<std::string>()));
    }
    if (j.contains("mcmc")) {
      const auto& m = j.at("mcmc");
      reject_unknown(m,
                     {"iterations", "burn_in", "thin", "truncation", "alpha", "tau0", "gamma0", "lambda0", "a_pi",
                      "b_pi"},
                     "mcmc");
      auto& s = c.mcmc;
      s.iterations = get_or(m, "iterations", s.iterations);
      s.burn_in = get_or(m, "burn_in", s.burn_in);
      s.thin = get_or(m, "thin", s.thin);
      s.truncation = get_or(m, "truncation", s.truncation);
      s.alpha = get_or(m, "alpha", s.alpha);
      s.tau0 = get_or(m, "tau0", s.tau0);
      s.gamma0 = get_or(m, "gamma0", s.gamma0);
      s.lambda0 = get_or(m, "lambda0", s.lambda0);
      s.a_pi = get_or(m, "a_pi", s.a_pi);
      s.b_pi = get_or(m, "b_pi", s.b_pi);
    }
    c.grid_points = get_or(j, "grid_points", c.grid_points);
    c.density_replications = get_or(j, "density_replications", c.density_replications);
    c.vi_restarts = get_or(j, "vi_restarts", c.vi_restarts);
    c.workers = get_or(j, "workers", c.workers);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

json config_to_json(const ScenarioConfig& c) {
  json scenarios = json::array();
  for (const auto& s : c.scenarios) {
    std::vector<std::string> gens;
    const std::size_t g = s.groups();
    for (std::size_t i = 0; i < g; ++i)
      gens.push_back(s.generators.empty() ? (i < (g + 1) / 2 ? "A" : "B") : s.generators[i]);
    scenarios.push_back({{"name", s.name}, {"sizes", s.sizes}, {"generators", gens}});
  }
  json models = json::array();
  for (auto m : c.models) models.push_back(to_string(m));
  const auto& m = c.mcmc;
  return {{"schema_version", c.schema_version},
          {"scenarios", scenarios},
          {"replications", c.replications},
          {"seed", c.seed},
          {"models", models},
          {"mcmc",
           {{"iterations", m.iterations},
            {"burn_in", m.burn_in},
            {"thin", m.thin},
            {"truncation", m.truncation},
            {"alpha", m.alpha},
            {"tau0", m.tau0},
            {"gamma0", m.gamma0},
            {"lambda0", m.lambda0},
            {"a_pi", m.a_pi},
            {"b_pi", m.b_pi}}},
          {"grid_points", c.grid_points},
          {"density_replications", c.density_replications},
          {"vi_restarts", c.vi_restarts},
          {"workers", c.workers}};
}

ScenarioConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

SimulatedData generate_dataset(const Scenario& scenario, std::size_t replication, std::uint64_t seed) {
  SimulatedData sim;
  sim.generators = scenario.mixtures();
  Rng rng = make_rng(seed, replication);
  const std::size_t groups = scenario.groups();
  sim.data.groups.resize(groups);
  sim.truth.resize(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    sim.data.labels.push_back(std::to_string(g + 1));
    const auto& mix = sim.generators[g];
    const double sd = std::sqrt(mix.variance);
    for (std::size_t i = 0; i < scenario.sizes[g]; ++i) {
      const double u = uniform01(rng);
      std::size_t k = 0;
      double cum = mix.probs[0];
      while (u >= cum && k + 1 < mix.probs.size()) cum += mix.probs[++k];
      sim.truth[g].push_back(k);
      sim.data.groups[g].push_back(draw_normal(rng, mix.means[k], sd));
    }
  }
  return sim;
}

std::vector<double> default_grid(const GroupedDataset& data, std::size_t points) {
  const double sd = data.total() > 1 ? data.sd() : 1.0;
  return make_grid(data.min() - 3.0 * sd, data.max() + 3.0 * sd, points);
}

ModelConfig model_config(const GroupedDataset& data, const McmcSettings& s, Mode mode) {
  ModelConfig c = ModelConfig::defaults_for(data, mode);
  c.dp.alpha = s.alpha;
  c.dp.tau0 = s.tau0;
  c.dp.gamma0 = s.gamma0;
  c.dp.lambda0 = s.lambda0;
  c.a_pi = s.a_pi;
  c.b_pi = s.b_pi;
  c.truncation = s.truncation;
  return c;
}

FitMetrics evaluate_fit(const SimulatedData& sim, const PosteriorSamples& samples, const GridDensity& density,
                        const VIOptions& vi) {
  FitMetrics m;
  const std::size_t groups = sim.data.group_count();
  const double dx = density.spacing();
  for (std::size_t g = 0; g < groups; ++g) {
    const auto estimate = vi_partition(psm(allocation_draws(samples, static_cast<int>(g))), vi);
    m.group_ari.push_back(ari(estimate.labels, sim.truth[g]));
    std::vector<double> truth(density.grid.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = sim.true_density(g, density.grid[i]);
    m.group_tv.push_back(tv_distance(density.estimate[g], truth, dx));
  }
  for (std::size_t g = 0; g < groups; ++g) {
    m.average_ari += m.group_ari[g] / static_cast<double>(groups);
    m.mean_tv += m.group_tv[g] / static_cast<double>(groups);
  }
  m.hpd_length = average_band_length(density);
  return m;
}

namespace {

void check_ranges(const FitMetrics& m) {
  auto bad = [](double x, double lo, double hi) { return !std::isfinite(x) || x < lo || x > hi; };
  for (double a : m.group_ari)
    if (bad(a, -1.0, 1.0)) throw std::logic_error("metric out of range: ARI " + num(a));
  for (double t : m.group_tv)
    if (bad(t, 0.0, 1.0)) throw std::logic_error("metric out of range: TV " + num(t));
  if (bad(m.hpd_length, 0.0, std::numeric_limits<double>::max()))
    throw std::logic_error("metric out of range: HPD length " + num(m.hpd_length));
}

struct TaskOutput {
  std::vector<ReplicationRecord> records;
  std::vector<std::vector<double>> grids;  // per model when densities are kept
  std::vector<GridDensity> densities;
  SimulatedData sim;
};

}  // namespace

ExperimentResult run_experiment(const ScenarioConfig& config, const fs::path& out, std::ostream* log) {
  config.validate();
  fs::create_directories(out);
  const auto started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t tasks = config.scenarios.size() * config.replications;
  std::vector<TaskOutput> results(tasks);
  const int saved_threads = omp_get_max_threads();
  if (config.workers > 0) omp_set_num_threads(static_cast<int>(config.workers));

#pragma omp parallel for schedule(dynamic, 1)
  for (long long tt = 0; tt < static_cast<long long>(tasks); ++tt) {
    const auto task = static_cast<std::size_t>(tt);
    const std::size_t s = task / config.replications;
    const std::size_t r = task % config.replications;
    const auto& scenario = config.scenarios[s];
    const std::uint64_t scenario_seed = derive_seed(config.seed, s);
    auto& res = results[task];
    res.sim = generate_dataset(scenario, r, scenario_seed);
    const auto grid = default_grid(res.sim.data, config.grid_points);
    const bool keep = r < config.density_replications;
    for (Mode mode : config.models) {
      ReplicationRecord rec;
      rec.scenario = s;
      rec.replication = r;
      rec.model = mode;
      const auto start = std::chrono::steady_clock::now();
      try {
        ChainOptions chain;
        chain.iterations = config.mcmc.iterations;
        chain.burn_in = config.mcmc.burn_in;
        chain.thin = config.mcmc.thin;
        chain.seed = derive_seed(derive_seed(scenario_seed, r), 1 + mode_index(mode));
        const auto samples = run_chain(res.sim.data, model_config(res.sim.data, config.mcmc, mode), chain);
        DensityOptions dopt;
        dopt.min_draws = 1;
        auto density = density_estimate(samples, grid, dopt);
        VIOptions vi;
        vi.restarts = config.vi_restarts;
        vi.seed = chain.seed;
        rec.metrics = evaluate_fit(res.sim, samples, density, vi);
        check_ranges(rec.metrics);
        rec.ok = true;
        if (keep) res.densities.push_back(std::move(density));
      } catch (const std::exception& e) {
        rec.error = e.what();
        if (keep) res.densities.emplace_back();
      }
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      res.records.push_back(std::move(rec));
    }
    if (log) {
#pragma omp critical(tddp_harness_log)
      *log << "scenario " << scenario.name << " replication " << r + 1 << "/" << config.replications << " done\n";
    }
  }
  omp_set_num_threads(saved_threads);

  ExperimentResult result;
  auto metrics = open_out(out / "metrics.csv");
  auto per_group = open_out(out / "per_group.csv");
  auto timings = open_out(out / "timings.csv");
  auto failures = open_out(out / "failures.csv");
  auto densities = open_out(out / "densities.csv");
  metrics << "scenario,groups,n,model,replication,average_ari,mean_tv,hpd_length\n";
  per_group << "scenario,model,replication,group,n,ari,tv\n";
  timings << "scenario,model,replication,seconds\n";
  failures << "scenario,model,replication,message\n";
  densities << "scenario,model,replication,group,x,estimate,lower,upper,truth\n";
  for (auto& res : results) {
    for (std::size_t m = 0; m < res.records.size(); ++m) {
      const auto& rec = res.records[m];
      const auto& scenario = config.scenarios[rec.scenario];
      const char* model = to_string(rec.model);
      const std::size_t rep = rec.replication + 1;
      std::size_t n = 0;
      for (auto v : scenario.sizes) n += v;
      timings << scenario.name << ',' << model << ',' << rep << ',' << num(rec.seconds) << '\n';
      if (!rec.ok) {
        ++result.failures;
        std::string msg = rec.error;
        std::replace(msg.begin(), msg.end(), '"', '\'');
        failures << scenario.name << ',' << model << ',' << rep << ",\"" << msg << "\"\n";
        continue;
      }
      metrics << scenario.name << ',' << scenario.groups() << ',' << n << ',' << model << ',' << rep << ','
              << num(rec.metrics.average_ari) << ',' << num(rec.metrics.mean_tv) << ','
              << num(rec.metrics.hpd_length) << '\n';
      for (std::size_t g = 0; g < scenario.groups(); ++g)
        per_group << scenario.name << ',' << model << ',' << rep << ',' << g + 1 << ',' << scenario.sizes[g] << ','
                  << num(rec.metrics.group_ari[g]) << ',' << num(rec.metrics.group_tv[g]) << '\n';
      if (m < res.densities.size() && !res.densities[m].grid.empty()) {
        const auto& d = res.densities[m];
        for (std::size_t g = 0; g < scenario.groups(); ++g)
          for (std::size_t i = 0; i < d.grid.size(); ++i)
            densities << scenario.name << ',' << model << ',' << rep << ',' << g + 1 << ',' << num(d.grid[i]) << ','
                      << num(d.estimate[g][i]) << ',' << num(d.lower[g][i]) << ',' << num(d.upper[g][i]) << ','
                      << num(res.sim.true_density(g, d.grid[i])) << '\n';
      }
    }
    for (auto& rec : res.records) result.records.push_back(std::move(rec));
  }

  const auto cfg = config_to_json(config);
  json manifest{{"command", "simulate"},
                {"config", cfg},
                {"config_hash", hex64(fnv1a(cfg.dump()))},
                {"seed", config.seed},
                {"versions", versions()},
                {"started_utc", started},
                {"wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                {"threads", config.workers > 0 ? static_cast<int>(config.workers) : saved_threads},
                {"fits", result.records.size()},
                {"failures", result.failures}};
  open_out(out / "manifest.json") << manifest.dump(2) << '\n';
  return result;
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

GroupedDataset read_grouped_csv(std::istream& in) {
  GroupedDataset data;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (!header) {
      if (line != "group,y") throw DataError(where + "expected header 'group,y'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw DataError(where + "expected exactly two fields");
    auto label = trim(line.substr(0, comma));
    const auto value = trim(line.substr(comma + 1));
    if (label.size() >= 2 && label.front() == '"' && label.back() == '"') label = label.substr(1, label.size() - 2);
    if (label.empty()) throw DataError(where + "empty group label");
    double y = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), y);
    if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(y))
      throw DataError(where + "y is not a finite decimal number: '" + value + "'");
    auto [it, inserted] = index.try_emplace(label, data.groups.size());
    if (inserted) {
      data.groups.emplace_back();
      data.labels.push_back(label);
    }
    data.groups[it->second].push_back(y);
  }
  if (!header) throw DataError("line 1: expected header 'group,y'");
  if (data.groups.empty()) throw DataError("no observations");
  for (std::size_t g = 0; g < data.groups.size(); ++g)
    if (data.groups[g].empty()) throw DataError("group '" + data.labels[g] + "' has no observations");
  return data;
}

GroupedDataset read_grouped_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  return read_grouped_csv(in);
}

void FitOptions::apply_application_defaults() {
  chain.iterations = 10000;
  chain.burn_in = 5000;
  truncation = 300;
}

PosteriorSamples fit_csv(const fs::path& input, const FitOptions& options, const fs::path& out) {
  return fit_dataset(read_grouped_csv(input), options, out, input.string());
}

PosteriorSamples fit_dataset(const GroupedDataset& data, const FitOptions& options, const fs::path& out,
                             const std::string& source) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = utc_now();
  ModelConfig config = ModelConfig::defaults_for(data, options.mode);
  if (options.truncation) config.truncation = *options.truncation;
  if (options.alpha) config.dp.alpha = *options.alpha;
  config.validate();

  std::vector<double> grid = default_grid(data, options.grid_points);
  if (options.grid_lo || options.grid_hi)
    grid = make_grid(options.grid_lo.value_or(grid.front()), options.grid_hi.value_or(grid.back()),
                     options.grid_points);

  const auto samples = run_chain(data, config, options.chain);
  DensityOptions dopt;
  dopt.level = options.level;
  const auto density = density_estimate(samples, grid, dopt);

  fs::create_directories(out);
  const std::size_t groups = data.group_count();
  {
    auto f = open_out(out / "density.csv");
    f << "group,x,estimate,lower,upper\n";
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t i = 0; i < grid.size(); ++i)
        f << data.labels[g] << ',' << num(grid[i]) << ',' << num(density.estimate[g][i]) << ','
          << num(density.lower[g][i]) << ',' << num(density.upper[g][i]) << '\n';
  }

  VIOptions vi;
  vi.restarts = options.vi_restarts;
  vi.seed = options.chain.seed;
  const auto global_psm = psm(allocation_draws(samples, -1));
  write_matrix(out / "psm_global.csv", global_psm);
  const auto global = vi_partition(global_psm, vi);
  std::vector<PartitionEstimate> local;
  for (std::size_t g = 0; g < groups; ++g) {
    const auto m = psm(allocation_draws(samples, static_cast<int>(g)));
    write_matrix(out / ("psm_group_" + std::to_string(g + 1) + ".csv"), m);
    local.push_back(vi_partition(m, vi));
  }
  {
    auto f = open_out(out / "partition.csv");
    f << "group,observation,y,global_cluster,group_cluster\n";
    std::size_t offset = 0;
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t i = 0; i < data.groups[g].size(); ++i)
        f << data.labels[g] << ',' << i + 1 << ',' << num(data.groups[g][i]) << ','
          << global.labels[offset + i] + 1 << ',' << local[g].labels[i] + 1 << '\n';
      offset += data.groups[g].size();
    }
  }

  const auto gs = group_similarity(samples, vi);
  write_labelled_matrix(out / "group_similarity.csv", gs.matrix, data.labels);
  {
    auto f = open_out(out / "group_partition.csv");
    f << "group,cluster\n";
    for (std::size_t g = 0; g < groups; ++g) f << data.labels[g] << ',' << gs.partition.labels[g] + 1 << '\n';
  }
  write_labelled_matrix(out / "tv_pairwise.csv", pairwise_tv(samples, grid), data.labels);

  if (options.write_draws) {
    auto w = open_out(out / "draws_weights.csv");
    auto a = open_out(out / "draws_atoms.csv");
    auto p = open_out(out / "draws_pi.csv");
    auto z = open_out(out / "draws_allocations.csv");
    w << "draw,group,component,weight,thinning\n";
    a << "draw,component,mu,sigma2\n";
    p << "draw,group,pi\n";
    z << "draw,group,observation,component\n";
    for (std::size_t q = 0; q < samples.draws.size(); ++q) {
      const auto& d = samples.draws[q];
      for (std::size_t k = 0; k < samples.components; ++k) {
        bool used = false;
        for (std::size_t g = 0; g < groups; ++g) {
          const double wk = d.omega(idx(k), idx(g));
          if (wk > 0.0) {
            used = true;
            w << q + 1 << ',' << data.labels[g] << ',' << k + 1 << ',' << num(wk) << ','
              << int(d.ell(idx(k), idx(g))) << '\n';
          }
        }
        if (used) a << q + 1 << ',' << k + 1 << ',' << num(d.mu[k]) << ',' << num(d.sigma2[k]) << '\n';
      }
      for (std::size_t g = 0; g < groups; ++g) {
        p << q + 1 << ',' << data.labels[g] << ',' << num(d.pi[g]) << '\n';
        for (std::size_t i = 0; i < d.z[g].size(); ++i)
          z << q + 1 << ',' << data.labels[g] << ',' << i + 1 << ',' << d.z[g][i] + 1 << '\n';
      }
    }
  }

  json model{{"mode", to_string(config.mode)},
             {"alpha", config.dp.alpha},
             {"mu0", config.dp.mu0},
             {"tau0", config.dp.tau0},
             {"gamma0", config.dp.gamma0},
             {"lambda0", config.dp.lambda0},
             {"a_pi", config.a_pi},
             {"b_pi", config.b_pi},
             {"truncation", config.truncation}};
  json chain{{"iterations", options.chain.iterations},
             {"burn_in", options.chain.burn_in},
             {"thin", options.chain.thin},
             {"seed", options.chain.seed}};
  json cfg{{"model", model},
           {"chain", chain},
           {"grid", {{"points", grid.size()}, {"lo", grid.front()}, {"hi", grid.back()}}},
           {"level", options.level},
           {"vi_restarts", options.vi_restarts}};
  std::vector<std::size_t> sizes;
  for (const auto& g : data.groups) sizes.push_back(g.size());
  json manifest{{"command", "fit"},
                {"input", source},
                {"groups", data.labels},
                {"sizes", sizes},
                {"config", cfg},
                {"config_hash", hex64(fnv1a(cfg.dump()))},
                {"seed", options.chain.seed},
                {"retained_draws", samples.draws.size()},
                {"components", samples.components},
                {"global_loss", global.loss},
                {"versions", versions()},
                {"started_utc", started},
                {"wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  open_out(out / "manifest.json") << manifest.dump(2) << '\n';
  return samples;
}

void prior_mc(const PriorMcRequest& request, std::ostream& out) {
  out << "variant,value,alpha,n1,n2,replications,k0,k0_se,k1,k1_se,k2,k2_se,k,k_se,lower_bound,upper_bound\n";
  const char* name = request.variant == PriorVariant::bernoulli ? "bernoulli" : "poisson";
  for (double value : request.values) {
    for (std::size_t n : request.sizes) {
      ExpectedKRequest req;
      req.params.alpha = request.alpha;
      req.n1 = req.n2 = n;
      req.replications = request.replications;
      req.truncation = request.truncation;
      req.seed = request.seed;
      if (request.variant == PriorVariant::bernoulli)
        req.model = BernoulliThinning{{value}};
      else
        req.model = EventuallySingleAtomThinning::poisson({value, value});
      const auto est = monte_carlo_expected_k(req);
      const auto [lower, upper] = analytics::expected_k_bounds(request.alpha, n, n);
      out << name << ',' << num(value) << ',' << num(request.alpha) << ',' << n << ',' << n << ','
          << est.replications << ',' << num(est.k0.mean) << ',' << num(est.k0.se) << ',' << num(est.k1.mean) << ','
          << num(est.k1.se) << ',' << num(est.k2.mean) << ',' << num(est.k2.se) << ',' << num(est.k.mean) << ','
          << num(est.k.se) << ',' << num(lower) << ',' << num(upper) << '\n';
    }
  }
}

}  // namespace tddp::harness
