// tddp: command-line front end for the thinned-DDP toolkit.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tddp/analytics.hpp"
#include "tddp/error.hpp"
#include "tddp/harness.hpp"

namespace {

using nlohmann::json;
namespace an = tddp::analytics;

enum Exit { ok = 0, usage = 1, data = 2, runtime = 3 };

json result_json(const an::CorrelationResult& r) { return {{"value", r.value}, {"truncation_error", r.truncation_error}}; }

std::vector<std::uint8_t> parse_bits(const std::string& s) {
  std::vector<std::uint8_t> out;
  for (char c : s) {
    if (c == '0' || c == '1')
      out.push_back(static_cast<std::uint8_t>(c - '0'));
    else if (c != ',' && c != ' ')
      throw std::invalid_argument("thinning sequence must contain only 0 and 1: " + s);
  }
  return out;
}

struct AnalyticsArgs {
  double alpha = 1.0;
  double pi1 = 0.5, pi2 = 0.5, pi = 0.5;
  double pi11 = 0.25, pi00 = 0.25;
  double lambda = 1.0, lambda0 = 1.0, lambda1 = 1.0, lambda2 = 1.0;
  std::size_t u = 1, u1 = 1, u2 = 1;
  std::size_t b0 = 0, b1 = 0, b2 = 0;
  std::size_t n1 = 1, n2 = 1;
  std::string ell1, ell2, ell;
  bool no_tail = false;
};

void add_analytics(CLI::App& app, AnalyticsArgs& a, json& out) {
  auto* cmd = app.add_subcommand("analytics", "Evaluate a closed-form quantity and print JSON");
  cmd->require_subcommand(1);
  auto alpha = [&](CLI::App* s) { s->add_option("--alpha", a.alpha, "Concentration")->capture_default_str(); };

  auto* cond = cmd->add_subcommand("conditional", "Correlation given two thinning sequences");
  alpha(cond);
  cond->add_option("--ell1", a.ell1, "Sequence of group 1, e.g. 0110")->required();
  cond->add_option("--ell2", a.ell2, "Sequence of group 2")->required();
  cond->add_flag("--no-tail", a.no_tail, "Do not continue the sequences with ones");
  cond->callback([&] {
    const auto l1 = parse_bits(a.ell1), l2 = parse_bits(a.ell2);
    out = result_json(an::corr_conditional(a.alpha, l1, l2, !a.no_tail));
  });

  auto* ev = cmd->add_subcommand("eventually", "Eventually single-atom correlation");
  alpha(ev);
  ev->add_option("--u1", a.u1)->required()->check(CLI::PositiveNumber);
  ev->add_option("--u2", a.u2)->required()->check(CLI::PositiveNumber);
  ev->callback([&] { out = result_json(an::corr_eventually(a.alpha, a.u1, a.u2)); });

  auto* be = cmd->add_subcommand("bernoulli", "Independent Bernoulli thinning correlation");
  alpha(be);
  be->add_option("--pi1", a.pi1)->required();
  be->add_option("--pi2", a.pi2)->required();
  be->callback([&] { out = result_json(an::corr_bernoulli(a.alpha, a.pi1, a.pi2)); });

  auto* po = cmd->add_subcommand("poisson", "Independent Poisson offsets correlation");
  alpha(po);
  po->add_option("--lambda1", a.lambda1)->required();
  po->add_option("--lambda2", a.lambda2)->required();
  po->callback([&] { out = result_json(an::corr_poisson(a.alpha, a.lambda1, a.lambda2)); });

  auto* pd = cmd->add_subcommand("poisson-diff", "Poisson offset difference correlation");
  alpha(pd);
  pd->add_option("--lambda", a.lambda)->required();
  pd->callback([&] { out = result_json(an::corr_poisson_diff(a.alpha, a.lambda)); });

  auto* db = cmd->add_subcommand("dependent-bernoulli", "Dependent Bernoulli pairs correlation");
  alpha(db);
  db->add_option("--pi11", a.pi11)->required();
  db->add_option("--pi00", a.pi00)->required();
  db->callback([&] { out = result_json(an::corr_dependent_bernoulli(a.alpha, a.pi11, a.pi00)); });

  auto* sb = cmd->add_subcommand("symmetric-blocked", "Symmetric blocked layout correlation");
  alpha(sb);
  sb->add_option("--b0", a.b0)->required();
  sb->add_option("--b1", a.b1)->required();
  sb->add_option("--b2", a.b2)->required();
  sb->callback([&] { out = result_json(an::corr_symmetric_blocked(a.alpha, a.b0, a.b1, a.b2)); });

  auto* sp = cmd->add_subcommand("symmetric-poisson", "Symmetric blocked layout with Poisson block lengths");
  alpha(sp);
  sp->add_option("--lambda0", a.lambda0)->required();
  sp->add_option("--lambda1", a.lambda1)->required();
  sp->add_option("--lambda2", a.lambda2)->required();
  sp->callback([&] { out = result_json(an::corr_symmetric_poisson(a.alpha, a.lambda0, a.lambda1, a.lambda2)); });

  auto* pc = cmd->add_subcommand("parent-conditional", "Correlation with the parent, given a sequence");
  alpha(pc);
  pc->add_option("--ell", a.ell)->required();
  pc->add_flag("--no-tail", a.no_tail);
  pc->callback([&] {
    out = result_json(an::corr_parent(a.alpha, an::ParentConditional{parse_bits(a.ell), !a.no_tail}));
  });
  auto* pe = cmd->add_subcommand("parent-eventually", "Correlation with the parent, fixed offset");
  alpha(pe);
  pe->add_option("--u", a.u)->required()->check(CLI::PositiveNumber);
  pe->callback([&] { out = result_json(an::corr_parent(a.alpha, an::ParentEventually{a.u})); });
  auto* pb = cmd->add_subcommand("parent-bernoulli", "Correlation with the parent, Bernoulli thinning");
  alpha(pb);
  pb->add_option("--pi", a.pi)->required();
  pb->callback([&] { out = result_json(an::corr_parent(a.alpha, an::ParentBernoulli{a.pi})); });
  auto* pp = cmd->add_subcommand("parent-poisson", "Correlation with the parent, Poisson offset");
  alpha(pp);
  pp->add_option("--lambda", a.lambda)->required();
  pp->callback([&] { out = result_json(an::corr_parent(a.alpha, an::ParentPoisson{a.lambda})); });

  auto* ek = cmd->add_subcommand("expected-k", "Exact expected distinct values, fixed offsets");
  alpha(ek);
  ek->add_option("--n1", a.n1)->required();
  ek->add_option("--n2", a.n2)->required();
  ek->add_option("--u1", a.u1)->required()->check(CLI::PositiveNumber);
  ek->add_option("--u2", a.u2)->required()->check(CLI::PositiveNumber);
  ek->callback([&] {
    out = {{"value", an::expected_k_exact(a.alpha, a.n1, a.n2, a.u1, a.u2)}, {"truncation_error", 0.0}};
  });

  auto* kb = cmd->add_subcommand("expected-k-bounds", "Pooled and independent expected distinct values");
  alpha(kb);
  kb->add_option("--n1", a.n1)->required();
  kb->add_option("--n2", a.n2)->required();
  kb->callback([&] {
    const auto [lo, hi] = an::expected_k_bounds(a.alpha, a.n1, a.n2);
    out = {{"lower", lo}, {"upper", hi}};
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thinned dependent Dirichlet process toolkit"};
  app.set_version_flag("--version", tddp::harness::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int workers = -1;
  auto* sim = app.add_subcommand("simulate", "Run a simulation study from a JSON config");
  sim->add_option("config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out_dir, "Output directory")->required();
  sim->add_option("--workers", workers, "Replication threads (overrides the config)");
  bool quiet = false;
  sim->add_flag("-q,--quiet", quiet, "No progress lines");

  std::string input, mode = "thinned";
  tddp::harness::FitOptions fit_opt;
  bool application = false;
  std::size_t iterations = 0, burn_in = 0, truncation = 0;
  double alpha = 0.0;
  auto* fit = app.add_subcommand("fit", "Fit a model to a group,y CSV");
  fit->add_option("input", input, "CSV with header group,y")->required()->check(CLI::ExistingFile);
  fit->add_option("-o,--out", out_dir, "Output directory")->required();
  fit->add_option("--model", mode, "thinned | complete_pooling | no_pooling")->capture_default_str();
  fit->add_flag("--application", application, "10000 iterations, 5000 burn-in, T = 300");
  fit->add_option("--iterations", iterations);
  fit->add_option("--burn-in", burn_in);
  fit->add_option("--thin", fit_opt.chain.thin)->capture_default_str();
  fit->add_option("--truncation", truncation);
  fit->add_option("--alpha", alpha);
  fit->add_option("--seed", fit_opt.chain.seed)->capture_default_str();
  fit->add_option("--grid-points", fit_opt.grid_points)->capture_default_str();
  fit->add_option("--grid-lo", fit_opt.grid_lo);
  fit->add_option("--grid-hi", fit_opt.grid_hi);
  fit->add_option("--level", fit_opt.level)->capture_default_str();
  fit->add_option("--vi-restarts", fit_opt.vi_restarts)->capture_default_str();
  fit->add_flag("--draws", fit_opt.write_draws, "Also write the retained draws");

  tddp::harness::PriorMcRequest prior;
  std::string variant = "bernoulli", prior_out;
  auto* pmc = app.add_subcommand("prior-mc", "Monte Carlo expected cluster counts under the prior");
  pmc->add_option("--variant", variant, "bernoulli | poisson")->capture_default_str();
  pmc->add_option("--values", prior.values, "pi or lambda values")->required()->delimiter(',');
  pmc->add_option("--n", prior.sizes, "Per-group sample sizes")->required()->delimiter(',');
  pmc->add_option("--alpha", prior.alpha)->capture_default_str();
  pmc->add_option("--replications", prior.replications)->capture_default_str();
  pmc->add_option("--truncation", prior.truncation)->capture_default_str();
  pmc->add_option("--seed", prior.seed)->capture_default_str();
  pmc->add_option("-o,--out", prior_out, "Output CSV (default stdout)");

  AnalyticsArgs an_args;
  json an_out;
  add_analytics(app, an_args, an_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return runtime;
  }

  try {
    if (*sim) {
      auto config = tddp::harness::load_config(config_path);
      if (workers >= 0) config.workers = static_cast<std::size_t>(workers);
      const auto res = tddp::harness::run_experiment(config, out_dir, quiet ? nullptr : &std::cerr);
      if (res.failures) {
        std::cerr << res.failures << " fit(s) failed; see " << out_dir << "/failures.csv\n";
        return runtime;
      }
    } else if (*fit) {
      fit_opt.mode = tddp::parse_mode(mode);
      if (application) fit_opt.apply_application_defaults();
      if (iterations) fit_opt.chain.iterations = iterations;
      if (burn_in) fit_opt.chain.burn_in = burn_in;
      if (truncation) fit_opt.truncation = truncation;
      if (alpha > 0.0) fit_opt.alpha = alpha;
      tddp::harness::fit_csv(input, fit_opt, out_dir);
    } else if (*pmc) {
      if (variant == "bernoulli")
        prior.variant = tddp::harness::PriorVariant::bernoulli;
      else if (variant == "poisson")
        prior.variant = tddp::harness::PriorVariant::poisson;
      else
        throw std::invalid_argument("unknown variant: " + variant);
      if (prior_out.empty()) {
        tddp::harness::prior_mc(prior, std::cout);
      } else {
        std::ofstream f(prior_out);
        if (!f) throw std::runtime_error("cannot write " + prior_out);
        tddp::harness::prior_mc(prior, f);
      }
    } else {
      std::cout << an_out.dump() << '\n';
    }
  } catch (const tddp::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return runtime;
  }
  return ok;
}
