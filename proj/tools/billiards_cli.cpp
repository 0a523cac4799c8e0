// Command-line front end.  Every subcommand is a pure function of the
// configuration (JSON file plus flag overrides) and the seed: rerunning
// with identical inputs reproduces the output files byte for byte.
//
// Exit codes: 0 success, 2 precondition failure (bad config, infeasible
// parameters), 3 resource budget exceeded, 1 unexpected internal error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "billiards/experiment.hpp"

namespace {

struct Overrides {
  std::string shape, angle, out_dir;
  std::uint64_t seed = 0;
  double leg = 0, gamma = 0, c = 0, growth_constant = 0, epsilon = 0;
  double synthetic_exponent = 0, vertex_rel = 0, line_rel = 0;
  int n_max = 0, fit_n_min = 0, apex = 0, max_drags = 0;
  long node_budget = 0;
  long long hitting_cap = 0, search_max_steps = 0;
  std::vector<double> mu;
  bool drag = false, no_drag = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "billiards: orbit complexity toolkit for right-triangle and rhombus "
      "tables"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);

  Overrides ov;
  auto* o_shape =
      app.add_option("--shape", ov.shape, "table shape: rhombus or triangle");
  auto* o_angle = app.add_option(
      "--angle", ov.angle,
      "acute/vertex angle in radians, or 'seeded-random'");
  auto* o_seed = app.add_option("--seed", ov.seed, "random seed");
  auto* o_leg = app.add_option("--leg", ov.leg, "side or leg length");
  auto* o_nmax = app.add_option("--n-max", ov.n_max, "reflection depth");
  auto* o_fitmin =
      app.add_option("--fit-n-min", ov.fit_n_min, "first level of the fit");
  auto* o_apex = app.add_option("--apex", ov.apex, "source vertex id");
  auto* o_mu = app.add_option("--mu", ov.mu, "beam measures (repeatable)");
  auto* o_gamma = app.add_option("--gamma", ov.gamma, "sparsity exponent");
  auto* o_c = app.add_option("--c", ov.c, "sparsity constant");
  auto* o_growth = app.add_option("--growth-constant", ov.growth_constant,
                                  "step-bound constant");
  auto* o_eps =
      app.add_option("--epsilon", ov.epsilon, "step-bound exponent slack");
  auto* o_syn = app.add_option("--synthetic-exponent", ov.synthetic_exponent,
                               "fit a synthetic power law instead");
  auto* o_drag = app.add_flag("--drag", ov.drag, "drag a found orbit");
  auto* o_nodrag = app.add_flag("--no-drag", ov.no_drag, "skip dragging");
  auto* o_vrel =
      app.add_option("--vertex-rel", ov.vertex_rel, "vertex-hit tolerance");
  auto* o_lrel =
      app.add_option("--line-rel", ov.line_rel, "on-line tolerance");
  auto* o_budget =
      app.add_option("--node-budget", ov.node_budget, "enumeration budget");
  auto* o_cap =
      app.add_option("--hitting-cap", ov.hitting_cap, "simulation cap");
  auto* o_steps = app.add_option("--search-max-steps", ov.search_max_steps,
                                 "beam search step cap");
  auto* o_drags =
      app.add_option("--max-drags", ov.max_drags, "drag step cap");
  auto* o_out = app.add_option("--out", ov.out_dir, "output directory");

  for (const char* name :
       {"complexity", "exponent", "partition", "good-interval", "hitting",
        "dev-orbit", "pipeline"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return billiards::kExitPrecondition;
  }

  try {
    billiards::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = billiards::config_from_file(config_path);
    if (o_shape->count()) cfg.shape = ov.shape;
    if (o_angle->count()) cfg.angle_spec = ov.angle;
    if (o_seed->count()) {
      cfg.seed = ov.seed;
      cfg.has_seed = true;
    }
    if (o_leg->count()) cfg.leg = ov.leg;
    if (o_nmax->count()) cfg.n_max = ov.n_max;
    if (o_fitmin->count()) cfg.fit_n_min = ov.fit_n_min;
    if (o_apex->count()) cfg.apex = ov.apex;
    if (o_mu->count()) cfg.mu_grid = ov.mu;
    if (o_gamma->count()) cfg.gamma = ov.gamma;
    if (o_c->count()) cfg.c = ov.c;
    if (o_growth->count()) cfg.growth_constant = ov.growth_constant;
    if (o_eps->count()) cfg.epsilon = ov.epsilon;
    if (o_syn->count()) cfg.synthetic_exponent = ov.synthetic_exponent;
    if (o_drag->count()) cfg.drag = true;
    if (o_nodrag->count()) cfg.drag = false;
    if (o_vrel->count()) cfg.vertex_rel = ov.vertex_rel;
    if (o_lrel->count()) cfg.line_rel = ov.line_rel;
    if (o_budget->count()) cfg.node_budget = ov.node_budget;
    if (o_cap->count()) cfg.hitting_cap = ov.hitting_cap;
    if (o_steps->count()) cfg.search_max_steps = ov.search_max_steps;
    if (o_drags->count()) cfg.max_drags = ov.max_drags;
    if (o_out->count()) cfg.out_dir = ov.out_dir;

    billiards::ResolvedExperiment rx = billiards::resolve_experiment(cfg);
    std::string command = app.get_subcommands().front()->get_name();
    billiards::RunManifest man = billiards::run_command(rx, command);

    for (const std::string& w : man.warnings)
      std::cerr << "warning: " << w << "\n";
    std::cout << man.to_json().dump(2) << "\n";
    return man.exit_code;
  } catch (const billiards::PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return billiards::kExitPrecondition;
  } catch (const billiards::BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return billiards::kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
