// Command-line entry point: parses flags into a RunConfig and dispatches.

#include "CLI11.hpp"
#include "weakkam/cli.hpp"
#include "weakkam/error.hpp"

#include <fstream>
#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::string c, h, x, y, v, route;
};

}  // namespace

int main(int argc, char** argv) {
  using weakkam::RunConfig;

  CLI::App app{"Mather theory on the torus: alpha and beta, Mane potentials, Peierls barriers, invariant sets and "
               "weak KAM solutions."};
  app.footer(weakkam::csv_columns_help() +
             "Exit codes: 0 pass, 2 computation or configuration error, 3 tolerance breach.\n"
             "WEAKKAM_CACHE_DIR sets the directory of the weak KAM kernel cache.");
  // --h is the rotation number, so help is only --help.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  RunConfig cfg;
  Flags f;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "Run config JSON; flags given explicitly override it");
    sub->add_option("--model", cfg.model, "Model file, or the name of a bundled model")->capture_default_str();
    sub->add_option("--c", f.c, "Cohomology classes: a,b,... or lo:hi:n");
    sub->add_option("--grid", cfg.grid, "Points per axis of the spatial grids");
    sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    sub->add_option("--workers", cfg.workers, "Worker threads, 0 for all cores")->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Seed for random samples")->capture_default_str();
    sub->add_option("--tolerance", cfg.tolerance, "Tolerance of the command's pass check")->capture_default_str();
  };

  CLI::App* sweep = app.add_subcommand("alpha-sweep", "alpha over a c-grid on every route, with the flat");
  common(sweep);
  sweep->add_option("--route", f.route, "Comma-separated routes: critical-value, closed-measure-lp, inf-max-subsolution");

  CLI::App* beta = app.add_subcommand("beta", "beta at rotation numbers from an alpha table");
  common(beta);
  beta->add_option("--h", f.h, "Rotation numbers: a,b,... or lo:hi:n");
  beta->add_option("--route", f.route, "Route of the alpha table");

  CLI::App* phi = app.add_subcommand("mane-potential", "Phi_{c,k}(x, y)");
  common(phi);
  phi->add_option("--x", f.x, "Start point");
  phi->add_option("--y", f.y, "End point");
  phi->add_option("--k", cfg.k, "Level; the critical value when absent");

  CLI::App* peierls = app.add_subcommand("peierls", "Peierls barrier h(x, y) with its time ladder");
  common(peierls);
  peierls->add_option("--x", f.x, "Start point");
  peierls->add_option("--y", f.y, "End point");
  peierls->add_option("--alpha", cfg.alpha, "Critical level; computed when absent");

  CLI::App* sets = app.add_subcommand("sets", "Mather, Aubry and Mane sets with structural checks");
  common(sets);
  sets->add_option("--alpha", cfg.alpha, "Critical level; computed when absent");

  CLI::App* wk = app.add_subcommand("weak-kam", "Weak KAM solution by Lax-Oleinik iteration");
  common(wk);
  wk->add_option("--tau", cfg.tau, "Time step of the semigroup")->capture_default_str();

  CLI::App* orbit = app.add_subcommand("orbit", "Euler-Lagrange orbit");
  common(orbit);
  orbit->add_option("--x", f.x, "Initial position");
  orbit->add_option("--v", f.v, "Initial velocity");
  orbit->add_option("--t-end", cfg.t_end, "Duration")->capture_default_str();
  orbit->add_option("--dt", cfg.dt, "Step")->capture_default_str();

  CLI::App* reg = app.add_subcommand("regression", "Acceptance criteria with measured values and targets");
  common(reg);
  reg->add_flag("--list", cfg.list, "List the criteria without computing");
  reg->add_option("--criteria", cfg.criteria, "Run only these criteria");

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  try {
    if (!f.config.empty()) {
      std::ifstream is(f.config);
      if (!is) throw weakkam::Error(weakkam::ErrorKind::Io, "cannot read " + f.config);
      RunConfig base = weakkam::run_config_from_json(nlohmann::json::parse(is));
      // Explicit flags win over the file.
      for (const CLI::Option* opt : chosen->get_options()) {
        if (opt->count() == 0) continue;
        const std::string n = opt->get_name();
        if (n == "--model") base.model = cfg.model;
        if (n == "--grid") base.grid = cfg.grid;
        if (n == "--out") base.out = cfg.out;
        if (n == "--workers") base.workers = cfg.workers;
        if (n == "--seed") base.seed = cfg.seed;
        if (n == "--tolerance") base.tolerance = cfg.tolerance;
        if (n == "--k") base.k = cfg.k;
        if (n == "--alpha") base.alpha = cfg.alpha;
        if (n == "--tau") base.tau = cfg.tau;
        if (n == "--t-end") base.t_end = cfg.t_end;
        if (n == "--dt") base.dt = cfg.dt;
        if (n == "--list") base.list = cfg.list;
        if (n == "--criteria") base.criteria = cfg.criteria;
      }
      cfg = base;
    }
    cfg.command = chosen->get_name();
    if (!f.c.empty()) cfg.c = weakkam::parse_values(f.c);
    if (!f.h.empty()) cfg.h = weakkam::parse_values(f.h);
    if (!f.x.empty()) cfg.x = weakkam::parse_values(f.x);
    if (!f.y.empty()) cfg.y = weakkam::parse_values(f.y);
    if (!f.v.empty()) cfg.v = weakkam::parse_values(f.v);
    if (!f.route.empty()) {
      cfg.routes.clear();
      for (std::size_t start = 0;;) {
        const std::size_t end = f.route.find(',', start);
        cfg.routes.push_back(f.route.substr(start, end - start));
        if (end == std::string::npos) break;
        start = end + 1;
      }
    }
    if (cfg.command == "alpha-sweep" && f.c.empty() && f.config.empty()) cfg.c = weakkam::parse_values("-2:2:21");
  } catch (const std::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n" << chosen->help();
    return weakkam::kExitError;
  }
  return weakkam::run_command(cfg, std::cout, std::cerr);
}
