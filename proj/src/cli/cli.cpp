#include "weakkam/cli.hpp"

#include "weakkam/acceptance.hpp"
#include "weakkam/csv.hpp"
#include "weakkam/duality.hpp"
#include "weakkam/error.hpp"
#include "weakkam/invariant_sets.hpp"
#include "weakkam/model_io.hpp"
#include "weakkam/weak_kam.hpp"

#include <omp.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <map>

#ifndef WEAKKAM_MODEL_DIR
#define WEAKKAM_MODEL_DIR "models"
#endif

namespace weakkam {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j{{"command", cfg.command},
                   {"model", cfg.model},
                   {"c", cfg.c},
                   {"h", cfg.h},
                   {"grid", cfg.grid ? nlohmann::json(*cfg.grid) : nlohmann::json(nullptr)},
                   {"out", cfg.out.string()},
                   {"workers", cfg.workers},
                   {"seed", cfg.seed},
                   {"routes", cfg.routes},
                   {"tolerance", cfg.tolerance},
                   {"x", cfg.x},
                   {"y", cfg.y},
                   {"v", cfg.v},
                   {"k", cfg.k ? nlohmann::json(*cfg.k) : nlohmann::json(nullptr)},
                   {"alpha", cfg.alpha ? nlohmann::json(*cfg.alpha) : nlohmann::json(nullptr)},
                   {"tau", cfg.tau},
                   {"t_end", cfg.t_end},
                   {"dt", cfg.dt},
                   {"list", cfg.list},
                   {"criteria", cfg.criteria}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::BadInput, "run config must be a JSON object");
  static const std::vector<std::string> keys{"command", "model", "c",     "h",     "grid",  "out",   "workers",
                                             "seed",    "routes", "tolerance", "x", "y",     "v",     "k",
                                             "alpha",   "tau",   "t_end", "dt",    "list",  "criteria"};
  for (const auto& [key, _] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw Error(ErrorKind::BadInput, "unknown run config key '" + key + "'");
  RunConfig cfg;
  try {
    const auto opt = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    const auto nullable = [&](const char* key, auto& field) {
      if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<typename std::decay_t<decltype(field)>::value_type>();
    };
    opt("command", cfg.command);
    opt("model", cfg.model);
    opt("c", cfg.c);
    opt("h", cfg.h);
    nullable("grid", cfg.grid);
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    opt("workers", cfg.workers);
    opt("seed", cfg.seed);
    opt("routes", cfg.routes);
    opt("tolerance", cfg.tolerance);
    opt("x", cfg.x);
    opt("y", cfg.y);
    opt("v", cfg.v);
    nullable("k", cfg.k);
    nullable("alpha", cfg.alpha);
    opt("tau", cfg.tau);
    opt("t_end", cfg.t_end);
    opt("dt", cfg.dt);
    opt("list", cfg.list);
    opt("criteria", cfg.criteria);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadInput, std::string("run config: ") + e.what());
  }
  return cfg;
}

std::vector<double> parse_values(std::string_view text) {
  const auto number = [&](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    double x = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(x))
      throw Error(ErrorKind::BadInput, "not a number: '" + std::string(s) + "'");
    return x;
  };
  std::vector<std::string_view> parts;
  const char sep = text.find(':') != std::string_view::npos ? ':' : ',';
  for (std::size_t start = 0;;) {
    const std::size_t end = text.find(sep, start);
    parts.push_back(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  std::vector<double> out;
  if (sep == ':') {
    if (parts.size() != 3) throw Error(ErrorKind::BadInput, "range must be lo:hi:n");
    const double lo = number(parts[0]), hi = number(parts[1]), n = number(parts[2]);
    if (n < 0 || n != std::floor(n)) throw Error(ErrorKind::BadInput, "range count must be a non-negative integer");
    const int m = static_cast<int>(n);
    for (int i = 0; i < m; ++i) out.push_back(m == 1 ? lo : lo + (hi - lo) * i / (m - 1));
    return out;
  }
  if (parts.size() == 1 && parts[0].find_first_not_of(' ') == std::string_view::npos) return out;
  for (auto p : parts) out.push_back(number(p));
  return out;
}

fs::path resolve_model_path(const std::string& name) {
  if (fs::exists(name)) return name;
  const fs::path bundled = fs::path(WEAKKAM_MODEL_DIR) / name;
  if (fs::exists(bundled)) return bundled;
  const fs::path with_ext = fs::path(WEAKKAM_MODEL_DIR) / (name + ".json");
  if (fs::exists(with_ext)) return with_ext;
  throw Error(ErrorKind::Io, "no model file '" + name + "'");
}

std::string csv_columns_help() {
  return "CSV columns (numbers with 12 significant digits):\n"
         "  alpha-sweep  alpha_sweep.csv  c, alpha_<route> per route, disagreement\n"
         "  beta         beta.csv         h, beta, supporting_c\n"
         "  sets         mather.csv, aubry.csv, mane.csv  x_1..x_d, v_1..v_d, E, label, c_1..c_d\n"
         "  weak-kam     weak_kam.csv     x1..xd, u, residual, kink\n"
         "  orbit        orbit.csv        t, x_1..x_d (lifted), v_1..v_d, E\n";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"alpha-sweep", "beta",  "mane-potential", "peierls",
                                              "sets",        "weak-kam", "orbit",        "regression"};
  return names;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& log;
  Model model;
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  body(os);
  if (!os) throw Error(ErrorKind::Io, "short write to " + path.string());
}

void emit(Context& ctx, const std::string& name, const nlohmann::json& j) {
  write_file(ctx.cfg.out / (name + ".json"), [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  ctx.out << j.dump() << '\n';
}

Vec point(const std::vector<double>& values, int dim, double fallback, const char* what) {
  if (values.empty()) return Vec::Constant(dim, fallback);
  if (static_cast<int>(values.size()) != dim)
    throw Error(ErrorKind::BadInput, std::string(what) + " needs " + std::to_string(dim) + " coordinates");
  return make_vec(values);
}

void require_dim1(const Context& ctx, const char* command) {
  if (ctx.model->dim() != 1) throw Error(ErrorKind::BadInput, std::string(command) + " supports d = 1 only");
}

double single_c(const Context& ctx) {
  if (ctx.cfg.c.size() > 1) throw Error(ErrorKind::BadInput, "this command takes a single class --c");
  return ctx.cfg.c.empty() ? 0.0 : ctx.cfg.c.front();
}

double critical_level(const Context& ctx, const OneForm& form) {
  if (ctx.cfg.alpha) return *ctx.cfg.alpha;
  return alpha(ctx.model, form.cohomology(), AlphaRoute::CriticalValue).value;
}

nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

std::vector<AlphaRoute> routes(const RunConfig& cfg, std::vector<AlphaRoute> fallback) {
  if (cfg.routes.empty()) return fallback;
  std::vector<AlphaRoute> r;
  for (const auto& s : cfg.routes) r.push_back(alpha_route_from_string(s));
  return r;
}

AlphaOptions alpha_options(const RunConfig& cfg) {
  AlphaOptions o;
  if (cfg.grid) {
    o.lp.x_points = *cfg.grid;
    o.inf_max.x_points = *cfg.grid;
  }
  return o;
}

int cmd_alpha_sweep(Context& ctx) {
  require_dim1(ctx, "alpha-sweep");
  const std::vector<double> cs = ctx.cfg.c;
  if (cs.empty()) {
    ctx.log << "alpha-sweep: empty c-range; give --c a,b,... or --c lo:hi:n with n >= 1\n";
    return kExitError;
  }
  const auto rs = routes(ctx.cfg, {AlphaRoute::CriticalValue, AlphaRoute::ClosedMeasureLP, AlphaRoute::InfMaxSubsolution});
  const AlphaOptions opts = alpha_options(ctx.cfg);
  std::vector<AlphaTable> tables;
  for (AlphaRoute r : rs) tables.push_back(AlphaTable::build(ctx.model, {cs}, r, opts));

  double worst = 0.0;
  write_file(ctx.cfg.out / "alpha_sweep.csv", [&](std::ostream& os) {
    std::vector<std::string> head{"c"};
    for (AlphaRoute r : rs) head.push_back("alpha_" + std::string(to_string(r)));
    head.push_back("disagreement");
    write_csv_row(os, head);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      std::vector<std::string> row{fmt12(cs[i])};
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const AlphaTable& t : tables) {
        row.push_back(fmt12(t.values()[i]));
        lo = std::min(lo, t.values()[i]);
        hi = std::max(hi, t.values()[i]);
      }
      row.push_back(fmt12(hi - lo));
      worst = std::max(worst, hi - lo);
      write_csv_row(os, row);
    }
  });

  nlohmann::json j{{"command", "alpha-sweep"}, {"points", cs.size()}, {"max_disagreement", worst},
                   {"tolerance", ctx.cfg.tolerance}};
  // Flat of alpha from the most accurate route present, edges refined off the grid.
  const auto cv = std::find(rs.begin(), rs.end(), AlphaRoute::CriticalValue);
  const std::size_t pick = cv == rs.end() ? 0 : static_cast<std::size_t>(cv - rs.begin());
  const AlphaRoute route = rs[pick];
  const Model model = ctx.model;
  const AlphaTable refined({cs}, tables[pick].values(),
                           [model, route, opts](const Vec& c) { return alpha(model, c, route, opts).value; });
  try {
    const Interval f = beta_subderivative_at_zero(refined);
    j["flat"] = {f.lo, f.hi};
  } catch (const Error& e) {
    j["flat"] = nullptr;
    j["flat_error"] = e.what();
  }
  j["pass"] = worst <= ctx.cfg.tolerance;
  emit(ctx, "alpha_sweep", j);
  return worst <= ctx.cfg.tolerance ? kExitOk : kExitBreach;
}

int cmd_beta(Context& ctx) {
  require_dim1(ctx, "beta");
  std::vector<double> cs = ctx.cfg.c;
  if (cs.empty()) cs = parse_values("-3:3:61");
  const std::vector<double> hs = ctx.cfg.h.empty() ? std::vector<double>{0.0} : ctx.cfg.h;
  const AlphaRoute route = routes(ctx.cfg, {AlphaRoute::ClosedMeasureLP}).front();
  const AlphaTable t = AlphaTable::build(ctx.model, {cs}, route, alpha_options(ctx.cfg));
  nlohmann::json samples = nlohmann::json::array();
  write_file(ctx.cfg.out / "beta.csv", [&](std::ostream& os) {
    write_csv_row(os, {"h", "beta", "supporting_c"});
    for (double h : hs) {
      const BetaSample b = beta(t, vec1(h));
      write_csv_row(os, {fmt12(h), fmt12(b.value), fmt12(b.supporting_c[0])});
      samples.push_back({{"h", h}, {"beta", b.value}, {"supporting_c", b.supporting_c[0]}});
    }
  });
  const Interval f = beta_subderivative_at_zero(t);
  emit(ctx, "beta", {{"command", "beta"}, {"route", to_string(route)}, {"samples", samples},
                     {"subdifferential_at_0", {f.lo, f.hi}}});
  return kExitOk;
}

nlohmann::json potential_json(const PotentialValue& v) {
  nlohmann::json j{{"minus_infinity", v.minus_infinity}, {"value", v.finite() ? number(v.value) : nullptr}};
  if (v.argmin_T) j["argmin_T"] = *v.argmin_T;
  if (v.winding.size()) j["winding"] = std::vector<int>(v.winding.data(), v.winding.data() + v.winding.size());
  if (v.witness) {
    const LoopWitness& w = *v.witness;
    j["witness"] = {{"base", std::vector<double>(w.base.data(), w.base.data() + w.base.size())},
                    {"winding", std::vector<int>(w.winding.data(), w.winding.data() + w.winding.size())},
                    {"T", w.T},
                    {"loop_action", w.loop_action},
                    {"repetitions", w.repetitions},
                    {"iterated_value", w.iterated_value}};
  }
  return j;
}

int cmd_mane_potential(Context& ctx) {
  const int d = ctx.model->dim();
  const OneForm form(d == 1 ? vec1(single_c(ctx)) : point(ctx.cfg.c, d, 0.0, "--c"));
  const Vec x = point(ctx.cfg.x, d, 0.0, "--x"), y = point(ctx.cfg.y, d, 0.5, "--y");
  const double k = ctx.cfg.k ? *ctx.cfg.k : mane_critical_value(ctx.model, form);
  const ManePotential phi(ctx.model, form);
  nlohmann::json j = potential_json(phi(k, x, y));
  j["command"] = "mane-potential";
  j["k"] = k;
  emit(ctx, "mane_potential", j);
  return kExitOk;
}

int cmd_peierls(Context& ctx) {
  const int d = ctx.model->dim();
  const OneForm form(d == 1 ? vec1(single_c(ctx)) : point(ctx.cfg.c, d, 0.0, "--c"));
  const Vec x = point(ctx.cfg.x, d, 0.0, "--x"), y = point(ctx.cfg.y, d, 0.0, "--y");
  const ActionSolver solver(ctx.model, form, exact_discrete_policy());
  const double a = ctx.cfg.alpha ? *ctx.cfg.alpha : mane_critical_value(solver).value;
  const BarrierResult h = peierls_ladder(solver, a, x, y);
  nlohmann::json ladder = nlohmann::json::array();
  for (const auto& [t, value] : h.ladder) ladder.push_back({t, value});
  emit(ctx, "peierls", {{"command", "peierls"},
                        {"alpha", a},
                        {"value", h.value},
                        {"stabilized", h.stabilized},
                        {"ladder", ladder},
                        {"winding", std::vector<int>(h.winding.data(), h.winding.data() + h.winding.size())}});
  return h.stabilized ? kExitOk : kExitBreach;
}

int cmd_sets(Context& ctx) {
  require_dim1(ctx, "sets");
  const Vec c = vec1(single_c(ctx));
  const double a = critical_level(ctx, OneForm(c));
  ShellSetOptions so;
  so.x_points = ctx.cfg.grid.value_or(64);
  const PhasePointSet m = mather_set(ctx.model, c);
  const PhasePointSet au = aubry_set(ctx.model, c, a, so);
  const PhasePointSet mn = mane_set(ctx.model, c, a, so);
  for (const PhasePointSet* s : {&m, &au, &mn})
    write_file(ctx.cfg.out / (std::string(to_string(s->label)) + ".csv"),
               [&](std::ostream& os) { write_set_csv(os, *s); });
  const InclusionReport r = check_inclusions(m, au, mn, a);
  nlohmann::json j{{"command", "sets"},
                   {"c", c[0]},
                   {"alpha", a},
                   {"sizes", {{"mather", m.size()}, {"aubry", au.size()}, {"mane", mn.size()}}},
                   {"projected_aubry", au.projection().size()},
                   {"projected_mane", mn.projection().size()},
                   {"inclusions", r.to_json()},
                   {"graph", {{"mather", check_graph_property(m).to_json()},
                              {"aubry", au.empty() ? nlohmann::json(nullptr) : check_graph_property(au).to_json()},
                              {"mane", mn.empty() ? nlohmann::json(nullptr) : check_graph_property(mn).to_json()}}}};
  emit(ctx, "sets", j);
  return r.pass ? kExitOk : kExitBreach;
}

int cmd_weak_kam(Context& ctx) {
  const int d = ctx.model->dim();
  const OneForm form(d == 1 ? vec1(single_c(ctx)) : point(ctx.cfg.c, d, 0.0, "--c"));
  WeakKamOptions wo;
  wo.kernel.points_per_axis = ctx.cfg.grid.value_or(d == 1 ? 256 : 32);
  wo.kernel.tau = ctx.cfg.tau;
  const WeakKamSolution s = solve_weak_kam(ctx.model, form, wo);
  const ResidualField r = subsolution_residual(ctx.model, form, s.u, s.alpha_estimate);
  write_file(ctx.cfg.out / "weak_kam.csv", [&](std::ostream& os) { write_solution_csv(os, s.u, r); });
  const long kinks = std::count(r.kinks.begin(), r.kinks.end(), true);
  const double bound = 2e-2;
  emit(ctx, "weak_kam", {{"command", "weak-kam"},
                         {"alpha_estimate", s.alpha_estimate},
                         {"residual", s.residual},
                         {"sweeps", s.sweeps},
                         {"subsolution_residual", r.max_residual},
                         {"subsolution_bound", bound},
                         {"kinks", kinks}});
  return r.max_residual <= bound ? kExitOk : kExitBreach;
}

int cmd_orbit(Context& ctx) {
  const int d = ctx.model->dim();
  const Vec x = point(ctx.cfg.x, d, 0.0, "--x"), v = point(ctx.cfg.v, d, 1.0, "--v");
  const Orbit o = integrate_el_flow(*ctx.model, x, v, ctx.cfg.t_end, ctx.cfg.dt);
  write_file(ctx.cfg.out / "orbit.csv", [&](std::ostream& os) { write_orbit_csv(os, o); });
  const Vec rho = rotation_vector_of_orbit(o);
  emit(ctx, "orbit", {{"command", "orbit"},
                      {"samples", o.size()},
                      {"energy_drift", o.max_energy_drift()},
                      {"rotation_vector", std::vector<double>(rho.data(), rho.data() + rho.size())}});
  return kExitOk;
}

int cmd_regression(Context& ctx) {
  if (ctx.cfg.list) {
    for (const auto& c : acceptance_criteria()) ctx.out << c.id << '\t' << c.title << '\n';
    return kExitOk;
  }
  AcceptanceOptions o;
  o.grid = ctx.cfg.grid;
  o.seed = ctx.cfg.seed;
  AcceptanceSuite suite(o);
  std::vector<CriterionResult> results;
  std::vector<int> ids = ctx.cfg.criteria;
  if (ids.empty())
    for (const auto& c : acceptance_criteria()) ids.push_back(c.id);
  for (int id : ids) {
    results.push_back(suite.run(id));
    ctx.log << summary_line(results.back()) << '\n';
  }
  const nlohmann::json report = acceptance_report(results, o);
  emit(ctx, "regression", report);
  return report["pass"].get<bool>() ? kExitOk : kExitBreach;
}

}  // namespace

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  static const std::map<std::string, int (*)(Context&)> table{
      {"alpha-sweep", cmd_alpha_sweep}, {"beta", cmd_beta},       {"mane-potential", cmd_mane_potential},
      {"peierls", cmd_peierls},         {"sets", cmd_sets},       {"weak-kam", cmd_weak_kam},
      {"orbit", cmd_orbit},             {"regression", cmd_regression}};
  const auto it = table.find(cfg.command);
  if (it == table.end()) {
    log << "unknown command '" << cfg.command << "'\n";
    return kExitError;
  }
  try {
    if (cfg.workers < 0) throw Error(ErrorKind::BadInput, "--workers must be non-negative");
    if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
    if (!(cfg.tolerance > 0.0)) throw Error(ErrorKind::BadInput, "--tolerance must be positive");
    if (cfg.grid && *cfg.grid < 2) throw Error(ErrorKind::BadInput, "--grid must be at least 2");
    fs::create_directories(cfg.out);
    write_file(cfg.out / "run_config.json", [&](std::ostream& os) { os << to_json(cfg).dump(2) << '\n'; });
    Context ctx{cfg, out, log, cfg.command == "regression" && cfg.list ? Model{}
                                                                       : load_model(resolve_model_path(cfg.model))};
    return it->second(ctx);
  } catch (const Error& e) {
    log << cfg.command << ": " << e.what() << '\n';
    return kExitError;
  } catch (const fs::filesystem_error& e) {
    log << cfg.command << ": " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace weakkam
