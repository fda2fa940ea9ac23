#include "weakkam/weak_kam.hpp"

#include "weakkam/csv.hpp"
#include "weakkam/error.hpp"

#include <boost/crc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <map>

namespace weakkam {

// ---------------------------------------------------------------------------
// Grid fields

GridField::GridField(int dim_, int n_, double fill) : dim(dim_), n(n_) {
  if (dim_ < 1 || dim_ > kMaxDim || n_ < 2) throw Error(ErrorKind::BadInput, "grid field shape");
  std::size_t total = 1;
  for (int a = 0; a < dim_; ++a) total *= static_cast<std::size_t>(n_);
  values.assign(total, fill);
}

IVec GridField::multi_index(std::size_t i) const {
  IVec idx(dim);
  for (int a = 0; a < dim; ++a) {
    idx[a] = static_cast<int>(i % static_cast<std::size_t>(n));
    i /= static_cast<std::size_t>(n);
  }
  return idx;
}

std::size_t GridField::index(const IVec& idx) const {
  std::size_t i = 0;
  for (int a = dim - 1; a >= 0; --a) {
    const int k = ((idx[a] % n) + n) % n;
    i = i * static_cast<std::size_t>(n) + static_cast<std::size_t>(k);
  }
  return i;
}

Vec GridField::node(std::size_t i) const { return multi_index(i).cast<double>() / n; }

double GridField::interpolate(const Vec& x) const {
  const Vec s = wrap_unit(x) * n;
  IVec base(dim);
  Vec frac(dim);
  for (int a = 0; a < dim; ++a) {
    base[a] = static_cast<int>(std::floor(s[a]));
    frac[a] = s[a] - base[a];
  }
  double out = 0.0;
  for (int corner = 0; corner < (1 << dim); ++corner) {
    IVec idx = base;
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      const bool up = (corner >> a) & 1;
      idx[a] += up;
      w *= up ? frac[a] : 1.0 - frac[a];
    }
    out += w * values[index(idx)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel

Kernel::Kernel(int dim, int n, double tau, double dt) : dim_(dim), n_(n), tau_(tau), dt_(dt) {
  if (dim < 1 || dim > kMaxDim || n < 2 || !(tau > 0.0) || !(dt > 0.0))
    throw Error(ErrorKind::BadInput, "kernel shape");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(n);
  h_.assign(size_ * size_, 0.0);
  w_.assign(size_ * size_ * static_cast<std::size_t>(dim), 0);
}

IVec Kernel::winding(std::size_t from, std::size_t to) const {
  IVec w(dim_);
  const std::size_t base = (from * size_ + to) * static_cast<std::size_t>(dim_);
  for (int a = 0; a < dim_; ++a) w[a] = w_[base + a];
  return w;
}

void Kernel::set_winding(std::size_t from, std::size_t to, const IVec& w) {
  const std::size_t base = (from * size_ + to) * static_cast<std::size_t>(dim_);
  for (int a = 0; a < dim_; ++a) w_[base + a] = w[a];
}

namespace {

struct IVecLess {
  bool operator()(const IVec& a, const IVec& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

DiscretizationPolicy kernel_policy(const KernelSpec& spec) {
  return DiscretizationPolicy{spec.dt, 2, 1 << 16, false};
}

void check_spec(const Model& model, const OneForm& form, const KernelSpec& spec) {
  if (form.dim() != model->dim()) throw Error(ErrorKind::BadInput, "form dimension");
  if (spec.points_per_axis < 2 || !(spec.tau > 0.0) || !(spec.dt > 0.0) || spec.winding_radius < 0)
    throw Error(ErrorKind::BadInput, "kernel spec");
}

bool on_box_boundary(const IVec& w, const IVec& center, int radius) {
  for (Eigen::Index a = 0; a < w.size(); ++a)
    if (std::abs(w[a] - center[a]) >= radius) return true;
  return false;
}

// One source node against every target, in target order. Each winding class
// keeps the minimizer found for the previous target as its warm start.
void kernel_row(const ActionSolver& solver, const GridField& grid, std::size_t from, int radius, Kernel& out) {
  const Vec x = grid.node(from);
  const double T = out.tau();
  const int N = solver.policy().segments_for(T);
  std::map<IVec, LiftedPath, IVecLess> warm;
  IVec proxy = IVec::Zero(grid.dim);
  for (std::size_t to = 0; to < grid.size(); ++to) {
    const Vec y = grid.node(to);
    proxy = proxy_best_winding(solver.shifted(), x, y, T, N, to == 0 ? nearest_winding(y, x) : proxy);
    std::map<IVec, LiftedPath, IVecLess> next;
    double best = std::numeric_limits<double>::infinity();
    IVec best_w = proxy;
    IVec center = proxy;
    for (int walk = 0; walk < 16; ++walk) {
      for (const IVec& w : winding_box(center, radius)) {
        if (next.count(w)) continue;
        std::vector<LiftedPath> starts;
        if (auto it = warm.find(w); it != warm.end()) starts.push_back(it->second);
        const PathResult r = solver.solve(x, y, w, T, starts, false);
        next[w] = r.path;
        if (r.action < best) {
          best = r.action;
          best_w = w;
        }
      }
      if (radius == 0 || !on_box_boundary(best_w, center, radius)) break;
      center = best_w;
    }
    out.at(from, to) = best;
    out.set_winding(from, to, best_w);
    warm = std::move(next);
  }
}

Kernel compute_kernel_impl(const Model& model, const OneForm& form, const KernelSpec& spec, bool parallel) {
  check_spec(model, form, spec);
  const ActionSolver solver(model, form, kernel_policy(spec));
  const double tau = solver.admissible_time(spec.tau);
  Kernel k(model->dim(), spec.points_per_axis, tau, spec.dt);
  const GridField grid(model->dim(), spec.points_per_axis);
  const long rows = static_cast<long>(k.size());
  if (!parallel) {
    for (long i = 0; i < rows; ++i) kernel_row(solver, grid, static_cast<std::size_t>(i), spec.winding_radius, k);
    return k;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < rows; ++i) {
    try {
      kernel_row(solver, grid, static_cast<std::size_t>(i), spec.winding_radius, k);
    } catch (...) {
#pragma omp critical(weakkam_kernel_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return k;
}

constexpr char kMagic[8] = {'W', 'K', 'K', 'E', 'R', 'N', 'E', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

Kernel compute_kernel(const Model& model, const OneForm& form, const KernelSpec& spec) {
  return compute_kernel_impl(model, form, spec, true);
}

Kernel compute_kernel_serial(const Model& model, const OneForm& form, const KernelSpec& spec) {
  return compute_kernel_impl(model, form, spec, false);
}

std::string kernel_cache_key(const Model& model, const OneForm& form, const KernelSpec& spec) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "|n=%d|tau=%.17g|dt=%.17g|r=%d|v=%u", spec.points_per_axis, spec.tau, spec.dt,
                spec.winding_radius, kFormatVersion);
  const std::string text = model->to_json().dump() + "|" + form.to_json().dump() + buf;
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
  crc.process_bytes(text.data(), text.size());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(crc.checksum()));
  return hex;
}

void write_kernel(const std::filesystem::path& bin, const Kernel& k) {
  const std::filesystem::path tmp = bin.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    const std::int32_t dim = k.dim(), n = k.points_per_axis();
    const double tau = k.tau(), dt = k.dt();
    os.write(kMagic, sizeof kMagic);
    os.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof kFormatVersion);
    os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&tau), sizeof tau);
    os.write(reinterpret_cast<const char*>(&dt), sizeof dt);
    os.write(reinterpret_cast<const char*>(k.values().data()),
             static_cast<std::streamsize>(k.values().size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(k.windings().data()),
             static_cast<std::streamsize>(k.windings().size() * sizeof(std::int32_t)));
    if (!os) throw Error(ErrorKind::Io, "short write to " + tmp.string());
  }
  // Readers only ever see a complete file.
  std::filesystem::rename(tmp, bin);
}

Kernel read_kernel(const std::filesystem::path& bin) {
  std::ifstream is(bin, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + bin.string());
  char magic[sizeof kMagic];
  std::uint32_t version = 0;
  std::int32_t dim = 0, n = 0;
  double tau = 0.0, dt = 0.0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  is.read(reinterpret_cast<char*>(&dim), sizeof dim);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&tau), sizeof tau);
  is.read(reinterpret_cast<char*>(&dt), sizeof dt);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kFormatVersion)
    throw Error(ErrorKind::Io, "not a kernel table: " + bin.string());
  Kernel k;
  try {
    k = Kernel(dim, n, tau, dt);
  } catch (const Error&) {
    throw Error(ErrorKind::Io, "corrupt kernel header: " + bin.string());
  }
  is.read(reinterpret_cast<char*>(k.values().data()), static_cast<std::streamsize>(k.values().size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(k.windings().data()),
          static_cast<std::streamsize>(k.windings().size() * sizeof(std::int32_t)));
  if (!is) throw Error(ErrorKind::Io, "truncated kernel table: " + bin.string());
  return k;
}

Kernel load_or_compute_kernel(const Model& model, const OneForm& form, const KernelSpec& spec,
                              const std::filesystem::path& cache_dir) {
  std::filesystem::path dir = cache_dir;
  if (dir.empty())
    if (const char* env = std::getenv("WEAKKAM_CACHE_DIR"); env && *env) dir = env;
  // Custom models serialize by name only, so their hash does not identify them.
  const std::string model_text = model->to_json().dump();
  if (dir.empty() || model_text.find("\"custom\"") != std::string::npos) return compute_kernel(model, form, spec);

  check_spec(model, form, spec);
  const std::string key = kernel_cache_key(model, form, spec);
  const std::filesystem::path bin = dir / ("kernel-" + key + ".bin");
  if (std::filesystem::exists(bin)) {
    try {
      Kernel k = read_kernel(bin);
      if (k.dim() == model->dim() && k.points_per_axis() == spec.points_per_axis && k.dt() == spec.dt) return k;
    } catch (const Error&) {
      // Unreadable entries are recomputed and overwritten.
    }
  }
  Kernel k = compute_kernel(model, form, spec);
  std::filesystem::create_directories(dir);
  write_kernel(bin, k);
  nlohmann::json side = {{"key", key},
                         {"format_version", kFormatVersion},
                         {"grid", {{"dim", k.dim()}, {"points_per_axis", k.points_per_axis()}}},
                         {"tau", k.tau()},
                         {"dt", k.dt()},
                         {"winding_radius", spec.winding_radius},
                         {"model", model->to_json()},
                         {"form", form.to_json()}};
  std::ofstream(dir / ("kernel-" + key + ".json")) << side.dump(2) << '\n';
  return k;
}

// ---------------------------------------------------------------------------
// Lax-Oleinik

namespace {

void check_field(const Kernel& kernel, const GridField& u) {
  if (u.size() != kernel.size() || u.dim != kernel.dim()) throw Error(ErrorKind::BadInput, "field does not match kernel");
}

}  // namespace

GridField lax_oleinik_step_serial(const Kernel& kernel, const GridField& u) {
  check_field(kernel, u);
  GridField out = u;
  const std::size_t n = kernel.size();
  for (std::size_t y = 0; y < n; ++y) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < n; ++x) m = std::min(m, u[x] + kernel(x, y));
    out[y] = m;
  }
  return out;
}

// Targets are split into blocks; within a block the sources run in the outer
// loop so each kernel row segment is read contiguously.
GridField lax_oleinik_step(const Kernel& kernel, const GridField& u) {
  check_field(kernel, u);
  GridField out = u;
  const long n = static_cast<long>(kernel.size());
  constexpr long kBlock = 64;
  const double* h = kernel.values().data();
#pragma omp parallel for schedule(static)
  for (long b = 0; b < n; b += kBlock) {
    const long e = std::min(n, b + kBlock);
    double acc[kBlock];
    std::fill(acc, acc + (e - b), std::numeric_limits<double>::infinity());
    for (long x = 0; x < n; ++x) {
      const double ux = u.values[static_cast<std::size_t>(x)];
      const double* row = h + x * n;
      for (long y = b; y < e; ++y) acc[y - b] = std::min(acc[y - b], ux + row[y]);
    }
    for (long y = b; y < e; ++y) out.values[static_cast<std::size_t>(y)] = acc[y - b];
  }
  return out;
}

GridField lax_oleinik_step(const Model& model, const OneForm& form, const GridField& u, double tau,
                           int points_per_axis) {
  KernelSpec spec;
  spec.tau = tau;
  spec.points_per_axis = points_per_axis;
  return lax_oleinik_step(load_or_compute_kernel(model, form, spec), u);
}

WeakKamSolution solve_weak_kam(const Kernel& kernel, const WeakKamOptions& opts) {
  if (opts.anchor >= kernel.size()) throw Error(ErrorKind::BadInput, "anchor outside the grid");
  if (opts.max_sweeps < 1 || !(opts.tolerance > 0.0)) throw Error(ErrorKind::BadInput, "iteration limits");
  WeakKamSolution s;
  s.anchor = opts.anchor;
  s.tau = kernel.tau();
  s.u = opts.initial ? *opts.initial : GridField(kernel.dim(), kernel.points_per_axis());
  check_field(kernel, s.u);
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    GridField next = lax_oleinik_step(kernel, s.u);
    const double shift = next[opts.anchor];
    double res = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] -= shift;
      res = std::max(res, std::abs(next[i] - s.u[i]));
    }
    s.u = std::move(next);
    s.residual = res;
    s.residual_history.push_back(res);
    s.sweeps = sweep;
    s.alpha_estimate = -shift / kernel.tau();
    if (res <= opts.tolerance) return s;
  }
  std::string msg = "Lax-Oleinik iteration stalled after " + std::to_string(opts.max_sweeps) + " sweeps; residuals";
  const std::size_t first = s.residual_history.size() > 8 ? s.residual_history.size() - 8 : 0;
  for (std::size_t i = first; i < s.residual_history.size(); ++i) msg += " " + fmt12(s.residual_history[i]);
  throw Error(ErrorKind::NotConverged, msg);
}

WeakKamSolution solve_weak_kam(const Model& model, const OneForm& form, const WeakKamOptions& opts) {
  return solve_weak_kam(load_or_compute_kernel(model, form, opts.kernel, opts.cache_dir), opts);
}

// ---------------------------------------------------------------------------
// Subsolution residual

ResidualField subsolution_residual(const Model& model, const OneForm& form, const GridField& u, double alpha_c,
                                   const std::vector<Vec>& aubry, double exclusion_radius) {
  if (u.dim != model->dim() || form.dim() != model->dim()) throw Error(ErrorKind::BadInput, "field dimension");
  const int d = u.dim;
  const double h = u.step();
  const std::size_t n = u.size();
  std::vector<Vec> left(n), right(n);
  std::vector<double> jumps;
  jumps.reserve(n * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const IVec idx = u.multi_index(i);
    left[i].resize(d);
    right[i].resize(d);
    for (int a = 0; a < d; ++a) {
      IVec lo = idx, hi = idx;
      --lo[a];
      ++hi[a];
      left[i][a] = (u[i] - u[u.index(lo)]) / h;
      right[i][a] = (u[u.index(hi)] - u[i]) / h;
      jumps.push_back(std::abs(right[i][a] - left[i][a]));
    }
  }
  std::vector<double> sorted = jumps;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  const double cut = std::max(10.0 * sorted[sorted.size() / 2], 1e-8);

  ResidualField r;
  r.field.assign(n, 0.0);
  r.kinks.assign(n, false);
  r.max_residual = -std::numeric_limits<double>::infinity();
  r.strict_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = u.node(i);
    const Vec eta = form.eval(x);
    int kinked = 0;
    for (int a = 0; a < d; ++a)
      if (jumps[i * static_cast<std::size_t>(d) + a] > cut) kinked |= 1 << a;
    r.kinks[i] = kinked != 0;
    auto H = [&](const Vec& g) { return fenchel_hamiltonian(*model, CotangentPoint{x, eta + g}) - alpha_c; };
    if (!kinked) {
      r.field[i] = H(0.5 * (left[i] + right[i]));
    } else {
      // Every choice of one-sided difference along the kinked axes.
      double worst = -std::numeric_limits<double>::infinity();
      for (int pick = 0; pick < (1 << d); ++pick) {
        if ((pick & ~kinked) != 0) continue;
        Vec g = 0.5 * (left[i] + right[i]);
        for (int a = 0; a < d; ++a)
          if (kinked & (1 << a)) g[a] = (pick & (1 << a)) ? right[i][a] : left[i][a];
        worst = std::max(worst, H(g));
      }
      r.field[i] = worst;
      continue;
    }
    r.max_residual = std::max(r.max_residual, r.field[i]);
    bool far = true;
    for (const Vec& z : aubry) far = far && torus_distance(x, z) > exclusion_radius;
    if (far) r.strict_margin = std::min(r.strict_margin, -r.field[i]);
  }
  if (!std::isfinite(r.strict_margin)) r.strict_margin = std::numeric_limits<double>::quiet_NaN();
  return r;
}

// ---------------------------------------------------------------------------
// Calibrated orbits

CalibratedOrbit extract_calibrated_orbit(const Model& model, const OneForm& form, const Kernel& kernel,
                                         const WeakKamSolution& solution, const Vec& x0, int steps,
                                         double tie_tolerance) {
  const GridField& u = solution.u;
  check_field(kernel, u);
  if (x0.size() != u.dim || steps < 1) throw Error(ErrorKind::BadInput, "orbit start");
  const ActionSolver solver(model, form, DiscretizationPolicy{kernel.dt(), 2, 1 << 16, false});
  const double tau = kernel.tau();
  const std::size_t n = kernel.size();

  IVec start(u.dim);
  for (int a = 0; a < u.dim; ++a) start[a] = static_cast<int>(std::lround(wrap_unit(x0)[a] * u.n));
  std::size_t y = u.index(start);

  CalibratedOrbit out;
  // Segments are collected from the end backwards, then laid out on the lift.
  std::vector<LiftedPath> segments;
  for (int s = 0; s < steps; ++s) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < n; ++x) m = std::min(m, u[x] + kernel(x, y));
    std::vector<std::size_t> tied;
    for (std::size_t x = 0; x < n; ++x)
      if (u[x] + kernel(x, y) <= m + tie_tolerance * (1.0 + std::abs(m))) tied.push_back(x);
    const auto lex = [&](std::size_t a, std::size_t b) {
      const Vec pa = u.node(a), pb = u.node(b);
      return std::lexicographical_compare(pa.data(), pa.data() + pa.size(), pb.data(), pb.data() + pb.size());
    };
    const std::size_t x = *std::min_element(tied.begin(), tied.end(), lex);
    if (tied.size() > 1) out.ties.push_back(tied);
    out.calibration_defects.push_back(std::abs(u[y] - u[x] - kernel(x, y) - solution.alpha_estimate * tau));
    segments.push_back(solver.solve(u.node(x), u.node(y), kernel.winding(x, y), tau).path);
    y = x;
  }

  Orbit& o = out.orbit;
  o.dim = u.dim;
  Vec anchor = u.node(u.index(start));
  std::vector<Vec> rev;  // positions from the end backwards
  for (const LiftedPath& p : segments) {
    const Vec shift = anchor - p.nodes.back();
    for (int k = p.segments(); k >= 1; --k) rev.push_back(p.nodes[k] + shift);
    anchor = p.nodes.front() + shift;
  }
  rev.push_back(anchor);
  o.positions.assign(rev.rbegin(), rev.rend());
  const std::size_t m = o.positions.size();
  const double h = segments.front().step();
  for (std::size_t i = 0; i < m; ++i) o.times.push_back(-static_cast<double>(m - 1 - i) * h);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == m ? i : i + 1;
    const Vec v = (o.positions[b] - o.positions[a]) / (o.times[b] - o.times[a]);
    o.velocities.push_back(v);
    o.energies.push_back(energy(*model, wrap_unit(o.positions[i]), v));
  }
  return out;
}

void write_solution_csv(std::ostream& os, const GridField& u, const ResidualField& residual) {
  std::vector<std::string> head;
  for (int a = 0; a < u.dim; ++a) head.push_back("x" + std::to_string(a + 1));
  head.insert(head.end(), {"u", "residual", "kink"});
  write_csv_row(os, head);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Vec x = u.node(i);
    std::vector<std::string> row;
    for (int a = 0; a < u.dim; ++a) row.push_back(fmt12(x[a]));
    row.push_back(fmt12(u[i]));
    row.push_back(i < residual.field.size() ? fmt12(residual.field[i]) : "");
    row.push_back(i < residual.kinks.size() && residual.kinks[i] ? "1" : "0");
    write_csv_row(os, row);
  }
}

Model time_reversed(const Model& model) {
  CustomCallbacks cb;
  cb.name = "time_reversed";
  cb.dim = model->dim();
  cb.reversible = model->reversible();
  cb.value = [model](const Vec& x, const Vec& v) { return model->value(x, -v); };
  cb.grad_x = [model](const Vec& x, const Vec& v) { return model->grad_x(x, -v); };
  cb.grad_v = [model](const Vec& x, const Vec& v) { return Vec(-model->grad_v(x, -v)); };
  cb.hess_vv = [model](const Vec& x, const Vec& v) { return model->hess_vv(x, -v); };
  return make_custom(std::move(cb));
}

}  // namespace weakkam
