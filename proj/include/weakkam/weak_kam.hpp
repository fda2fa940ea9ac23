#pragma once

#include "weakkam/action.hpp"
#include "weakkam/dynamics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace weakkam {

/// Periodic field on the uniform grid with n nodes per axis. Node i has
/// coordinates idx / n with axis 0 varying fastest.
struct GridField {
  int dim = 1;
  int n = 0;
  std::vector<double> values;

  GridField() = default;
  GridField(int dim, int n, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  double step() const { return 1.0 / n; }
  Vec node(std::size_t i) const;
  std::size_t index(const IVec& idx) const;  ///< indices are wrapped
  IVec multi_index(std::size_t i) const;
  /// Multilinear interpolation at a point of the torus.
  double interpolate(const Vec& x) const;
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

struct KernelSpec {
  int points_per_axis = 256;
  double tau = 1.0;
  double dt = 0.01;
  /// Classes within this sup-distance of the straight-line proxy's best
  /// class; the box walks outward while the best class lies on its boundary.
  int winding_radius = 1;
};

/// h_{eta,tau}(x_i, y_j) for all pairs of grid nodes, with the winding class
/// of each minimizer.
class Kernel {
 public:
  Kernel() = default;
  Kernel(int dim, int n, double tau, double dt);

  int dim() const { return dim_; }
  int points_per_axis() const { return n_; }
  std::size_t size() const { return size_; }
  double tau() const { return tau_; }
  double dt() const { return dt_; }

  double operator()(std::size_t from, std::size_t to) const { return h_[from * size_ + to]; }
  double& at(std::size_t from, std::size_t to) { return h_[from * size_ + to]; }
  IVec winding(std::size_t from, std::size_t to) const;
  void set_winding(std::size_t from, std::size_t to, const IVec& w);

  const std::vector<double>& values() const { return h_; }
  const std::vector<std::int32_t>& windings() const { return w_; }
  std::vector<double>& values() { return h_; }
  std::vector<std::int32_t>& windings() { return w_; }

 private:
  int dim_ = 1;
  int n_ = 0;
  std::size_t size_ = 0;
  double tau_ = 1.0;
  double dt_ = 0.01;
  std::vector<double> h_;
  std::vector<std::int32_t> w_;
};

/// Rows are independent: OpenMP parallel over source nodes. Each row walks
/// its targets in order and warm-starts every class from the previous target.
Kernel compute_kernel(const Model& model, const OneForm& form, const KernelSpec& spec = {});
/// Same rows computed one after another; the reference for the parallel path.
Kernel compute_kernel_serial(const Model& model, const OneForm& form, const KernelSpec& spec = {});

/// Hex digest over the model, the form, the spec and the format version.
std::string kernel_cache_key(const Model& model, const OneForm& form, const KernelSpec& spec);

/// Reads <dir>/kernel-<key>.bin when present and consistent; otherwise
/// computes, then writes the table and a JSON sidecar. With no directory
/// (empty argument and WEAKKAM_CACHE_DIR unset) nothing touches the disk.
Kernel load_or_compute_kernel(const Model& model, const OneForm& form, const KernelSpec& spec = {},
                              const std::filesystem::path& cache_dir = {});

void write_kernel(const std::filesystem::path& bin, const Kernel& k);
/// Throws Io on a missing, truncated or mismatched file.
Kernel read_kernel(const std::filesystem::path& bin);

/// (T u)(y) = min_x u(x) + h(x, y). Parallel over targets.
GridField lax_oleinik_step(const Kernel& kernel, const GridField& u);
GridField lax_oleinik_step_serial(const Kernel& kernel, const GridField& u);
/// Builds or loads the kernel for tau, then applies one step.
GridField lax_oleinik_step(const Model& model, const OneForm& form, const GridField& u, double tau,
                           int points_per_axis = 256);

struct WeakKamOptions {
  KernelSpec kernel;
  std::size_t anchor = 0;
  double tolerance = 1e-3;
  int max_sweeps = 2000;
  /// Starting field; zero when absent. A field that is large away from one
  /// node converges to the barrier from that node.
  std::optional<GridField> initial;
  std::filesystem::path cache_dir;
};

/// Negative-type weak KAM solution, normalized to u(anchor) = 0.
struct WeakKamSolution {
  GridField u;
  double alpha_estimate = 0.0;
  double residual = 0.0;  ///< max |T u - u + alpha tau|
  int sweeps = 0;
  std::vector<double> residual_history;
  std::size_t anchor = 0;
  double tau = 1.0;
};

/// Iterates u <- T u - (T u)(anchor). Throws NotConverged.
WeakKamSolution solve_weak_kam(const Kernel& kernel, const WeakKamOptions& opts = {});
WeakKamSolution solve_weak_kam(const Model& model, const OneForm& form, const WeakKamOptions& opts = {});

struct ResidualField {
  double max_residual = 0.0;  ///< over nodes that are not kinks
  std::vector<double> field;  ///< H(x, eta + du) - alpha
  std::vector<bool> kinks;
  /// min of alpha - H over non-kink nodes farther than the exclusion radius
  /// from the given Aubry points; NaN when no node qualifies.
  double strict_margin = 0.0;
};

/// Centered differences; a node is a kink when some axis has one-sided
/// differences disagreeing by more than 10 times their median disagreement.
/// At kinks the field holds the larger one-sided value.
ResidualField subsolution_residual(const Model& model, const OneForm& form, const GridField& u, double alpha_c,
                                   const std::vector<Vec>& aubry = {}, double exclusion_radius = 0.05);

struct CalibratedOrbit {
  Orbit orbit;  ///< times run from -steps * tau to 0, ending at the start node
  /// Per step |u(y) - u(x) - h(x, y) - alpha tau|.
  std::vector<double> calibration_defects;
  /// Steps where several sources attained the minimum within tolerance; the
  /// lexicographically smallest node was taken.
  std::vector<std::vector<std::size_t>> ties;
};

/// Backward characteristic from the grid node nearest x0: repeatedly the
/// argmin x of u(x) + h(x, y), joined by the minimizing segments.
CalibratedOrbit extract_calibrated_orbit(const Model& model, const OneForm& form, const Kernel& kernel,
                                         const WeakKamSolution& solution, const Vec& x0, int steps,
                                         double tie_tolerance = 1e-9);

/// Columns x_1..x_d, u, residual, kink.
void write_solution_csv(std::ostream& os, const GridField& u, const ResidualField& residual);

/// L(x, -v). Its negative-type solutions at -c give the positive-type
/// solutions of L at c up to sign.
Model time_reversed(const Model& model);

}  // namespace weakkam
