#pragma once

#include "weakkam/duality.hpp"
#include "weakkam/mane.hpp"

#include "json.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace weakkam {

enum class SetLabel { Mather, Aubry, Mane };

std::string_view to_string(SetLabel s);
SetLabel set_label_from_string(std::string_view s);

struct PhasePoint {
  Vec x;  ///< on [0,1)^d
  Vec v;
  double energy = 0.0;
};

/// How far the sampled set may sit from the true one.
struct SetTolerance {
  double grid_step = 0.0;      ///< spacing of the sampled base points
  double velocity_step = 0.0;  ///< spacing of sampled velocities; 0 on the energy shell
  double threshold = 0.0;      ///< LP weight cut, barrier cut or semi-static tolerance
  double energy = 0.0;         ///< bound on |E - alpha(c)| for shell sets

  /// Radius in phase space within which every true point has a sample.
  double resolution() const { return std::hypot(grid_step, velocity_step); }
};

struct PhasePointSet {
  SetLabel label = SetLabel::Mather;
  Vec c;
  std::vector<PhasePoint> points;
  SetTolerance tolerance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// Sorted distinct base points.
  std::vector<Vec> projection() const;
};

/// Mather set: atoms of the LP minimizer. The velocity grid must resolve the
/// expected velocities; a grid missing them shifts atoms by up to half a step.
struct MatherSetOptions {
  LPGridSpec grid{64, -4.0, 4.0, 65, 16};
  double weight_threshold = 1e-3;
};

PhasePointSet mather_set(const Model& model, const Vec& c, const MatherSetOptions& opts = {});

/// Shared by the Aubry and Mane sets (d = 1 only).
struct ShellSetOptions {
  int x_points = 64;
  /// Orbits are tested on [-W/2, W/2] for each window length W.
  std::vector<double> windows{1.0, 2.0, 4.0};
  /// |action - Phi| <= tolerance (1 + |Phi|).
  double semi_static_tolerance = 1e-2;
  double aubry_threshold = 3e-2;
  double orbit_dt = 1e-3;  ///< RK4 step of the reduced flow on the shell
  DiscretizationPolicy policy = exact_discrete_policy(0.02);
  PotentialOptions potential{16, 0.04, 20.0, 1, 1e-2, -1e6, 8, LoopTableOptions{4, 1, 16, 0.05, 20.0}};
  /// Stabilization at a third of the detection threshold: the discrete
  /// critical value of a rotation class is only good to about 1e-4.
  BarrierOptions barrier{5.0, 160.0, 1e-2, 2, 2};
};

/// Relative tolerance below which the shell is taken to touch v = 0.
inline constexpr double kShellTolerance = 1e-6;

/// Velocities on {E(x, .) = alpha}: v- < 0 < v+, the single value 0 when
/// E(x, 0) = alpha, none when E(x, 0) > alpha. d = 1.
std::vector<double> energy_shell_velocities(const Lagrangian& model, double x, double alpha,
                                            double tolerance = kShellTolerance);

/// Per-window defects of the orbit through (x, v).
struct WindowTest {
  double window = 0.0;
  double action = 0.0;    ///< (L_eta + alpha)-action over [-W/2, W/2]
  double forward = 0.0;   ///< Phi(gamma(-W/2), gamma(W/2))
  double backward = 0.0;  ///< Phi(gamma(W/2), gamma(-W/2))
};

/// Semi-static and static tests of single phase points, sharing one potential.
/// Orbit actions use alpha_c. Potentials and barriers are discrete, so they use
/// the critical value of the same discrete problem; otherwise a bias of order
/// dt^2 in the level grows linearly along the barrier ladder.
class OrbitTester {
 public:
  OrbitTester(const Model& model, const Vec& c, double alpha_c, const ShellSetOptions& opts = {});

  /// Either potential may be skipped; it is then NaN.
  WindowTest window(double x, double v, double W, bool with_forward = true, bool with_backward = true) const;
  /// action = Phi forward on every window.
  bool semi_static(double x, double v) const;
  /// action = -Phi backward on every window.
  bool is_static(double x, double v) const;

  const ManePotential& potential() const { return phi_; }
  double discrete_alpha() const { return alpha_discrete_; }

 private:
  bool within(double action, double phi) const;

  Model model_;
  OneForm form_;
  double alpha_;
  ShellSetOptions opts_;
  ManePotential phi_;
  double alpha_discrete_ = 0.0;
};

/// Grid points whose shell velocities pass the semi-static test.
PhasePointSet mane_set(const Model& model, const Vec& c, double alpha_c, const ShellSetOptions& opts = {});

/// Grid points with h(x, x) <= aubry_threshold, each carrying its shell
/// velocities that pass the static test. Throws NotStabilized.
PhasePointSet aubry_set(const Model& model, const Vec& c, double alpha_c, const ShellSetOptions& opts = {});

/// Largest distance from a point of a to the nearest point of b, on
/// T^d x R^d with the product metric. Infinite when b is empty and a is not.
double one_sided_hausdorff(const PhasePointSet& a, const PhasePointSet& b);
double hausdorff(const PhasePointSet& a, const PhasePointSet& b);

struct InclusionReport {
  double mather_to_aubry = 0.0;
  double aubry_to_mane = 0.0;
  double mather_aubry_tolerance = 0.0;
  double aubry_mane_tolerance = 0.0;
  double max_energy_defect = 0.0;  ///< over the Mane set
  double energy_tolerance = 0.0;
  /// Distances the other way, which measure how strict each inclusion is.
  double aubry_to_mather = 0.0;
  double mane_to_aubry = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

InclusionReport check_inclusions(const PhasePointSet& mather, const PhasePointSet& aubry, const PhasePointSet& mane,
                                 double alpha_c);

struct GraphReport {
  bool pass = true;
  /// Largest |dv| / |dx| over neighbouring pairs with distinct base points.
  double lipschitz = 0.0;
  std::optional<std::pair<PhasePoint, PhasePoint>> violation;

  nlohmann::json to_json() const;
};

/// Pairs closer than the grid step in x must differ in v by at most
/// max_slope |dx| + velocity_step.
GraphReport check_graph_property(const PhasePointSet& set, double max_slope = 50.0);

struct EquivarianceReport {
  double distance = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  PhasePointSet shifted;  ///< Mather set of L - eta.v at base_c
  PhasePointSet mapped;   ///< Mather set of L at base_c + [eta], moved by p -> p - eta(x)

  nlohmann::json to_json() const;
};

EquivarianceReport check_fiber_translation_equivariance(const Model& model, const Vec& base_c, const OneForm& eta,
                                                        const MatherSetOptions& opts = {}, double tolerance = 0.05);

/// Columns x_1..x_d, v_1..v_d, E, label, c_1..c_d.
void write_set_csv(std::ostream& os, const PhasePointSet& set);
nlohmann::json set_to_json(const PhasePointSet& set);

}  // namespace weakkam
