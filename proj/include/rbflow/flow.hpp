#pragma once

#include "rbflow/curvature.hpp"
#include "rbflow/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rbflow {

/// How curvature is obtained from the metric.
///   finite_difference: fourth-order periodic stencils on the grid.
///   round_sphere: every point is a homogeneous fiber g = c * g_round with
///     c = det(g)^(1/n); curvature is the constant-curvature tensor with K = 1/c.
enum class CurvatureModel { finite_difference, round_sphere };

enum class DtPolicy { fixed, cfl };

struct FlowConfig {
  int n = 2;
  double rho = 0.0;
  std::vector<int> dims{32, 32};
  CurvatureModel model = CurvatureModel::finite_difference;
  DtPolicy dt_policy = DtPolicy::cfl;
  double dt = 1e-3;      ///< fixed step, or the cap on CFL steps
  double cfl = 0.1;      ///< dt = cfl h^2 / (1 + sup|Riem|)
  double t_end = 0.1;
  double blow_up_threshold = 1e6;  ///< on sup_x |Riem|_g
  bool uhlenbeck = false;
  int energy_k = -1;               ///< largest k of the energy monitors; < 0 disables
  int sample_every = 1;
  bool keep_snapshots = false;

  /// Throws invalid_argument naming the offending field.
  void validate() const;
};

struct UhlenbeckFrame {
  std::vector<Matrix> phi;
  static UhlenbeckFrame identity(std::size_t points, int n);
};

struct FlowState {
  double t = 0.0;
  MetricField g;
  CurvatureBundle curv;
  std::optional<UhlenbeckFrame> frame;
};

/// Curvature for a metric under the chosen model.
CurvatureBundle curvature_for(const MetricField& g, CurvatureModel model);
FlowState make_state(double t, MetricField g, CurvatureModel model, bool with_frame);

/// -2 (Ric - rho R g) from the cached curvature.
std::vector<Matrix> rb_rhs(const FlowState& s, double rho);

/// Ric^# phi - rho R phi with Ric^# = g^{-1} Ric.
std::vector<Matrix> uhlenbeck_rhs(const UhlenbeckFrame& frame, const CurvatureBundle& curv,
                                  const MetricField& g, double rho);

/// RK4 step of the frame with the curvature frozen at `curv`.
UhlenbeckFrame uhlenbeck_step(const UhlenbeckFrame& frame, const CurvatureBundle& curv, const MetricField& g,
                              double rho, double dt);

/// max over points of |phi^T g phi - g0|_inf.
double uhlenbeck_defect(const UhlenbeckFrame& frame, const MetricField& g, const MetricField& g0);

/// One RK4 step of (g, phi); throws DegenerateMetricError if a stage metric is not SPD.
FlowState step(const FlowState& s, double rho, double dt, CurvatureModel model);

/// dt from the policy at the current state.
double choose_dt(const FlowState& s, const FlowConfig& c);

struct MonitorSample {
  double t = 0.0;
  double r_min = 0.0, r_max = 0.0;
  double volume = 0.0;
  double total_scalar = 0.0;  ///< integral of R dmu
  double sup_riem = 0.0;      ///< max_x |Riem|_g
  double riem_l2_sq = 0.0;    ///< integral of |Riem|^2 dmu
  double uhlenbeck_defect = 0.0;
  std::vector<double> grad_riem_l2_sq;  ///< integral |nabla^k Riem|^2, k = 0..energy_k
  std::vector<double> grad_scal_l2_sq;  ///< integral |nabla^k R|^2
  std::vector<double> energy_a;         ///< A_k
  std::vector<double> energy_f;         ///< f_k
};

enum class FlowStatus { completed, blow_up, positivity_lost };
std::string to_string(FlowStatus s);

struct FlowResult {
  FlowStatus status = FlowStatus::completed;
  double last_good_time = 0.0;
  std::string message;
  int steps = 0;
  std::vector<MonitorSample> samples;
  std::vector<FlowState> snapshots;  ///< sampled states when keep_snapshots is set
  FlowState final_state;
};

/// beta = min(1, 1 - 2(n-1) rho).
double energy_beta(int n, double rho);

/// Monitors of one state; energy_k < 0 skips the derivative energies.
MonitorSample monitor(const FlowState& s, double rho, int energy_k, const MetricField* g0 = nullptr);

FlowResult run(const FlowConfig& c, const MetricField& g0);

struct SphereSolution {
  double c = 0.0;        ///< scale factor of the round metric
  double scalar = 0.0;   ///< R = n(n-1)/c
  double extinction = 0.0;
  double scalar_lower_bound = 0.0;  ///< n alpha / (n - 2(1 - n rho) alpha t), alpha = R(0)
};

/// Round sphere of radius^2 c0 under the flow; throws for t >= T or bad arguments.
SphereSolution sphere_solution(double c0, int n, double rho, double t);

/// Extinction-time bound n / (2 (1 - n rho) alpha) for R >= alpha > 0.
double extinction_bound(int n, double rho, double alpha);

/// Homogeneous model state: g = c0 Id at a single point.
MetricField sphere_fiber(double c0, int n);

/// (1 - 2 rho) e^{-2u} Delta u with the flat fourth-order Laplacian.
TensorField conformal2d_rhs(const TensorField& u, double rho);

/// e^{2u} delta on a 2D grid.
MetricField conformal_metric(const TensorField& u);

/// delta + amp * sum of random low Fourier modes, symmetric; amp relative to delta.
MetricField random_perturbation(const Grid& grid, int n, double amp, unsigned seed, int max_mode = 2);

enum class ResidualTarget { christoffel, scalar, ricci, riemann, weyl, volume };
std::string to_string(ResidualTarget t);
ResidualTarget parse_residual_target(const std::string& s);

struct Residual {
  double value = 0.0;      ///< |num - rhs|_inf / (|rhs|_inf + 1)
  double rhs_norm = 0.0;
  TensorField difference;  ///< num - rhs
};

/// Centered time difference of the target across prev/next against the evolution
/// equation at mid. The three states must share a grid and be equally spaced in t.
Residual evolution_residual(const FlowState& prev, const FlowState& mid, const FlowState& next, double rho,
                            ResidualTarget target);

}  // namespace rbflow
