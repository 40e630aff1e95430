#pragma once

#include "rbflow/integrator.hpp"

#include <array>
#include <optional>
#include <random>
#include <string>

namespace rbflow {

/// Eigenvalues of a 3D curvature operator, ordered lambda >= mu >= nu.
struct EigenState {
  double lambda = 0.0, mu = 0.0, nu = 0.0;
  double t = 0.0;

  bool ordered() const { return lambda >= mu && mu >= nu; }
  double trace() const { return lambda + mu + nu; }
  Vector vec() const { return Vector{{lambda, mu, nu}}; }
  static EigenState from_vec(const Vector& v, double t = 0.0) { return {v[0], v[1], v[2], t}; }
};

std::array<double, 3> eigen_rhs(const EigenState& s, double rho);

/// Adaptive run of the eigenvalue system; tol is both the absolute and the
/// relative local error tolerance, and the blow-up threshold is 1/tol.
Trajectory integrate_eigen(const EigenState& s0, double rho, double t_end, double tol);

EigenState eigen_state_at(const Trajectory& traj, double t);

/// 2 Q^2 + 2 Q^# - 4 rho tr(Q) Q on symmetric operators of Lambda^2.
Matrix matrix_fiber_rhs(const Matrix& q, double rho);

/// Adaptive run of the operator ODE; the state is the column-major vector of Q.
Trajectory integrate_matrix(const Matrix& q0, double rho, double t_end, double tol);

Matrix operator_at(const Trajectory& traj, double t);

enum class ConeKind { scalar_nonneg, ricci_nonneg, sec_nonneg, pinching, hamilton_ivey };

struct ConeSpec {
  ConeKind kind = ConeKind::sec_nonneg;
  double epsilon = 1.0 / 3.0;  ///< pinching
  double rho = 0.0;            ///< hamilton_ivey
  /// hamilton_ivey only: use R = 2 tr(Q) on the left of the logarithmic bound.
  bool scalar_normalization = false;

  static ConeSpec pinching(double eps) { return {ConeKind::pinching, eps, 0.0, false}; }
  static ConeSpec hamilton_ivey(double rho, bool scalar = false) { return {ConeKind::hamilton_ivey, 1.0 / 3.0, rho, scalar}; }
  void validate() const;
};

std::string to_string(const ConeSpec& c);
ConeSpec parse_cone(const std::string& name);

/// Signed margin, >= 0 exactly on the cone. The Hamilton-Ivey margin is the
/// minimum of tr + 3/tau and, where nu <= -1/tau, tr - |nu|(log(|nu| tau) - 3),
/// with tau = 1 + 2(1 - 6 rho) t; both pieces agree on nu = -1/tau.
double cone_margin(const EigenState& s, const ConeSpec& c, double t);

/// Margin of an operator state. Operators of size 3 are reduced to their sorted
/// eigenvalues; larger ones support scalar_nonneg (trace) and sec_nonneg (least eigenvalue).
double cone_margin(const Matrix& q, const ConeSpec& c, double t);

/// tr/(-nu) - log(-nu) - log(1 + 2(1 - 6 rho) t); requires nu < 0.
double hi_pinching_function(const EigenState& s, double t, double rho);

/// Default exit tolerance 1e-10 (1 + |state|).
double exit_tolerance(const Vector& state);

/// Earliest time at which the margin drops below -exit_tolerance, located by
/// bisection on the dense output. Each step is also probed at interior points.
std::optional<double> first_exit_time(const Trajectory& traj, const ConeSpec& c);

/// Random ordered start in the cone with entries of size <= scale. Roughly one
/// start in four is placed on the cone boundary. Hamilton-Ivey starts are
/// normalized to nu = -1 and ignore scale.
EigenState random_cone_start(const ConeSpec& c, std::mt19937_64& rng, double scale = 1.0);

/// One monitored run of the eigenvalue system.
struct ConeRun {
  EigenState start;
  ConeSpec cone;
  double rho = 0.0;
  RunStatus status = RunStatus::completed;
  EigenState final_state;
  std::optional<double> exit_time;
  /// min over accepted steps of margin / (1 + |state|); exit_time also probes the dense output.
  double min_scaled_margin = 0.0;
  /// min of the pinching function over samples with nu < 0 (NaN if none).
  double f_min = 0.0;
  /// Largest drop of f between consecutive samples inside nu <= -1/tau, scaled by 1 + |f|.
  double f_max_decrease = 0.0;
  /// min over samples of (lambda - mu, mu - nu), scaled by 1 + |state|.
  double min_scaled_gap = 0.0;
  double min_trace_slack = 0.0;  ///< min of tr + 3/(1 + 4(1 - 3 rho) t), scaled
};

ConeRun run_cone(const EigenState& start, double rho, const ConeSpec& c, double t_end, double tol);

}  // namespace rbflow
