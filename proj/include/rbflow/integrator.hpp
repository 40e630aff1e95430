#pragma once

#include "rbflow/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <vector>

namespace rbflow {

enum class RunStatus { completed, blow_up, cone_exit };
std::string to_string(RunStatus s);

/// Accepted steps of an adaptive run with the dense-output polynomial of each step.
struct Trajectory {
  std::vector<double> t;
  std::vector<Vector> y;
  /// Columns of dense[i] are the coefficients of the interpolant on [t[i], t[i+1]].
  std::vector<Matrix> dense;
  int steps = 0;
  int rejected = 0;
  RunStatus status = RunStatus::completed;

  double t_begin() const { return t.front(); }
  double t_final() const { return t.back(); }
  /// Dense output at any time in [t_begin, t_final].
  Vector at(double time) const;
};

using OdeRhs = std::function<Vector(double, const Vector&)>;
/// Returning true stops the run with status cone_exit after the current step.
using StopPredicate = std::function<bool(double, const Vector&)>;

struct Dopri5Options {
  double rtol = 1e-10;
  double atol = 1e-10;
  /// Runs stop with blow_up once the max-norm of the state exceeds this.
  double blow_up_threshold = 1e10;
  double initial_step = 0.0;  ///< 0 picks a step from the local scale of f
  long max_steps = 10'000'000;
  StopPredicate stop;
};

namespace detail {

// Dormand-Prince coefficients.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Hairer's continuous extension.
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;


template <class State>
double scaled_norm(const State& v, const State& y0, const State& y1, const Dopri5Options& opt) {
  const auto sc = (opt.atol + opt.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).eval();
  return std::sqrt((v.array() / sc).square().sum() / std::max<Eigen::Index>(1, v.size()));
}

}  // namespace detail

/// Dormand-Prince 5(4) with PI step control and 4th-order dense output.
/// Also reports blow_up if the step size collapses or the state goes non-finite.
/// State is any Eigen column vector type, given explicitly; fixed sizes avoid heap traffic.
template <class State, class F>
Trajectory dopri5(F&& f, double t0, const std::type_identity_t<State>& y0, double t_end, const Dopri5Options& opt) {
  using namespace detail;
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw std::invalid_argument("dopri5: tolerances must be positive");
  if (!(t_end > t0)) throw std::invalid_argument("dopri5: t_end must exceed t0");
  Trajectory tr;
  tr.t.push_back(t0);
  tr.y.push_back(y0);
  if (!y0.allFinite() || y0.cwiseAbs().maxCoeff() > opt.blow_up_threshold) {
    tr.status = RunStatus::blow_up;
    return tr;
  }
  if (opt.stop && opt.stop(t0, Vector(y0))) {
    tr.status = RunStatus::cone_exit;
    return tr;
  }

  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9, fac_min = 0.2, fac_max = 10.0;
  double t = t0;
  State y = y0;
  State k1 = f(t, y);
  double h = opt.initial_step;
  if (!(h > 0.0)) {
    // Hairer's starting step heuristic.
    const double d0 = scaled_norm<State>(y, y, y, opt), d1n = scaled_norm<State>(k1, y, y, opt);
    h = std::min((d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n, t_end - t0);
    const State f1 = f(t0 + h, State(y + h * k1));
    const double d2 = scaled_norm<State>(State(f1 - k1), y, y, opt) / h;
    const double big = std::max(d1n, d2);
    const double h1 = big <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / big, 0.2);
    h = std::min({100.0 * h, h1, t_end - t0});
  }
  double err_old = 1e-4;
  bool last_rejected = false;

  while (t < t_end) {
    if (tr.steps + tr.rejected >= opt.max_steps) throw std::runtime_error("dopri5: step budget exhausted");
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      tr.status = RunStatus::blow_up;
      return tr;
    }
    const bool final_step = t + h >= t_end;
    if (final_step) h = t_end - t;

    const State k2 = f(t + c2 * h, State(y + h * a21 * k1));
    const State k3 = f(t + c3 * h, State(y + h * (a31 * k1 + a32 * k2)));
    const State k4 = f(t + c4 * h, State(y + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const State k5 = f(t + c5 * h, State(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const State k6 = f(t + h, State(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    const State y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = f(t + h, y1);
    const State err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err = y1.allFinite() && k7.allFinite() ? scaled_norm<State>(err_vec, y, y1, opt) : 1e300;
    if (!std::isfinite(err)) err = 1e300;

    if (err <= 1.0) {
      const double fac = std::clamp(std::pow(err, expo1) / std::pow(err_old, beta) / safe,
                                    last_rejected ? 1.0 : 1.0 / fac_max, 1.0 / fac_min);
      err_old = std::max(err, 1e-4);
      Matrix r(y.size(), 5);
      r.col(0) = y;
      r.col(1) = y1 - y;
      r.col(2) = h * k1 - r.col(1);
      r.col(3) = r.col(1) - h * k7 - r.col(2);
      r.col(4) = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      const double t1 = final_step ? t_end : t + h;
      tr.dense.push_back(std::move(r));
      tr.t.push_back(t1);
      tr.y.push_back(y1);
      ++tr.steps;
      t = t1;
      y = y1;
      k1 = k7;
      last_rejected = false;
      if (y.cwiseAbs().maxCoeff() > opt.blow_up_threshold) {
        tr.status = RunStatus::blow_up;
        return tr;
      }
      if (opt.stop && opt.stop(t, Vector(y))) {
        tr.status = RunStatus::cone_exit;
        return tr;
      }
      h /= fac;
    } else {
      ++tr.rejected;
      last_rejected = true;
      h /= std::min(1.0 / fac_min, std::pow(std::min(err, 1e10), expo1) / safe);
    }
  }
  return tr;
}

inline Trajectory dopri5(const OdeRhs& f, double t0, const Vector& y0, double t_end, const Dopri5Options& opt) {
  return dopri5<Vector>(f, t0, y0, t_end, opt);
}

}  // namespace rbflow
