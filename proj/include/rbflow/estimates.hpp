#pragma once

#include "rbflow/curvature.hpp"
#include "rbflow/flow.hpp"

#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace rbflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Metric data shared by repeated norm evaluations on one grid.
struct Quadrature {
  explicit Quadrature(const MetricField& m);
  std::vector<Matrix> ginv;
  std::vector<double> density;  ///< sqrt(det g)
  double cell = 0.0;
  TensorField gamma;
};

/// (sum |T|_g^p sqrt(det g) h^n)^(1/p); p = kInf is the grid sup of |T|_g.
double lp_norm(const TensorField& t, double p, const Quadrature& q);
double lp_norm(const TensorField& t, double p, const MetricField& m);

/// nabla^0 T .. nabla^k T; derivative slots come first.
std::vector<TensorField> derivative_tower(const TensorField& t, int k, const TensorField& gamma);

/// r_j with 1/r_j = (1 - j/k)/p + (j/k)/q (1/inf = 0).
double interpolation_exponent(int j, int k, double p, double q);

/// |nabla^j T|_{r_j} / (|T|_p^(1 - j/k) |nabla^k T|_q^(j/k)); nullopt when the denominator vanishes.
std::optional<double> interpolation_ratio(const std::vector<TensorField>& tower, int j, int k, double p, double q,
                                          const Quadrature& quad);
std::optional<double> interpolation_ratio(const TensorField& t, int j, int k, double p, double q, const MetricField& m);

enum class SequenceVerdict { holds, hypothesis_violated };

struct SequenceCheck {
  SequenceVerdict verdict = SequenceVerdict::holds;
  int violated_at = -1;        ///< first j with f(j) > C sqrt(f(j-1) f(j+1))
  std::vector<double> bound;   ///< C^(j(k-j)) f(0)^(1-j/k) f(k)^(j/k)
  /// min over j of (bound_j - f_j) / bound_j; only meaningful when the hypothesis holds.
  double min_relative_slack = 0.0;
  bool conclusion_holds = true;
};

/// Checks the log-convexity hypothesis and, where it holds, the interpolated bound.
/// The conclusion is compared with a relative allowance of 4(k^2 + 4) ulp for rounding.
SequenceCheck hamilton_sequence_check(std::span<const double> f, double c);

/// Random positive sequence of length k + 1 with f(j) <= c sqrt(f(j-1) f(j+1)),
/// built from log-increments whose drops are capped by 2 log c.
std::vector<double> admissible_sequence(int k, double c, std::mt19937_64& rng);

/// Sum over |m_a| <= max_mode of random cosines with power-law amplitudes
/// (1 + |m|^2)^(-decay/2); rescaled so the grid sup is amp.
TensorField band_limited_field(const Grid& grid, int max_mode, double amp, unsigned seed, double decay = 0.0);

struct EnergyLedger {
  double beta = 1.0;
  std::vector<double> t;
  std::vector<std::vector<double>> a, f;       ///< [k][sample]
  std::vector<std::vector<double>> grad_riem;  ///< |nabla^k Riem|_2^2
  /// t^k |nabla^k Riem|_2^2 / sup_{s <= t} |Riem|_2^2.
  std::vector<std::vector<double>> smoothing_ratio;
  /// Least-squares slope of log |nabla^k Riem|_2^2 against log t over the fit window.
  std::vector<double> fitted_exponent;
  /// max over consecutive samples of (f_k(t+) - f_k(t)) / ((t+ - t) sup |Riem|_2^2).
  std::vector<double> max_growth_rate;
};

/// Throws unless the run has >= 5 samples carrying energies up to k_max.
/// Samples at t = 0 are kept in the series but skipped by the exponent fit.
EnergyLedger energy_monitor(const FlowConfig& c, const FlowResult& run, int k_max, double fit_t0 = 0.01,
                            double fit_t1 = 0.1);

struct Lem5Report {
  std::optional<double> ratio;  ///< nullopt when |T|_inf |nabla^k T|_2^2 = 0
  double lhs = 0.0;
  double rhs = 0.0;
};

/// F_g(T) = sum_{j+l=k} nabla^j T * nabla^l T * nabla^k T with unit coefficients,
/// each contraction bounded by the product of the three g-norms. Returns
/// int |F_g| / (|T|_inf |nabla^k T|_2^2).
Lem5Report lem5_check(const TensorField& t, int k, const MetricField& m);

/// |sum f D+g + sum (D-f) g| / (|sum f D+g| + |sum (D-f) g|) along one axis, with
/// one-sided differences; zero up to round-off (0 when both sums vanish).
double summation_by_parts_defect(const TensorField& f, const TensorField& g, int axis);

}  // namespace rbflow
