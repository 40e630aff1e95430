#include "rbflow/fiber_ode.hpp"

#include "rbflow/algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbflow {

std::array<double, 3> eigen_rhs(const EigenState& s, double rho) {
  const double l = s.lambda, m = s.mu, n = s.nu;
  const double tr = l + m + n;
  return {2.0 * l * l + 2.0 * m * n - 4.0 * rho * l * tr, 2.0 * m * m + 2.0 * n * l - 4.0 * rho * m * tr,
          2.0 * n * n + 2.0 * l * m - 4.0 * rho * n * tr};
}

namespace {

Dopri5Options options_for(double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("fiber_ode: tol must be positive");
  Dopri5Options opt;
  opt.rtol = opt.atol = tol;
  opt.blow_up_threshold = 1.0 / tol;
  return opt;
}

}  // namespace

Trajectory integrate_eigen(const EigenState& s0, double rho, double t_end, double tol) {
  if (!s0.ordered())
    throw std::invalid_argument("fiber_ode: start (" + std::to_string(s0.lambda) + ", " + std::to_string(s0.mu) +
                                ", " + std::to_string(s0.nu) + ") is not ordered");
  const auto f = [rho](double, const Eigen::Vector3d& y) {
    const auto d = eigen_rhs({y[0], y[1], y[2]}, rho);
    return Eigen::Vector3d(d[0], d[1], d[2]);
  };
  return dopri5<Eigen::Vector3d>(f, s0.t, Eigen::Vector3d(s0.lambda, s0.mu, s0.nu), t_end, options_for(tol));
}

EigenState eigen_state_at(const Trajectory& traj, double t) {
  if (traj.y.front().size() != 3) throw std::invalid_argument("eigen_state_at: not an eigenvalue trajectory");
  return EigenState::from_vec(traj.at(t), t);
}

Matrix matrix_fiber_rhs(const Matrix& q, double rho) { return operator_reaction<double>(q, rho); }

Trajectory integrate_matrix(const Matrix& q0, double rho, double t_end, double tol) {
  if (q0.rows() != q0.cols()) throw std::invalid_argument("fiber_ode: operator must be square");
  const Eigen::Index m = q0.rows();
  dimension_from_operator_size(static_cast<int>(m));  // throws unless m = n(n-1)/2
  const auto f = [rho, m](double, const Vector& y) {
    const Matrix d = matrix_fiber_rhs(Eigen::Map<const Matrix>(y.data(), m, m), rho);
    return Vector(Eigen::Map<const Vector>(d.data(), m * m));
  };
  return dopri5<Vector>(f, 0.0, Vector(Eigen::Map<const Vector>(q0.data(), m * m)), t_end, options_for(tol));
}

Matrix operator_at(const Trajectory& traj, double t) {
  const Vector y = traj.at(t);
  const auto m = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(y.size()))));
  if (m * m != y.size()) throw std::invalid_argument("operator_at: state is not a square operator");
  return Eigen::Map<const Matrix>(y.data(), m, m);
}

void ConeSpec::validate() const {
  if (kind == ConeKind::pinching && !(epsilon > 0.0 && epsilon <= 1.0 / 3.0 + 1e-15))
    throw std::invalid_argument("fiber_ode: pinching requires 0 < eps <= 1/3, got " + std::to_string(epsilon));
  if (kind == ConeKind::hamilton_ivey && !(rho >= 0.0 && rho < 1.0 / 6.0))
    throw std::invalid_argument("fiber_ode: hamilton_ivey requires rho in [0, 1/6), got " + std::to_string(rho));
}

std::string to_string(const ConeSpec& c) {
  std::ostringstream os;
  os.precision(17);
  switch (c.kind) {
    case ConeKind::scalar_nonneg: return "scalar_nonneg";
    case ConeKind::ricci_nonneg: return "ricci_nonneg";
    case ConeKind::sec_nonneg: return "sec_nonneg";
    case ConeKind::pinching: os << "pinching:" << c.epsilon; return os.str();
    case ConeKind::hamilton_ivey: os << "hamilton_ivey:" << c.rho; return os.str();
  }
  return "?";
}

ConeSpec parse_cone(const std::string& name) {
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  auto param = [&]() {
    if (colon == std::string::npos) throw std::invalid_argument("fiber_ode: cone '" + name + "' needs a parameter");
    return std::stod(name.substr(colon + 1));
  };
  ConeSpec c;
  if (head == "scalar_nonneg") c.kind = ConeKind::scalar_nonneg;
  else if (head == "ricci_nonneg") c.kind = ConeKind::ricci_nonneg;
  else if (head == "sec_nonneg") c.kind = ConeKind::sec_nonneg;
  else if (head == "pinching") c = ConeSpec::pinching(param());
  else if (head == "hamilton_ivey") c = ConeSpec::hamilton_ivey(param());
  else throw std::invalid_argument("fiber_ode: unknown cone '" + name + "'");
  c.validate();
  return c;
}

double cone_margin(const EigenState& s, const ConeSpec& c, double t) {
  c.validate();
  switch (c.kind) {
    case ConeKind::scalar_nonneg: return s.trace();
    case ConeKind::ricci_nonneg: return s.mu + s.nu;
    case ConeKind::sec_nonneg: return s.nu;
    case ConeKind::pinching: return (1.0 - 2.0 * c.epsilon) / (2.0 * c.epsilon) * (s.mu + s.nu) - s.lambda;
    case ConeKind::hamilton_ivey: {
      if (t < 0.0) throw std::invalid_argument("fiber_ode: hamilton_ivey needs t >= 0");
      const double tau = 1.0 + 2.0 * (1.0 - 6.0 * c.rho) * t;
      const double tr = s.trace();
      double margin = tr + 3.0 / tau;
      const double x = -s.nu;
      if (x * tau >= 1.0) {
        const double lhs = c.scalar_normalization ? 2.0 * tr : tr;
        margin = std::min(margin, lhs - x * (std::log(x * tau) - 3.0));
      }
      return margin;
    }
  }
  return 0.0;
}

double cone_margin(const Matrix& q, const ConeSpec& c, double t) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (q + q.transpose()), Eigen::EigenvaluesOnly);
  const Vector ev = es.eigenvalues();  // ascending
  if (q.rows() == 3) return cone_margin(EigenState{ev[2], ev[1], ev[0], t}, c, t);
  c.validate();
  switch (c.kind) {
    case ConeKind::scalar_nonneg: return ev.sum();
    case ConeKind::sec_nonneg: return ev[0];
    default: throw std::invalid_argument("fiber_ode: cone " + to_string(c) + " is defined for 3D operators only");
  }
}

double hi_pinching_function(const EigenState& s, double t, double rho) {
  if (!(s.nu < 0.0)) throw std::invalid_argument("fiber_ode: pinching function needs nu < 0, got " + std::to_string(s.nu));
  return s.trace() / (-s.nu) - std::log(-s.nu) - std::log(1.0 + 2.0 * (1.0 - 6.0 * rho) * t);
}

double exit_tolerance(const Vector& state) { return 1e-10 * (1.0 + state.cwiseAbs().maxCoeff()); }

namespace {

double margin_of(const Vector& y, const ConeSpec& c, double t) {
  if (y.size() == 3) return cone_margin(EigenState::from_vec(y, t), c, t);
  const auto m = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(y.size()))));
  return cone_margin(Matrix(Eigen::Map<const Matrix>(y.data(), m, m)), c, t);
}

bool outside(const Trajectory& traj, const ConeSpec& c, double t) {
  const Vector y = traj.at(t);
  return margin_of(y, c, t) < -exit_tolerance(y);
}

}  // namespace

std::optional<double> first_exit_time(const Trajectory& traj, const ConeSpec& c) {
  c.validate();
  if (outside(traj, c, traj.t_begin())) return traj.t_begin();
  constexpr int probes = 4;
  double inside_t = traj.t_begin();
  for (std::size_t i = 0; i + 1 < traj.t.size(); ++i) {
    for (int k = 1; k <= probes; ++k) {
      const double tk = k == probes ? traj.t[i + 1] : traj.t[i] + (traj.t[i + 1] - traj.t[i]) * k / probes;
      if (!outside(traj, c, tk)) {
        inside_t = tk;
        continue;
      }
      double lo = inside_t, hi = tk;
      while (hi - lo > 1e-10 * (1.0 + std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (outside(traj, c, mid) ? hi : lo) = mid;
      }
      return hi;
    }
  }
  return std::nullopt;
}

EigenState random_cone_start(const ConeSpec& c, std::mt19937_64& rng, double scale) {
  c.validate();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const bool boundary = u(rng) < 0.25;
  double l = 0.0, m = 0.0, n = 0.0;
  switch (c.kind) {
    case ConeKind::scalar_nonneg:
      do {
        std::array<double, 3> v{in(-scale, scale), in(-scale, scale), in(-scale, scale)};
        std::sort(v.begin(), v.end(), std::greater<>());
        l = v[0], m = v[1], n = boundary ? -(v[0] + v[1]) : v[2];
      } while (n > m || l + m + n < 0.0);
      break;
    case ConeKind::ricci_nonneg:
      m = in(0.0, scale);
      n = boundary ? -m : in(-m, m);
      l = in(m, scale);
      break;
    case ConeKind::sec_nonneg: {
      std::array<double, 3> v{in(0.0, scale), in(0.0, scale), boundary ? 0.0 : in(0.0, scale)};
      std::sort(v.begin(), v.end(), std::greater<>());
      l = v[0], m = v[1], n = v[2];
      break;
    }
    case ConeKind::pinching: {
      // lambda <= C (mu + nu) with lambda >= mu forces nu >= mu (1 - C) / C.
      const double cc = (1.0 - 2.0 * c.epsilon) / (2.0 * c.epsilon);
      do {
        m = in(-scale, scale);
      } while (m * (1.0 - cc) / cc > m);
      n = in(m * (1.0 - cc) / cc, m);
      l = boundary ? cc * (m + n) : in(m, cc * (m + n));
      l = std::max(l, m);
      break;
    }
    case ConeKind::hamilton_ivey: {
      n = -1.0;
      std::array<double, 2> v{in(-1.0, 1.0 + 4.0 * scale), in(-1.0, 1.0 + 4.0 * scale)};
      l = std::max(v[0], v[1]);
      m = std::min(v[0], v[1]);
      break;
    }
  }
  return {l, m, n, 0.0};
}

ConeRun run_cone(const EigenState& start, double rho, const ConeSpec& c, double t_end, double tol) {
  ConeRun run;
  run.start = start;
  run.cone = c;
  run.rho = rho;
  const Trajectory traj = integrate_eigen(start, rho, t_end, tol);
  run.status = traj.status;
  run.final_state = EigenState::from_vec(traj.y.back(), traj.t_final());
  run.exit_time = first_exit_time(traj, c);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  run.min_scaled_margin = std::numeric_limits<double>::infinity();
  run.min_scaled_gap = std::numeric_limits<double>::infinity();
  run.min_trace_slack = std::numeric_limits<double>::infinity();
  run.f_min = nan;
  run.f_max_decrease = 0.0;
  const double hi_tau_rate = 2.0 * (1.0 - 6.0 * rho);
  double f_prev = nan;
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    const EigenState s = EigenState::from_vec(traj.y[i], traj.t[i]);
    const double scale = 1.0 + traj.y[i].cwiseAbs().maxCoeff();
    run.min_scaled_gap = std::min({run.min_scaled_gap, (s.lambda - s.mu) / scale, (s.mu - s.nu) / scale});
    run.min_trace_slack =
        std::min(run.min_trace_slack, (s.trace() + 3.0 / (1.0 + 4.0 * (1.0 - 3.0 * rho) * s.t)) / scale);
    run.min_scaled_margin = std::min(run.min_scaled_margin, margin_of(traj.y[i], c, s.t) / scale);
    const double tau = 1.0 + hi_tau_rate * s.t;
    if (s.nu < 0.0 && tau > 0.0) {
      const double f = hi_pinching_function(s, s.t, rho);
      run.f_min = std::isnan(run.f_min) ? f : std::min(run.f_min, f);
      const bool regime = s.nu * tau <= -1.0;
      if (regime && !std::isnan(f_prev))
        run.f_max_decrease = std::max(run.f_max_decrease, (f_prev - f) / (1.0 + std::abs(f)));
      f_prev = regime ? f : nan;
    } else {
      f_prev = nan;
    }
  }
  return run;
}

}  // namespace rbflow
