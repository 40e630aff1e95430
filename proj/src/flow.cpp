#include "rbflow/flow.hpp"

#include "rbflow/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace rbflow {

void FlowConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("flow_pde: " + what); };
  if (n < 2) fail("n must be at least 2");
  if (!(rho < 1.0 / (2.0 * (n - 1)))) fail("rho must be below 1/(2(n-1)) for PDE runs");
  if (model == CurvatureModel::finite_difference && static_cast<int>(dims.size()) != n)
    fail("grid must have n axes");
  for (int d : dims)
    if (d < 1) fail("grid dims must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (!(cfl > 0.0 && cfl <= 0.5)) fail("cfl must lie in (0, 0.5]");
  if (!(t_end > 0.0)) fail("t_end must be positive");
  if (!(blow_up_threshold > 0.0)) fail("blow_up_threshold must be positive");
  if (sample_every < 1) fail("sample_every must be at least 1");
}

UhlenbeckFrame UhlenbeckFrame::identity(std::size_t points, int n) {
  return {std::vector<Matrix>(points, Matrix::Identity(n, n))};
}

namespace {

CurvatureBundle homogeneous_curvature(const MetricField& g) {
  g.validate();
  const int n = g.n();
  const Grid& grid = g.grid();
  CurvatureBundle cb;
  cb.ginv = g.inverse();
  cb.gamma = TensorField(grid, n, 3);
  cb.riem = TensorField(grid, n, 4);
  cb.ric = TensorField(grid, n, 2);
  cb.scal = TensorField(grid, n, 0);
  cb.weyl = TensorField(grid, n, 4);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double c = std::pow(g[p].determinant(), 1.0 / n);
    const FourTensord rm = (0.5 / c) * kulkarni_nomizu<double>(g[p], g[p]);
    const Matrix ric = ricci_contraction<double>(rm, cb.ginv[p]);
    set_fiber_four(cb.riem, p, rm);
    set_fiber_matrix(cb.ric, p, ric);
    cb.scal(p, 0) = trace_with<double>(cb.ginv[p], ric);
    if (n >= 3) set_fiber_four(cb.weyl, p, weyl_tensor<double>(rm, g[p], cb.ginv[p]));
  }
  return cb;
}

std::vector<Matrix> axpy(const std::vector<Matrix>& x, double a, const std::vector<Matrix>& y) {
  std::vector<Matrix> out(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) out[p] = x[p] + a * y[p];
  return out;
}

MetricField symmetric_metric(const Grid& grid, std::vector<Matrix> v) {
  for (auto& m : v) m = 0.5 * (m + m.transpose()).eval();
  return MetricField(grid, std::move(v));
}

double sup_riemann(const CurvatureBundle& cb) {
  double s = 0.0;
  for (std::size_t p = 0; p < cb.riem.points(); ++p)
    s = std::max(s, tensor_norm_sq(cb.riem.at(p), cb.riem.n(), 4, cb.ginv[p]));
  return std::sqrt(s);
}

double integral(const std::vector<double>& f, const std::vector<double>& density, double cell) {
  double acc = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) acc += f[p] * density[p];
  return acc * cell;
}

}  // namespace

CurvatureBundle curvature_for(const MetricField& g, CurvatureModel model) {
  return model == CurvatureModel::round_sphere ? homogeneous_curvature(g) : compute_curvature(g);
}

FlowState make_state(double t, MetricField g, CurvatureModel model, bool with_frame) {
  FlowState s;
  s.t = t;
  s.curv = curvature_for(g, model);
  if (with_frame) s.frame = UhlenbeckFrame::identity(g.points(), g.n());
  s.g = std::move(g);
  return s;
}

std::vector<Matrix> rb_rhs(const FlowState& s, double rho) {
  std::vector<Matrix> out(s.g.points());
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = -2.0 * (fiber_matrix(s.curv.ric, p) - rho * s.curv.scal(p, 0) * s.g[p]);
  return out;
}

std::vector<Matrix> uhlenbeck_rhs(const UhlenbeckFrame& frame, const CurvatureBundle& curv, const MetricField&,
                                  double rho) {
  std::vector<Matrix> out(frame.phi.size());
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = (curv.ginv[p] * fiber_matrix(curv.ric, p) - rho * curv.scal(p, 0) * Matrix::Identity(curv.ric.n(), curv.ric.n())) *
             frame.phi[p];
  return out;
}

UhlenbeckFrame uhlenbeck_step(const UhlenbeckFrame& frame, const CurvatureBundle& curv, const MetricField& g,
                              double rho, double dt) {
  auto f = [&](const std::vector<Matrix>& phi) { return uhlenbeck_rhs({phi}, curv, g, rho); };
  const auto k1 = f(frame.phi);
  const auto k2 = f(axpy(frame.phi, 0.5 * dt, k1));
  const auto k3 = f(axpy(frame.phi, 0.5 * dt, k2));
  const auto k4 = f(axpy(frame.phi, dt, k3));
  UhlenbeckFrame out{frame.phi};
  for (std::size_t p = 0; p < out.phi.size(); ++p) out.phi[p] += dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
  return out;
}

double uhlenbeck_defect(const UhlenbeckFrame& frame, const MetricField& g, const MetricField& g0) {
  double d = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p)
    d = std::max(d, (frame.phi[p].transpose() * g[p] * frame.phi[p] - g0[p]).cwiseAbs().maxCoeff());
  return d;
}

FlowState step(const FlowState& s, double rho, double dt, CurvatureModel model) {
  const Grid& grid = s.g.grid();
  const bool framed = s.frame.has_value();
  struct Stage {
    std::vector<Matrix> dg, dphi;
  };
  auto eval = [&](const FlowState& st) {
    Stage k;
    k.dg = rb_rhs(st, rho);
    if (framed) k.dphi = uhlenbeck_rhs(*st.frame, st.curv, st.g, rho);
    return k;
  };
  auto advance = [&](const Stage& k, double a) {
    FlowState st;
    st.t = s.t + a;
    st.g = symmetric_metric(grid, axpy(s.g.values(), a, k.dg));
    st.curv = curvature_for(st.g, model);
    if (framed) st.frame = UhlenbeckFrame{axpy(s.frame->phi, a, k.dphi)};
    return st;
  };
  const Stage k1 = eval(s);
  const Stage k2 = eval(advance(k1, 0.5 * dt));
  const Stage k3 = eval(advance(k2, 0.5 * dt));
  const Stage k4 = eval(advance(k3, dt));
  std::vector<Matrix> g = s.g.values();
  for (std::size_t p = 0; p < g.size(); ++p) g[p] += dt / 6.0 * (k1.dg[p] + 2.0 * k2.dg[p] + 2.0 * k3.dg[p] + k4.dg[p]);
  FlowState out;
  out.t = s.t + dt;
  out.g = symmetric_metric(grid, std::move(g));
  out.curv = curvature_for(out.g, model);
  if (framed) {
    UhlenbeckFrame f{s.frame->phi};
    for (std::size_t p = 0; p < f.phi.size(); ++p)
      f.phi[p] += dt / 6.0 * (k1.dphi[p] + 2.0 * k2.dphi[p] + 2.0 * k3.dphi[p] + k4.dphi[p]);
    out.frame = std::move(f);
  }
  return out;
}

double choose_dt(const FlowState& s, const FlowConfig& c) {
  if (c.dt_policy == DtPolicy::fixed) return c.dt;
  const double h = c.model == CurvatureModel::round_sphere ? 1.0 : s.g.grid().min_spacing();
  return std::min(c.dt, c.cfl * h * h / (1.0 + sup_riemann(s.curv)));
}

std::string to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::completed: return "completed";
    case FlowStatus::blow_up: return "blow_up";
    case FlowStatus::positivity_lost: return "positivity_lost";
  }
  return "?";
}

double energy_beta(int n, double rho) { return std::min(1.0, 1.0 - 2.0 * (n - 1) * rho); }

MonitorSample monitor(const FlowState& s, double rho, int energy_k, const MetricField* g0) {
  MonitorSample m;
  m.t = s.t;
  const int n = s.g.n();
  const auto density = s.g.volume_density();
  const double cell = s.g.grid().cell_volume();
  const auto& scal = s.curv.scal.data();
  m.r_min = *std::min_element(scal.begin(), scal.end());
  m.r_max = *std::max_element(scal.begin(), scal.end());
  m.volume = integral(std::vector<double>(density.size(), 1.0), density, cell);
  m.total_scalar = integral(scal, density, cell);
  const auto riem_sq = pointwise_norm_sq(s.curv.riem, s.curv.ginv);
  m.sup_riem = std::sqrt(*std::max_element(riem_sq.begin(), riem_sq.end()));
  m.riem_l2_sq = integral(riem_sq, density, cell);
  if (g0 && s.frame) m.uhlenbeck_defect = uhlenbeck_defect(*s.frame, s.g, *g0);
  if (energy_k >= 0) {
    const double beta = energy_beta(n, rho);
    const double weight = 4.0 * std::abs(rho) / (1.0 - 2.0 * (n - 1) * rho);
    TensorField dr = s.curv.riem, ds = s.curv.scal;
    double fact = 1.0;
    for (int k = 0; k <= energy_k; ++k) {
      if (k > 0) {
        dr = covariant_derivative(dr, s.curv.gamma);
        ds = covariant_derivative(ds, s.curv.gamma);
        fact *= k;
      }
      const double er = integral(pointwise_norm_sq(dr, s.curv.ginv), density, cell);
      const double es = integral(pointwise_norm_sq(ds, s.curv.ginv), density, cell);
      m.grad_riem_l2_sq.push_back(er);
      m.grad_scal_l2_sq.push_back(es);
      m.energy_a.push_back(er + weight * es);
      const double prev = k == 0 ? 0.0 : m.energy_f.back();
      m.energy_f.push_back(prev + std::pow(beta * s.t, k) / fact * m.energy_a.back());
    }
  }
  return m;
}

FlowResult run(const FlowConfig& c, const MetricField& g0) {
  c.validate();
  if (g0.n() != c.n) throw std::invalid_argument("flow_pde: metric dimension differs from config n");
  if (c.model == CurvatureModel::finite_difference && g0.grid().dims() != c.dims)
    throw std::invalid_argument("flow_pde: metric grid differs from config dims");
  FlowResult res;
  FlowState s;
  try {
    s = make_state(0.0, g0, c.model, c.uhlenbeck);
  } catch (const DegenerateMetricError& e) {
    res.status = FlowStatus::positivity_lost;
    res.message = e.what();
    return res;
  }
  auto sample = [&](const FlowState& st) {
    res.samples.push_back(monitor(st, c.rho, c.energy_k, &g0));
    if (c.keep_snapshots) res.snapshots.push_back(st);
  };
  sample(s);
  const double t_eps = 1e-12 * std::max(1.0, c.t_end);
  while (true) {
    const double sup = sup_riemann(s.curv);
    if (sup > c.blow_up_threshold || !std::isfinite(sup)) {
      res.status = FlowStatus::blow_up;
      res.message = "flow_pde: sup|Riem| = " + std::to_string(sup) + " exceeds threshold at t = " + std::to_string(s.t);
      break;
    }
    if (s.t >= c.t_end - t_eps) break;
    double dt = choose_dt(s, c);
    if (s.t + dt > c.t_end) dt = c.t_end - s.t;
    try {
      s = step(s, c.rho, dt, c.model);
    } catch (const DegenerateMetricError& e) {
      res.status = FlowStatus::positivity_lost;
      res.message = std::string(e.what()) + " during the step from t = " + std::to_string(s.t);
      break;
    }
    ++res.steps;
    if (res.steps % c.sample_every == 0) sample(s);
  }
  if (res.samples.back().t != s.t) sample(s);
  res.last_good_time = s.t;
  res.final_state = std::move(s);
  return res;
}

SphereSolution sphere_solution(double c0, int n, double rho, double t) {
  if (!(c0 > 0.0)) throw std::invalid_argument("flow_pde: sphere needs c0 > 0");
  if (n < 2) throw std::invalid_argument("flow_pde: sphere needs n >= 2");
  if (rho > 1.0 / n) throw std::invalid_argument("flow_pde: sphere reduction needs rho <= 1/n");
  if (t < 0.0) throw std::invalid_argument("flow_pde: sphere needs t >= 0");
  const double rate = 2.0 * (n - 1) * (1.0 - n * rho);
  SphereSolution s;
  s.extinction = rate > 0.0 ? c0 / rate : std::numeric_limits<double>::infinity();
  if (t >= s.extinction) throw std::invalid_argument("flow_pde: sphere is extinct at t = " + std::to_string(t));
  s.c = c0 - rate * t;
  s.scalar = n * (n - 1) / s.c;
  const double alpha = n * (n - 1) / c0;
  s.scalar_lower_bound = n * alpha / (n - 2.0 * (1.0 - n * rho) * alpha * t);
  return s;
}

double extinction_bound(int n, double rho, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("flow_pde: extinction bound needs alpha > 0");
  return n / (2.0 * (1.0 - n * rho) * alpha);
}

MetricField sphere_fiber(double c0, int n) {
  return MetricField(Grid(std::vector<int>(n, 1)), std::vector<Matrix>(1, c0 * Matrix::Identity(n, n)));
}

TensorField conformal2d_rhs(const TensorField& u, double rho) {
  if (u.rank() != 0 || u.grid().dim() != 2) throw std::invalid_argument("conformal2d_rhs: scalar field on a 2D grid required");
  TensorField out = flat_laplacian(u);
  for (std::size_t p = 0; p < u.points(); ++p) out(p, 0) *= (1.0 - 2.0 * rho) * std::exp(-2.0 * u(p, 0));
  return out;
}

MetricField conformal_metric(const TensorField& u) {
  std::vector<Matrix> g(u.points());
  for (std::size_t p = 0; p < g.size(); ++p) g[p] = std::exp(2.0 * u(p, 0)) * Matrix::Identity(2, 2);
  return MetricField(u.grid(), std::move(g));
}

MetricField random_perturbation(const Grid& grid, int n, double amp, unsigned seed, int max_mode) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> mode(-max_mode, max_mode);
  std::uniform_real_distribution<double> u(-1.0, 1.0), phase(0.0, kTwoPi);
  constexpr int terms = 3;
  struct Term {
    std::vector<int> k;
    double a, ph;
  };
  std::vector<std::vector<Term>> comps(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int t = 0; t < terms; ++t) {
        Term term{std::vector<int>(grid.dim()), u(rng), phase(rng)};
        do {
          for (auto& k : term.k) k = mode(rng);
        } while (std::all_of(term.k.begin(), term.k.end(), [](int k) { return k == 0; }));
        comps[i * n + j].push_back(term);
      }
  std::vector<Matrix> pert(grid.size(), Matrix::Zero(n, n));
  double peak = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 0.0;
        for (const auto& term : comps[i * n + j]) {
          double arg = term.ph;
          for (int a = 0; a < grid.dim(); ++a) arg += term.k[a] * grid.coordinate(p, a);
          v += term.a * std::cos(arg);
        }
        pert[p](i, j) = pert[p](j, i) = v;
      }
    peak = std::max(peak, pert[p].cwiseAbs().maxCoeff());
  }
  std::vector<Matrix> g(grid.size());
  for (std::size_t p = 0; p < g.size(); ++p)
    g[p] = Matrix::Identity(n, n) + (peak > 0.0 ? amp / peak : 0.0) * pert[p];
  return MetricField(grid, std::move(g));
}

std::string to_string(ResidualTarget t) {
  switch (t) {
    case ResidualTarget::christoffel: return "christoffel";
    case ResidualTarget::scalar: return "scalar";
    case ResidualTarget::ricci: return "ricci";
    case ResidualTarget::riemann: return "riemann";
    case ResidualTarget::weyl: return "weyl";
    case ResidualTarget::volume: return "volume";
  }
  return "?";
}

ResidualTarget parse_residual_target(const std::string& s) {
  for (auto t : {ResidualTarget::christoffel, ResidualTarget::scalar, ResidualTarget::ricci, ResidualTarget::riemann,
                 ResidualTarget::weyl, ResidualTarget::volume})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("flow_pde: unknown residual target '" + s + "'");
}

namespace {

TensorField volume_field(const MetricField& g) {
  TensorField v(g.grid(), g.n(), 0);
  const auto d = g.volume_density();
  for (std::size_t p = 0; p < d.size(); ++p) v(p, 0) = d[p];
  return v;
}

const TensorField& pick(const FlowState& s, ResidualTarget t, TensorField& scratch) {
  switch (t) {
    case ResidualTarget::christoffel: return s.curv.gamma;
    case ResidualTarget::scalar: return s.curv.scal;
    case ResidualTarget::ricci: return s.curv.ric;
    case ResidualTarget::riemann: return s.curv.riem;
    case ResidualTarget::weyl: return s.curv.weyl;
    case ResidualTarget::volume: scratch = volume_field(s.g); return scratch;
  }
  return scratch;
}

TensorField residual_rhs(const FlowState& s, double rho, ResidualTarget target) {
  const int n = s.g.n();
  const CurvatureBundle& cb = s.curv;
  const Grid& grid = s.g.grid();
  switch (target) {
    case ResidualTarget::volume: {
      TensorField v = volume_field(s.g);
      for (std::size_t p = 0; p < v.points(); ++p) v(p, 0) *= (n * rho - 1.0) * cb.scal(p, 0);
      return v;
    }
    case ResidualTarget::scalar: {
      TensorField out = rough_laplacian(cb.scal, cb.gamma, cb.ginv);
      for (std::size_t p = 0; p < out.points(); ++p) {
        const double r = cb.scal(p, 0);
        out(p, 0) = (1.0 - 2.0 * (n - 1) * rho) * out(p, 0) +
                    2.0 * norm_sq<double>(fiber_matrix(cb.ric, p), cb.ginv[p]) - 2.0 * rho * r * r;
      }
      return out;
    }
    case ResidualTarget::ricci: {
      TensorField out = rough_laplacian(cb.ric, cb.gamma, cb.ginv);
      const TensorField hess = hessian(cb.scal, cb.gamma);
      const TensorField lap_r = trace_first_pair(hess, cb.ginv);
      for (std::size_t p = 0; p < out.points(); ++p) {
        const Matrix ric = fiber_matrix(cb.ric, p);
        const Matrix react = 2.0 * star<double>(fiber_four(cb.riem, p), ric, cb.ginv[p]) -
                             2.0 * ricci_square<double>(ric, cb.ginv[p]) -
                             (n - 2) * rho * fiber_matrix(hess, p) - rho * lap_r(p, 0) * s.g[p];
        set_fiber_matrix(out, p, fiber_matrix(out, p) + react);
      }
      return out;
    }
    case ResidualTarget::riemann: {
      TensorField out = rough_laplacian(cb.riem, cb.gamma, cb.ginv);
      const TensorField hess = hessian(cb.scal, cb.gamma);
      for (std::size_t p = 0; p < out.points(); ++p) {
        const FourTensord rm = fiber_four(cb.riem, p);
        const FourTensord react = riemann_reaction<double>(rm, cb.ginv[p], rho) -
                                  rho * kulkarni_nomizu<double>(fiber_matrix(hess, p), s.g[p]);
        set_fiber_four(out, p, fiber_four(out, p) + react);
      }
      return out;
    }
    case ResidualTarget::weyl: {
      if (n < 3) throw std::invalid_argument("flow_pde: Weyl residual needs n >= 3");
      TensorField out = rough_laplacian(cb.weyl, cb.gamma, cb.ginv);
      for (std::size_t p = 0; p < out.points(); ++p) {
        const FourTensord react = weyl_rhs_zeroth_order<double>(fiber_four(cb.weyl, p), fiber_matrix(cb.ric, p),
                                                                cb.scal(p, 0), s.g[p], cb.ginv[p], rho);
        set_fiber_four(out, p, fiber_four(out, p) + react);
      }
      return out;
    }
    case ResidualTarget::christoffel: {
      const TensorField dric = covariant_derivative(cb.ric, cb.gamma);  // (a, i, k)
      const TensorField dr = covariant_derivative(cb.scal, cb.gamma);    // (a)
      TensorField out(grid, n, 3);
      for (std::size_t p = 0; p < out.points(); ++p) {
        auto d = [&](int a, int i, int k) { return dric(p, (a * n + i) * n + k); };
        const Matrix& gi = cb.ginv[p];
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              double acc = 0.0, up_r = 0.0;
              for (int l = 0; l < n; ++l) {
                acc += gi(i, l) * (-d(j, k, l) - d(k, j, l) + d(l, j, k));
                up_r += gi(i, l) * dr(p, l);
              }
              acc += rho * ((i == k ? dr(p, j) : 0.0) + (i == j ? dr(p, k) : 0.0) - up_r * s.g[p](j, k));
              out(p, (i * n + j) * n + k) = acc;
            }
      }
      return out;
    }
  }
  throw std::logic_error("residual_rhs: unhandled target");
}

}  // namespace

Residual evolution_residual(const FlowState& prev, const FlowState& mid, const FlowState& next, double rho,
                            ResidualTarget target) {
  if (!(prev.g.grid() == mid.g.grid()) || !(mid.g.grid() == next.g.grid()))
    throw std::invalid_argument("flow_pde: residual states live on different grids");
  const double h1 = mid.t - prev.t, h2 = next.t - mid.t;
  if (!(h1 > 0.0) || std::abs(h1 - h2) > 1e-9 * h1)
    throw std::invalid_argument("flow_pde: residual states must be equally spaced in time");
  TensorField s1, s2;
  TensorField num = pick(next, target, s2) - pick(prev, target, s1);
  num *= 1.0 / (next.t - prev.t);
  const TensorField rhs = residual_rhs(mid, rho, target);
  Residual r;
  r.rhs_norm = rhs.max_abs();
  r.difference = num - rhs;
  r.value = r.difference.max_abs() / (r.rhs_norm + 1.0);
  return r;
}

}  // namespace rbflow
