#include "rbflow/algebra.hpp"
#include "rbflow/flow.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rbflow;

namespace {

TensorField bump(const Grid& grid, double amp) {
  return scalar_field(grid, [amp](std::span<const double> x) { return amp * std::sin(x[0]) * std::sin(x[1]); });
}

double max_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double d = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) d = std::max(d, (a[p] - b[p]).cwiseAbs().maxCoeff());
  return d;
}

FlowConfig torus_config(int points, double rho) {
  FlowConfig c;
  c.n = 2;
  c.rho = rho;
  c.dims = {points, points};
  c.t_end = 0.1;
  c.uhlenbeck = true;
  return c;
}

FlowConfig sphere_config(int n, double rho, double t_end) {
  FlowConfig c;
  c.n = n;
  c.rho = rho;
  c.dims = std::vector<int>(n, 1);
  c.model = CurvatureModel::round_sphere;
  c.dt = 1e-4;
  c.t_end = t_end;
  c.uhlenbeck = true;
  c.sample_every = 50;
  return c;
}

struct Triple {
  FlowState prev, mid, next;
};

Triple three_states(const MetricField& g0, double rho, double dt, CurvatureModel model = CurvatureModel::finite_difference) {
  Triple s;
  s.prev = make_state(0.0, g0, model, false);
  s.mid = step(s.prev, rho, dt, model);
  s.next = step(s.mid, rho, dt, model);
  return s;
}

// States at -dt, 0, dt around g0; the backward step is a single short RK4 step.
Triple centered_states(const MetricField& g0, double rho, double dt) {
  Triple s;
  s.mid = make_state(0.0, g0, CurvatureModel::finite_difference, false);
  s.prev = step(s.mid, rho, -dt, CurvatureModel::finite_difference);
  s.next = step(s.mid, rho, dt, CurvatureModel::finite_difference);
  return s;
}

double residual_of(const MetricField& g0, double rho, double dt, ResidualTarget target) {
  const Triple s = centered_states(g0, rho, dt);
  return evolution_residual(s.prev, s.mid, s.next, rho, target).value;
}

}  // namespace

TEST(RbRhs, FlatIsZero) {
  const FlowState s = make_state(0.0, MetricField::flat(Grid({8, 8, 8}), 3), CurvatureModel::finite_difference, false);
  for (const auto& m : rb_rhs(s, 0.2)) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RbRhs, SphereFiber) {
  for (int n : {2, 3, 4})
    for (double rho : {0.0, 0.1, -0.5}) {
      const double c0 = 2.0, k = 1.0 / c0;
      const FlowState s = make_state(0.0, sphere_fiber(c0, n), CurvatureModel::round_sphere, false);
      const Matrix expect = -2.0 * (n - 1) * k * (1.0 - n * rho) * s.g[0];
      EXPECT_LT((rb_rhs(s, rho)[0] - expect).cwiseAbs().maxCoeff(), 1e-14) << n << " " << rho;
      EXPECT_NEAR(s.curv.scal(0, 0), n * (n - 1) * k, 1e-14);
    }
}

TEST(RbRhs, TwoDimensionalStaticAtHalf) {
  const Grid grid({24, 24});
  const MetricField g = random_perturbation(grid, 2, 0.2, 7);
  const FlowState s = make_state(0.0, g, CurvatureModel::finite_difference, false);
  double scale = 0.0;
  for (const auto& m : rb_rhs(s, 0.0)) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  ASSERT_GT(scale, 1e-3);
  for (const auto& m : rb_rhs(s, 0.5)) EXPECT_LT(m.cwiseAbs().maxCoeff(), 1e-12 * scale);
}

TEST(RbRhs, DegenerateMetricThrows) {
  MetricField g = MetricField::flat(Grid({8, 8}), 2);
  g[5](1, 1) = -1.0;
  EXPECT_THROW(make_state(0.0, g, CurvatureModel::finite_difference, false), DegenerateMetricError);
}

TEST(FlowConfig, Validation) {
  FlowConfig c = torus_config(16, 0.1);
  EXPECT_NO_THROW(c.validate());
  auto bad = [&](auto mutate) {
    FlowConfig d = c;
    mutate(d);
    EXPECT_THROW(d.validate(), std::invalid_argument);
  };
  bad([](FlowConfig& d) { d.rho = 0.5; });
  bad([](FlowConfig& d) { d.cfl = 0.0; });
  bad([](FlowConfig& d) { d.cfl = 0.6; });
  bad([](FlowConfig& d) { d.t_end = 0.0; });
  bad([](FlowConfig& d) { d.dims = {16, 16, 16}; });
  bad([](FlowConfig& d) { d.n = 1; });
}

TEST(SphereSolution, ClosedFormExamples) {
  const SphereSolution s = sphere_solution(1.0, 3, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(s.extinction, 0.25);
  EXPECT_NEAR(extinction_bound(3, 0.0, 6.0), s.extinction, 1e-12);
  EXPECT_DOUBLE_EQ(sphere_solution(1.0, 3, 0.0, 0.1).c, 0.6);
  const SphereSolution stat = sphere_solution(1.5, 4, 0.25, 10.0);
  EXPECT_DOUBLE_EQ(stat.c, 1.5);
  EXPECT_TRUE(std::isinf(stat.extinction));
  EXPECT_THROW(sphere_solution(1.0, 3, 0.0, 0.25), std::invalid_argument);
  EXPECT_THROW(sphere_solution(-1.0, 3, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(sphere_solution(1.0, 3, 0.5, 0.0), std::invalid_argument);
}

TEST(SphereSolution, BoundIsSaturated) {
  for (int n : {2, 3, 4, 5})
    for (double rho : {-1.0, 0.0, 0.1, 0.15})
      for (double c0 : {0.5, 1.0, 3.0}) {
        if (rho >= 1.0 / n) continue;
        const double alpha = n * (n - 1) / c0;
        const double t_ext = sphere_solution(c0, n, rho, 0.0).extinction;
        EXPECT_NEAR(t_ext, extinction_bound(n, rho, alpha), 1e-12 * t_ext);
        for (double f : {0.1, 0.5, 0.9, 0.999}) {
          const SphereSolution s = sphere_solution(c0, n, rho, f * t_ext);
          EXPECT_NEAR(s.scalar, s.scalar_lower_bound, 1e-12 * s.scalar);
        }
      }
}

TEST(SphereModel, BlowUpNearExtinction) {
  for (double rho : {0.0, 0.2}) {
    const int n = 3;
    const double t_ext = sphere_solution(1.0, n, rho, 0.0).extinction;
    const FlowResult r = run(sphere_config(n, rho, 2.0 * t_ext), sphere_fiber(1.0, n));
    ASSERT_EQ(r.status, FlowStatus::blow_up) << r.message;
    EXPECT_GT(r.samples.back().sup_riem, 1e6);
    EXPECT_NEAR(r.last_good_time, t_ext, 0.02 * t_ext);
    EXPECT_LE(r.last_good_time, t_ext);
    // The scalar curvature bound holds along the run and the run never outlives it.
    const double alpha = n * (n - 1.0);
    for (const auto& m : r.samples) {
      if (m.t >= t_ext) break;
      EXPECT_GE(m.r_min, n * alpha / (n - 2.0 * (1.0 - n * rho) * alpha * m.t) * (1.0 - 1e-9));
    }
  }
}

TEST(SphereModel, ScalarMatchesClosedForm) {
  const FlowResult r = run(sphere_config(4, 0.1, 0.1), sphere_fiber(2.0, 4));
  ASSERT_EQ(r.status, FlowStatus::completed);
  for (const auto& m : r.samples) EXPECT_NEAR(m.r_min, sphere_solution(2.0, 4, 0.1, m.t).scalar, 1e-10);
}

TEST(SphereModel, UhlenbeckScalarOde) {
  const int n = 3;
  const double rho = 0.1, c0 = 1.0;
  FlowConfig c = sphere_config(n, rho, 0.15);
  c.dt_policy = DtPolicy::fixed;
  const FlowResult r = run(c, sphere_fiber(c0, n));
  ASSERT_EQ(r.status, FlowStatus::completed);
  const double ct = sphere_solution(c0, n, rho, r.final_state.t).c;
  const Matrix& phi = r.final_state.frame->phi[0];
  EXPECT_LT((phi - std::sqrt(c0 / ct) * Matrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(r.samples.back().uhlenbeck_defect, 1e-10);
}

TEST(SphereModel, ScalarResidualVanishes) {
  for (double rho : {0.0, 0.2}) {
    const Triple s = three_states(sphere_fiber(1.0, 3), rho, 1e-6, CurvatureModel::round_sphere);
    EXPECT_LT(evolution_residual(s.prev, s.mid, s.next, rho, ResidualTarget::scalar).value, 1e-10);
    EXPECT_LT(evolution_residual(s.prev, s.mid, s.next, rho, ResidualTarget::volume).value, 1e-10);
  }
}

TEST(Flow, FlatStaticResidualsZero) {
  const MetricField g = MetricField::flat(Grid({8, 8, 8}), 3);
  const Triple s = three_states(g, 0.1, 1e-3);
  for (auto t : {ResidualTarget::christoffel, ResidualTarget::scalar, ResidualTarget::ricci, ResidualTarget::riemann,
                 ResidualTarget::weyl, ResidualTarget::volume})
    EXPECT_EQ(evolution_residual(s.prev, s.mid, s.next, 0.1, t).value, 0.0) << to_string(t);
}

TEST(Flow, ResidualArgumentChecks) {
  const MetricField g = MetricField::flat(Grid({8, 8}), 2);
  const Triple s = three_states(g, 0.0, 1e-3);
  const FlowState odd = step(s.mid, 0.0, 2e-3, CurvatureModel::finite_difference);
  EXPECT_THROW(evolution_residual(s.prev, s.mid, odd, 0.0, ResidualTarget::scalar), std::invalid_argument);
  const FlowState other = make_state(2e-3, MetricField::flat(Grid({16, 16}), 2), CurvatureModel::finite_difference, false);
  EXPECT_THROW(evolution_residual(s.prev, s.mid, other, 0.0, ResidualTarget::scalar), std::invalid_argument);
  EXPECT_THROW(evolution_residual(s.prev, s.mid, s.next, 0.0, ResidualTarget::weyl), std::invalid_argument);
  EXPECT_EQ(parse_residual_target("ricci"), ResidualTarget::ricci);
  EXPECT_THROW(parse_residual_target("torsion"), std::invalid_argument);
}

TEST(Torus2D, ScalarMonotoneAndGaussBonnet) {
  const FlowConfig c = torus_config(32, 0.1);
  const MetricField g0 = conformal_metric(bump(Grid(c.dims), 0.3));
  const FlowResult r = run(c, g0);
  ASSERT_EQ(r.status, FlowStatus::completed) << r.message;
  EXPECT_NEAR(r.final_state.t, 0.1, 1e-12);
  const double scale = r.samples.front().r_max - r.samples.front().r_min;
  ASSERT_GT(scale, 1.0);
  for (std::size_t i = 1; i < r.samples.size(); ++i)
    EXPECT_GE(r.samples[i].r_min - r.samples[i - 1].r_min, -1e-8) << r.samples[i].t;
  // Gauss-Bonnet holds up to the fourth-order quadrature of R dmu.
  for (const auto& m : r.samples) EXPECT_LT(std::abs(m.total_scalar), 1e-4 * m.volume * m.r_max);
  EXPECT_GT(r.samples.back().r_min, r.samples.front().r_min);
  EXPECT_LE(r.samples.back().uhlenbeck_defect, 1e-6);
}

TEST(Torus2D, GaussBonnetConverges) {
  std::vector<double> e;
  for (int N : {16, 32, 64}) e.push_back(std::abs(monitor(make_state(0.0, conformal_metric(bump(Grid({N, N}), 0.3)),
                                                                     CurvatureModel::finite_difference, false),
                                                          0.1, -1).total_scalar));
  EXPECT_GT(std::log2(e[0] / e[1]), 3.5);
  EXPECT_GT(std::log2(e[1] / e[2]), 3.5);
}

TEST(Torus2D, VolumeDerivativeMatchesIntegral) {
  FlowConfig c = torus_config(32, 0.1);
  c.dt_policy = DtPolicy::fixed;
  c.dt = 1e-3;
  c.t_end = 0.02;
  const FlowResult r = run(c, conformal_metric(bump(Grid(c.dims), 0.3)));
  ASSERT_EQ(r.status, FlowStatus::completed);
  for (std::size_t i = 1; i + 1 < r.samples.size(); ++i) {
    const double dv = (r.samples[i + 1].volume - r.samples[i - 1].volume) / (r.samples[i + 1].t - r.samples[i - 1].t);
    EXPECT_NEAR(dv, (c.n * c.rho - 1.0) * r.samples[i].total_scalar, 1e-6);
  }
}

TEST(Torus2D, UhlenbeckFlatFrameStaysIdentity) {
  FlowConfig c = torus_config(16, 0.0);
  c.t_end = 0.05;
  const FlowResult r = run(c, MetricField::flat(Grid(c.dims), 2));
  for (const auto& phi : r.final_state.frame->phi) EXPECT_EQ((phi - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Torus2D, UhlenbeckStaticFlowKeepsIsometry) {
  FlowConfig c = torus_config(24, 0.0);
  c.t_end = 0.05;
  c.rho = 0.49;  // close to static, still parabolic
  const MetricField g0 = conformal_metric(bump(Grid(c.dims), 0.3));
  const FlowResult r = run(c, g0);
  ASSERT_EQ(r.status, FlowStatus::completed);
  EXPECT_LE(uhlenbeck_defect(*r.final_state.frame, r.final_state.g, g0), 1e-6);
}

TEST(Uhlenbeck, FrozenStepOnSphere) {
  const FlowState s = make_state(0.0, sphere_fiber(1.0, 3), CurvatureModel::round_sphere, true);
  const UhlenbeckFrame f = uhlenbeck_step(*s.frame, s.curv, s.g, 0.0, 1e-3);
  // Frozen coefficients: phi = exp(2 dt) Id for Ric^# = 2 Id.
  EXPECT_NEAR(f.phi[0](0, 0), std::exp(2e-3), 1e-15);
  EXPECT_EQ(f.phi[0](0, 1), 0.0);
}

TEST(Conformal2D, Examples) {
  const Grid grid({32, 32});
  const TensorField c = scalar_field(grid, [](std::span<const double>) { return 0.7; });
  EXPECT_LT(conformal2d_rhs(c, 0.1).max_abs(), 1e-14);
  EXPECT_EQ(conformal2d_rhs(bump(grid, 0.3), 0.5).max_abs(), 0.0);
  EXPECT_THROW(conformal2d_rhs(TensorField(grid, 2, 2), 0.0), std::invalid_argument);
}

TEST(Conformal2D, AgreesWithTensorFlow) {
  const double rho = 0.1;
  std::vector<double> errs;
  for (int N : {32, 64}) {
    const Grid grid({N, N});
    const TensorField u = bump(grid, 0.3);
    const FlowState s = make_state(0.0, conformal_metric(u), CurvatureModel::finite_difference, false);
    const auto full = rb_rhs(s, rho);
    const TensorField du = conformal2d_rhs(u, rho);
    double e = 0.0;
    for (std::size_t p = 0; p < full.size(); ++p) e = std::max(e, (full[p] - 2.0 * du(p, 0) * s.g[p]).cwiseAbs().maxCoeff());
    errs.push_back(e);
  }
  EXPECT_LT(errs[1], 1e-4);
  EXPECT_GT(std::log2(errs[0] / errs[1]), 3.5) << errs[0] << " " << errs[1];
}

TEST(Perturbation, BoundedSymmetricDeterministic) {
  const Grid grid({8, 8, 8});
  const MetricField a = random_perturbation(grid, 3, 0.1, 11), b = random_perturbation(grid, 3, 0.1, 11);
  const MetricField c = random_perturbation(grid, 3, 0.1, 12);
  EXPECT_EQ(max_diff(a.values(), b.values()), 0.0);
  EXPECT_GT(max_diff(a.values(), c.values()), 1e-3);
  double peak = 0.0;
  for (std::size_t p = 0; p < a.points(); ++p) {
    EXPECT_EQ((a[p] - a[p].transpose()).cwiseAbs().maxCoeff(), 0.0);
    peak = std::max(peak, (a[p] - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff());
  }
  EXPECT_NEAR(peak, 0.1, 1e-14);
  EXPECT_TRUE(a.is_positive_definite());
}

TEST(Residuals, TimeOrderTorus2D) {
  // The residual is a dt-independent spatial part plus the O(dt^2) error of the
  // centered difference; subtracting the tiny-dt residual about the same centre
  // isolates the temporal part.
  const MetricField g0 = conformal_metric(bump(Grid({32, 32}), 0.3));
  const double rho = 0.1;
  for (auto target : {ResidualTarget::scalar, ResidualTarget::ricci, ResidualTarget::christoffel, ResidualTarget::volume}) {
    auto field = [&](double dt) {
      const Triple s = centered_states(g0, rho, dt);
      return evolution_residual(s.prev, s.mid, s.next, rho, target).difference;
    };
    const TensorField ref = field(1e-6);
    const double e1 = (field(4e-3) - ref).max_abs();
    const double e2 = (field(2e-3) - ref).max_abs();
    const double e3 = (field(1e-3) - ref).max_abs();
    EXPECT_GE(std::log2(e1 / e2), 2.0) << to_string(target) << " " << e1 << " " << e2;
    EXPECT_GE(std::log2(e2 / e3), 2.0) << to_string(target) << " " << e2 << " " << e3;
  }
}

TEST(Residuals, SpaceOrderTorus2D) {
  const double rho = 0.1;
  for (auto target : {ResidualTarget::scalar, ResidualTarget::ricci, ResidualTarget::christoffel}) {
    std::vector<double> e;
    for (int N : {16, 32, 64}) e.push_back(residual_of(conformal_metric(bump(Grid({N, N}), 0.3)), rho, 1e-5, target));
    EXPECT_GE(std::log2(e[0] / e[1]), 3.5) << to_string(target) << " " << e[0] << " " << e[1];
    EXPECT_GE(std::log2(e[1] / e[2]), 3.5) << to_string(target) << " " << e[1] << " " << e[2];
  }
}

TEST(Residuals, VolumeHasNoSpatialError) {
  // d sqrt(det g)/dt = (n rho - 1) R sqrt(det g) holds pointwise for the
  // discrete Ricci tensor, so only the O(dt^2) time error remains.
  for (int N : {16, 32, 64}) {
    const MetricField g0 = conformal_metric(bump(Grid({N, N}), 0.3));
    EXPECT_LT(residual_of(g0, 0.1, 1e-5, ResidualTarget::volume), 1e-8) << N;
  }
}

TEST(Residuals, Torus3DRiemann) {
  for (double rho : {0.0, 0.1}) {
    std::vector<double> e;
    for (int N : {8, 12}) e.push_back(residual_of(random_perturbation(Grid({N, N, N}), 3, 0.05, 3, 1), rho, 1e-5,
                                                  ResidualTarget::riemann));
    EXPECT_TRUE(std::isfinite(e[0]) && std::isfinite(e[1]));
    EXPECT_LT(e[1], e[0] / 2.0) << rho << " " << e[0] << " " << e[1];
  }
}

TEST(Residuals, WeylVanishesIn3D) {
  const double r = residual_of(random_perturbation(Grid({8, 8, 8}), 3, 0.05, 3, 1), 0.1, 1e-5, ResidualTarget::weyl);
  EXPECT_LT(r, 1e-10);
}

TEST(Residuals, Weyl4DDecreases) {
  std::vector<double> e;
  for (int N : {6, 8}) e.push_back(residual_of(random_perturbation(Grid({N, N, N, N}), 4, 0.05, 3, 1), 0.1, 1e-4,
                                               ResidualTarget::weyl));
  EXPECT_TRUE(std::isfinite(e[0]) && std::isfinite(e[1]));
  EXPECT_LT(e[1], e[0] / 1.5) << e[0] << " " << e[1];
}

TEST(Torus3D, HalfStepFourthOrder) {
  const MetricField g0 = random_perturbation(Grid({8, 8, 8}), 3, 0.1, 5);
  auto final_metric = [&](double dt) {
    FlowConfig c;
    c.n = 3;
    c.dims = {8, 8, 8};
    c.dt_policy = DtPolicy::fixed;
    c.dt = dt;
    c.t_end = 0.1;
    c.sample_every = 1000;
    const FlowResult r = run(c, g0);
    EXPECT_EQ(r.status, FlowStatus::completed);
    return r.final_state.g.values();
  };
  const auto g1 = final_metric(0.02), g2 = final_metric(0.01), g3 = final_metric(0.005);
  const double a = max_diff(g1, g2), b = max_diff(g2, g3);
  EXPECT_GT(std::log2(a / b), 3.5) << a << " " << b;
  EXPECT_LT(b, 1e-6);
}

TEST(Monitor, EnergiesAndBeta) {
  EXPECT_DOUBLE_EQ(energy_beta(3, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(energy_beta(3, 0.1), 0.6);
  EXPECT_DOUBLE_EQ(energy_beta(3, -0.5), 1.0);
  const Grid grid({32, 32});
  FlowState s = make_state(0.5, conformal_metric(bump(grid, 0.3)), CurvatureModel::finite_difference, false);
  const double rho = 0.1;
  const MonitorSample m = monitor(s, rho, 2);
  ASSERT_EQ(m.energy_a.size(), 3u);
  const double w = 4.0 * rho / (1.0 - 2.0 * rho), beta = energy_beta(2, rho);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(m.energy_a[k], m.grad_riem_l2_sq[k] + w * m.grad_scal_l2_sq[k], 1e-12 * m.energy_a[k]);
  EXPECT_NEAR(m.energy_f[2], m.energy_a[0] + beta * 0.5 * m.energy_a[1] + beta * beta * 0.125 * m.energy_a[2],
              1e-12 * m.energy_f[2]);
  EXPECT_DOUBLE_EQ(m.grad_riem_l2_sq[0], m.riem_l2_sq);
  // In 2D |Riem|^2 = R^2.
  double r2 = 0.0;
  const auto dens = s.g.volume_density();
  for (std::size_t p = 0; p < dens.size(); ++p) r2 += s.curv.scal(p, 0) * s.curv.scal(p, 0) * dens[p];
  EXPECT_NEAR(m.riem_l2_sq, r2 * grid.cell_volume(), 1e-10 * m.riem_l2_sq);
}

TEST(Flow, PositivityLossReported) {
  // A fixed step far beyond stability drives the metric indefinite.
  FlowConfig c = torus_config(16, 0.0);
  c.dt_policy = DtPolicy::fixed;
  c.dt = 0.5;
  c.t_end = 5.0;
  c.blow_up_threshold = 1e300;
  const FlowResult r = run(c, conformal_metric(bump(Grid(c.dims), 0.3)));
  EXPECT_NE(r.status, FlowStatus::completed);
  if (r.status == FlowStatus::positivity_lost) {
    EXPECT_LT(r.last_good_time, c.t_end);
    EXPECT_FALSE(r.message.empty());
  }
}
