#include "rbflow/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace rbflow {

Quadrature::Quadrature(const MetricField& m)
    : ginv(m.inverse()), density(m.volume_density()), cell(m.grid().cell_volume()), gamma(compute_christoffel(m)) {}

double lp_norm(const TensorField& t, double p, const Quadrature& q) {
  if (!(p >= 1.0)) throw std::invalid_argument("estimates: lp_norm needs p >= 1");
  const auto sq = pointwise_norm_sq(t, q.ginv);
  if (std::isinf(p)) return std::sqrt(*std::max_element(sq.begin(), sq.end()));
  double acc = 0.0;
  for (std::size_t i = 0; i < sq.size(); ++i) acc += std::pow(sq[i], 0.5 * p) * q.density[i];
  return std::pow(acc * q.cell, 1.0 / p);
}

double lp_norm(const TensorField& t, double p, const MetricField& m) { return lp_norm(t, p, Quadrature(m)); }

std::vector<TensorField> derivative_tower(const TensorField& t, int k, const TensorField& gamma) {
  if (k < 0) throw std::invalid_argument("estimates: derivative order must be nonnegative");
  std::vector<TensorField> tower{t};
  for (int j = 1; j <= k; ++j) tower.push_back(covariant_derivative(tower.back(), gamma));
  return tower;
}

double interpolation_exponent(int j, int k, double p, double q) {
  if (k < 1 || j < 0 || j > k) throw std::invalid_argument("estimates: need 0 <= j <= k, k >= 1");
  const double s = static_cast<double>(j) / k;
  const double inv = (1.0 - s) / p + s / q;
  return inv == 0.0 ? kInf : 1.0 / inv;
}

std::optional<double> interpolation_ratio(const std::vector<TensorField>& tower, int j, int k, double p, double q,
                                          const Quadrature& quad) {
  if (static_cast<int>(tower.size()) <= k) throw std::invalid_argument("estimates: derivative tower too short");
  const double r = interpolation_exponent(j, k, p, q);
  const double s = static_cast<double>(j) / k;
  const double den = std::pow(lp_norm(tower[0], p, quad), 1.0 - s) * std::pow(lp_norm(tower[k], q, quad), s);
  if (!(den > 0.0)) return std::nullopt;
  return lp_norm(tower[j], r, quad) / den;
}

std::optional<double> interpolation_ratio(const TensorField& t, int j, int k, double p, double q, const MetricField& m) {
  const Quadrature quad(m);
  return interpolation_ratio(derivative_tower(t, k, quad.gamma), j, k, p, q, quad);
}

SequenceCheck hamilton_sequence_check(std::span<const double> f, double c) {
  if (f.size() < 2) throw std::invalid_argument("estimates: sequence needs at least two entries");
  if (!(c > 0.0)) throw std::invalid_argument("estimates: sequence constant must be positive");
  for (double v : f)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("estimates: sequence entries must be positive");
  const int k = static_cast<int>(f.size()) - 1;
  SequenceCheck out;
  for (int j = 1; j < k; ++j)
    if (f[j] > c * std::sqrt(f[j - 1] * f[j + 1])) {
      out.verdict = SequenceVerdict::hypothesis_violated;
      out.violated_at = j;
      break;
    }
  const double allowance = 4.0 * (k * k + 4) * std::numeric_limits<double>::epsilon();
  out.min_relative_slack = kInf;
  for (int j = 0; j <= k; ++j) {
    const double s = static_cast<double>(j) / k;
    const double b = std::pow(c, static_cast<double>(j) * (k - j)) * std::pow(f[0], 1.0 - s) * std::pow(f[k], s);
    out.bound.push_back(b);
    const double slack = (b - f[j]) / b;
    out.min_relative_slack = std::min(out.min_relative_slack, slack);
    if (out.verdict == SequenceVerdict::holds && slack < -allowance) out.conclusion_holds = false;
  }
  return out;
}

std::vector<double> admissible_sequence(int k, double c, std::mt19937_64& rng) {
  if (k < 1 || !(c > 0.0)) throw std::invalid_argument("estimates: admissible_sequence needs k >= 1, c > 0");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lc = std::log(c);
  // log f has second differences >= -2 log c.
  double g = -5.0 + 10.0 * u(rng), d = -3.0 + 6.0 * u(rng);
  std::vector<double> f{std::exp(g)};
  for (int j = 1; j <= k; ++j) {
    if (j > 1) d += -2.0 * lc + (1.0 + 2.0 * std::abs(lc)) * u(rng) * u(rng);
    g += d;
    f.push_back(std::exp(g));
  }
  return f;
}

TensorField band_limited_field(const Grid& grid, int max_mode, double amp, unsigned seed, double decay) {
  if (max_mode < 1) throw std::invalid_argument("estimates: max_mode must be at least 1");
  const int d = grid.dim(), w = 2 * max_mode + 1;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::size_t modes = 1;
  for (int a = 0; a < d; ++a) modes *= w;
  std::vector<std::complex<double>> coef(modes);
  for (std::size_t m = 0; m < modes; ++m) {
    std::size_t r = m;
    double k2 = 0.0;
    for (int a = 0; a < d; ++a, r /= w) {
      const int ka = static_cast<int>(r % w) - max_mode;
      k2 += ka * ka;
    }
    coef[m] = k2 == 0.0 ? 0.0 : nd(rng) * std::pow(1.0 + k2, -0.5 * decay) * std::polar(1.0, phase(rng));
  }
  // Per-axis tables of exp(i k x).
  std::vector<std::vector<std::complex<double>>> table(d);
  for (int a = 0; a < d; ++a) {
    const int n = grid.dims()[a];
    table[a].resize(static_cast<std::size_t>(n) * w);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < w; ++k) table[a][i * w + k] = std::polar(1.0, (k - max_mode) * grid.spacing(a) * i);
  }
  TensorField out(grid, d, 0);
  double peak = 0.0;
  std::vector<std::complex<double>> partial(modes);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto idx = grid.multi_index(p);
    double v = 0.0;
    for (std::size_t m = 0; m < modes; ++m) {
      std::size_t r = m;
      std::complex<double> e = coef[m];
      for (int a = d - 1; a >= 0; --a, r /= w) e *= table[a][idx[a] * w + r % w];
      v += e.real();
    }
    out(p, 0) = v;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0) out *= amp / peak;
  return out;
}

EnergyLedger energy_monitor(const FlowConfig& c, const FlowResult& run, int k_max, double fit_t0, double fit_t1) {
  if (k_max < 0) throw std::invalid_argument("estimates: k_max must be nonnegative");
  if (run.samples.size() < 5) throw std::invalid_argument("estimates: energy monitor needs at least 5 samples");
  for (const auto& s : run.samples)
    if (static_cast<int>(s.energy_a.size()) <= k_max)
      throw std::invalid_argument("estimates: run samples lack energies up to k_max");
  EnergyLedger e;
  e.beta = energy_beta(c.n, c.rho);
  const std::size_t ns = run.samples.size();
  e.a.assign(k_max + 1, {});
  e.f.assign(k_max + 1, {});
  e.grad_riem.assign(k_max + 1, {});
  e.smoothing_ratio.assign(k_max + 1, {});
  e.fitted_exponent.assign(k_max + 1, std::numeric_limits<double>::quiet_NaN());
  e.max_growth_rate.assign(k_max + 1, -kInf);
  std::vector<double> sup_riem(ns);
  double running = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    const auto& s = run.samples[i];
    e.t.push_back(s.t);
    running = std::max(running, s.riem_l2_sq);
    sup_riem[i] = running;
    for (int k = 0; k <= k_max; ++k) {
      e.a[k].push_back(s.energy_a[k]);
      e.f[k].push_back(s.energy_f[k]);
      e.grad_riem[k].push_back(s.grad_riem_l2_sq[k]);
      e.smoothing_ratio[k].push_back(running > 0.0 ? std::pow(s.t, k) * s.grad_riem_l2_sq[k] / running : 0.0);
    }
  }
  for (int k = 0; k <= k_max; ++k) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < ns; ++i) {
      const double t = e.t[i], y = e.grad_riem[k][i];
      if (t <= 0.0 || t < fit_t0 || t > fit_t1 || !(y > 0.0)) continue;
      const double lx = std::log(t), ly = std::log(y);
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly, ++m;
    }
    if (m >= 2 && m * sxx - sx * sx > 0.0) e.fitted_exponent[k] = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    for (std::size_t i = 0; i + 1 < ns; ++i) {
      const double dt = e.t[i + 1] - e.t[i];
      if (dt > 0.0 && sup_riem[i + 1] > 0.0)
        e.max_growth_rate[k] = std::max(e.max_growth_rate[k], (e.f[k][i + 1] - e.f[k][i]) / (dt * sup_riem[i + 1]));
    }
  }
  return e;
}

Lem5Report lem5_check(const TensorField& t, int k, const MetricField& m) {
  if (k < 1) throw std::invalid_argument("estimates: lem5_check needs k >= 1");
  const Quadrature quad(m);
  const auto tower = derivative_tower(t, k, quad.gamma);
  std::vector<std::vector<double>> norms;
  for (const auto& d : tower) {
    auto sq = pointwise_norm_sq(d, quad.ginv);
    for (auto& v : sq) v = std::sqrt(v);
    norms.push_back(std::move(sq));
  }
  Lem5Report r;
  for (std::size_t p = 0; p < t.points(); ++p) {
    double f = 0.0;
    for (int j = 0; j <= k; ++j) f += norms[j][p] * norms[k - j][p] * norms[k][p];
    r.lhs += f * quad.density[p];
  }
  r.lhs *= quad.cell;
  const double dk = lp_norm(tower[k], 2.0, quad);
  r.rhs = lp_norm(t, kInf, quad) * dk * dk;
  if (r.rhs > 0.0) r.ratio = r.lhs / r.rhs;
  return r;
}

double summation_by_parts_defect(const TensorField& f, const TensorField& g, int axis) {
  if (!(f.grid() == g.grid()) || f.components() != g.components())
    throw std::invalid_argument("estimates: summation by parts needs matching fields");
  const Grid& grid = f.grid();
  if (axis < 0 || axis >= grid.dim()) throw std::invalid_argument("estimates: axis out of range");
  const double h = grid.spacing(axis);
  double a = 0.0, b = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const std::size_t up = grid.shift(p, axis, 1), down = grid.shift(p, axis, -1);
    for (std::size_t c = 0; c < f.components(); ++c) {
      a += f(p, c) * (g(up, c) - g(p, c)) / h;
      b += (f(p, c) - f(down, c)) / h * g(p, c);
    }
  }
  const double scale = std::abs(a) + std::abs(b);
  return scale > 0.0 ? std::abs(a + b) / scale : 0.0;
}

}  // namespace rbflow
