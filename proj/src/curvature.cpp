#include "rbflow/curvature.hpp"

#include <stdexcept>

namespace rbflow {

namespace {

void require_chart(const MetricField& m) {
  if (m.grid().dim() != m.n()) throw std::invalid_argument("curvature: grid dimension must equal metric dimension");
}

// Second partial derivatives of every metric component: (a,b,i,j).
TensorField metric_second_derivatives(const TensorField& gf) {
  const Grid& grid = gf.grid();
  const int n = gf.n();
  const std::size_t nc = gf.components();
  TensorField out(grid, n, 4);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) {
        for (std::size_t c = 0; c < nc; ++c) {
          auto value = [&](std::size_t q) { return gf(q, c); };
          const double v = a == b ? stencil::d2(grid, p, a, value) : stencil::d11(grid, p, a, b, value);
          out(p, (a * n + b) * nc + c) = v;
          out(p, (b * n + a) * nc + c) = v;
        }
      }
    }
  }
  return out;
}

// Gamma^k_ij from first derivatives dg(a,i,j) and the inverse metric.
void christoffel_at(const TensorField& dg, std::size_t p, const Matrix& ginv, int n, std::vector<double>& lower,
                    TensorField& gamma) {
  auto d = [&](int a, int i, int j) { return dg(p, (a * n + i) * n + j); };
  // lower[(l*n+i)*n+j] = Gamma_{l,ij}
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) lower[(l * n + i) * n + j] = 0.5 * (d(i, j, l) + d(j, i, l) - d(l, i, j));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += ginv(k, l) * lower[(l * n + i) * n + j];
        gamma(p, (k * n + i) * n + j) = acc;
      }
}

}  // namespace

Matrix fiber_matrix(const TensorField& t, std::size_t p) {
  const int n = t.n();
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = t(p, i * n + j);
  return a;
}

void set_fiber_matrix(TensorField& t, std::size_t p, const Matrix& a) {
  const int n = t.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t(p, i * n + j) = a(i, j);
}

FourTensord fiber_four(const TensorField& t, std::size_t p) {
  return FourTensord::from_range(t.n(), t.at(p).begin());
}

void set_fiber_four(TensorField& t, std::size_t p, const FourTensord& a) {
  auto dst = t.at(p);
  for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = a.values()[static_cast<Eigen::Index>(c)];
}

TensorField compute_christoffel(const MetricField& m) {
  require_chart(m);
  m.validate();
  const int n = m.n();
  const auto ginv = m.inverse();
  const TensorField dg = partial_derivative(m.as_tensor_field());
  TensorField gamma(m.grid(), n, 3);
  std::vector<double> lower(ipow(n, 3));
  for (std::size_t p = 0; p < m.points(); ++p) christoffel_at(dg, p, ginv[p], n, lower, gamma);
  return gamma;
}

CurvatureBundle compute_curvature(const MetricField& m) {
  require_chart(m);
  m.validate();
  const int n = m.n();
  const Grid& grid = m.grid();
  const TensorField gf = m.as_tensor_field();
  const TensorField dg = partial_derivative(gf);
  const TensorField ddg = metric_second_derivatives(gf);

  CurvatureBundle cb;
  cb.ginv = m.inverse();
  cb.gamma = TensorField(grid, n, 3);
  cb.riem = TensorField(grid, n, 4);
  cb.ric = TensorField(grid, n, 2);
  cb.scal = TensorField(grid, n, 0);
  cb.weyl = TensorField(grid, n, 4);

  std::vector<double> lower(ipow(n, 3));
  for (std::size_t p = 0; p < grid.size(); ++p) {
    christoffel_at(dg, p, cb.ginv[p], n, lower, cb.gamma);
    auto dd = [&](int a, int b, int i, int j) { return ddg(p, ((a * n + b) * n + i) * n + j); };
    auto gam = [&](int k, int i, int j) { return cb.gamma(p, (k * n + i) * n + j); };
    auto low = [&](int l, int i, int j) { return lower[(l * n + i) * n + j]; };
    FourTensord rm(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double v = 0.5 * (dd(j, k, i, l) + dd(i, l, j, k) - dd(i, k, j, l) - dd(j, l, i, k));
            // g_ef Gamma^e_jk Gamma^f_il = Gamma_{f,jk} Gamma^f_il
            double q = 0.0;
            for (int f = 0; f < n; ++f) q += low(f, j, k) * gam(f, i, l) - low(f, j, l) * gam(f, i, k);
            rm(i, j, k, l) = v + q;
          }
    const Matrix ric = ricci_contraction(rm, cb.ginv[p]);
    set_fiber_four(cb.riem, p, rm);
    set_fiber_matrix(cb.ric, p, ric);
    cb.scal(p, 0) = trace_with(cb.ginv[p], ric);
    if (n >= 3) set_fiber_four(cb.weyl, p, weyl_tensor(rm, m[p], cb.ginv[p]));
  }
  return cb;
}

TensorField covariant_derivative(const TensorField& t, const TensorField& gamma) {
  const int n = t.n();
  const int rank = t.rank();
  const std::size_t nc = t.components();
  TensorField out = partial_derivative(t);
  const Grid& grid = t.grid();
  std::vector<std::size_t> strides(rank);
  for (int s = 0; s < rank; ++s) strides[s] = ipow(n, rank - 1 - s);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int a = 0; a < n; ++a) {
      for (std::size_t c = 0; c < nc; ++c) {
        double corr = 0.0;
        for (int s = 0; s < rank; ++s) {
          const int is = static_cast<int>((c / strides[s]) % n);
          const std::size_t base = c - is * strides[s];
          for (int e = 0; e < n; ++e) corr += gamma(p, (e * n + a) * n + is) * t(p, base + e * strides[s]);
        }
        out(p, a * nc + c) -= corr;
      }
    }
  }
  return out;
}

TensorField trace_first_pair(const TensorField& t, const std::vector<Matrix>& ginv) {
  const int n = t.n();
  if (t.rank() < 2) throw std::invalid_argument("trace_first_pair: rank must be at least 2");
  TensorField out(t.grid(), n, t.rank() - 2);
  const std::size_t nc = out.components();
  for (std::size_t p = 0; p < t.points(); ++p) {
    for (std::size_t c = 0; c < nc; ++c) {
      double acc = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) acc += ginv[p](a, b) * t(p, (a * n + b) * nc + c);
      out(p, c) = acc;
    }
  }
  return out;
}

TensorField rough_laplacian(const TensorField& t, const TensorField& gamma, const std::vector<Matrix>& ginv) {
  return trace_first_pair(covariant_derivative(covariant_derivative(t, gamma), gamma), ginv);
}

TensorField rough_laplacian(const TensorField& t, const MetricField& m) {
  return rough_laplacian(t, compute_christoffel(m), m.inverse());
}

TensorField hessian(const TensorField& f, const TensorField& gamma) {
  if (f.rank() != 0) throw std::invalid_argument("hessian: scalar field required");
  return covariant_derivative(covariant_derivative(f, gamma), gamma);
}

double tensor_norm_sq(std::span<const double> comps, int n, int rank, const Matrix& ginv) {
  std::vector<double> v(comps.begin(), comps.end()), w(v.size());
  for (int s = 0; s < rank; ++s) {
    const std::size_t stride = ipow(n, rank - 1 - s);
    for (std::size_t c = 0; c < v.size(); ++c) {
      const int a = static_cast<int>((c / stride) % n);
      const std::size_t base = c - a * stride;
      double acc = 0.0;
      for (int b = 0; b < n; ++b) acc += ginv(a, b) * v[base + b * stride];
      w[c] = acc;
    }
    std::swap(v, w);
  }
  double acc = 0.0;
  for (std::size_t c = 0; c < v.size(); ++c) acc += v[c] * comps[c];
  return acc;
}

std::vector<double> pointwise_norm_sq(const TensorField& t, const std::vector<Matrix>& ginv) {
  std::vector<double> out(t.points());
  for (std::size_t p = 0; p < t.points(); ++p) out[p] = tensor_norm_sq(t.at(p), t.n(), t.rank(), ginv[p]);
  return out;
}

}  // namespace rbflow
