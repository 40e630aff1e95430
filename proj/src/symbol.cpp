#include "rbflow/symbol.hpp"

#include "rbflow/algebra.hpp"
#include "rbflow/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rbflow {

SymbolVariant parse_symbol_variant(const std::string& name) {
  if (name == "raw") return SymbolVariant::raw;
  if (name == "deturck") return SymbolVariant::deturck;
  if (name == "operator_L") return SymbolVariant::operator_L;
  throw std::invalid_argument("symbol: unknown variant '" + name + "'");
}

std::string to_string(SymbolVariant v) {
  switch (v) {
    case SymbolVariant::raw: return "raw";
    case SymbolVariant::deturck: return "deturck";
    case SymbolVariant::operator_L: return "operator_L";
  }
  return "?";
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::strictly_parabolic_after_deturck: return "strictly_parabolic_after_deturck";
    case Classification::degenerate_schouten: return "degenerate_schouten";
    case Classification::not_parabolic: return "not_parabolic";
  }
  return "?";
}

Matrix build_A(int m, double rho) {
  if (m < 1) throw std::invalid_argument("build_A: m must be positive");
  Matrix a = Matrix::Constant(m, m, -2.0 * rho);
  a.diagonal().array() += 1.0;
  return a;
}

double characteristic_polynomial(const Matrix& a, double lambda) {
  return (a - lambda * Matrix::Identity(a.rows(), a.cols())).partialPivLu().determinant();
}

namespace {

// Coordinate pairs (i,k) for symmetric 2-tensors in the symbol ordering.
std::vector<std::array<int, 2>> sym2_coordinates(int n) {
  std::vector<std::array<int, 2>> c;
  for (int i = 0; i < n; ++i) c.push_back({i, i});
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) c.push_back({i, k});
  return c;
}

Matrix metric_symbol(int n, double rho, bool with_gauge_terms) {
  const auto coords = sym2_coordinates(n);
  const int dim = static_cast<int>(coords.size());
  Matrix s = Matrix::Zero(dim, dim);
  for (int col = 0; col < dim; ++col) {
    Matrix h = Matrix::Zero(n, n);
    h(coords[col][0], coords[col][1]) = h(coords[col][1], coords[col][0]) = 1.0;
    const double tr = h.trace();
    Matrix out = h;
    if (with_gauge_terms) {
      out(0, 0) += tr;
      for (int k = 0; k < n; ++k) {
        out(0, k) -= h(k, 0);
        out(k, 0) -= h(k, 0);
      }
    }
    out.diagonal().array() += -2.0 * rho * tr + 2.0 * rho * h(0, 0);
    for (int row = 0; row < dim; ++row) s(row, col) = out(coords[row][0], coords[row][1]);
  }
  return s;
}

// Coordinates of symmetric operators on Lambda^2: (x, y) index pairs into the
// lexicographic Lambda^2 basis.
std::vector<std::array<int, 2>> operator_coordinates(int n) {
  const auto pairs = lambda2_pairs(n);
  const int m = static_cast<int>(pairs.size());
  std::vector<std::array<int, 2>> c;
  for (int x = 0; x < m; ++x)
    if (pairs[x][0] == 0) c.push_back({x, x});
  for (int x = 0; x < m; ++x)
    if (pairs[x][0] != 0) c.push_back({x, x});
  for (int x = 0; x < m; ++x)
    for (int y = x + 1; y < m; ++y) c.push_back({x, y});
  return c;
}

Matrix operator_symbol(int n, double rho) {
  const auto pairs = lambda2_pairs(n);
  const int m = static_cast<int>(pairs.size());
  const auto coords = operator_coordinates(n);
  const int dim = static_cast<int>(coords.size());
  Matrix s = Matrix::Zero(dim, dim);
  for (int col = 0; col < dim; ++col) {
    Matrix q = Matrix::Zero(m, m);
    q(coords[col][0], coords[col][1]) = q(coords[col][1], coords[col][0]) = 1.0;
    const double tr = q.trace();
    Matrix out = q;
    // -2 rho tr(Q) delta_i^1 delta_k^1 delta_jl on the entry (ij)(kl).
    for (int x = 0; x < m; ++x)
      for (int y = 0; y < m; ++y)
        if (pairs[x][0] == 0 && pairs[y][0] == 0 && pairs[x][1] == pairs[y][1]) out(x, y) -= 2.0 * rho * tr;
    for (int row = 0; row < dim; ++row) s(row, col) = out(coords[row][0], coords[row][1]);
  }
  return s;
}

// Tarjan strongly connected components of the nonzero pattern.
struct Tarjan {
  const Matrix& a;
  int counter = 0;
  std::vector<int> index, low, stack;
  std::vector<bool> on_stack;
  std::vector<std::vector<int>> components;

  explicit Tarjan(const Matrix& m)
      : a(m), index(m.rows(), -1), low(m.rows(), 0), on_stack(m.rows(), false) {
    for (int v = 0; v < m.rows(); ++v)
      if (index[v] < 0) visit(v);
  }

  void visit(int v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (int w = 0; w < a.cols(); ++w) {
      if (w == v || a(v, w) == 0.0) continue;
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<int> comp;
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      components.push_back(std::move(comp));
    }
  }
};

}  // namespace

SymbolMatrix symbol(int n, double rho, SymbolVariant variant) {
  if (n < 2) throw std::invalid_argument("symbol: n must be at least 2");
  SymbolMatrix s;
  s.n = n;
  s.rho = rho;
  s.variant = variant;
  switch (variant) {
    case SymbolVariant::raw: s.mat = metric_symbol(n, rho, true); break;
    case SymbolVariant::deturck: s.mat = metric_symbol(n, rho, false); break;
    case SymbolVariant::operator_L: s.mat = operator_symbol(n, rho); break;
  }
  return s;
}

Vector real_spectrum(const Matrix& a, double imag_tol) {
  if (a.rows() != a.cols()) throw std::invalid_argument("real_spectrum: square matrix required");
  const Tarjan t(a);
  std::vector<double> values;
  for (const auto& comp : t.components) {
    const int k = static_cast<int>(comp.size());
    Matrix block(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) block(r, c) = a(comp[r], comp[c]);
    if (k == 1) {
      values.push_back(block(0, 0));
      continue;
    }
    Eigen::EigenSolver<Matrix> es(block, false);
    if (es.info() != Eigen::Success) throw std::runtime_error("real_spectrum: eigensolver failed");
    for (int r = 0; r < k; ++r) {
      const auto ev = es.eigenvalues()[r];
      if (std::abs(ev.imag()) > imag_tol) throw std::runtime_error("real_spectrum: complex eigenvalue");
      values.push_back(ev.real());
    }
  }
  std::sort(values.begin(), values.end());
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<EigenvalueCount> group_eigenvalues(const Vector& sorted, double tol) {
  std::vector<EigenvalueCount> out;
  for (Eigen::Index i = 0; i < sorted.size(); ++i) {
    if (!out.empty() && std::abs(sorted[i] - out.back().value) <= tol) {
      ++out.back().multiplicity;
    } else {
      out.push_back({sorted[i], 1});
    }
  }
  return out;
}

double schouten_rho(int n) { return 1.0 / (2.0 * (n - 1)); }

ParabolicityReport classify(int n, double rho) {
  if (n < 2) throw std::invalid_argument("classify: n must be at least 2");
  ParabolicityReport rep;
  rep.n = n;
  rep.rho = rho;
  rep.eigenvalues = group_eigenvalues(real_spectrum(symbol(n, rho, SymbolVariant::deturck).mat));
  const double s = schouten_rho(n);
  if (std::abs(rho - s) <= 1e-12 * std::max(1.0, std::abs(s))) {
    rep.classification = Classification::degenerate_schouten;
  } else if (rho < s) {
    rep.classification = Classification::strictly_parabolic_after_deturck;
  } else {
    rep.classification = Classification::not_parabolic;
  }
  return rep;
}

namespace {

void check_pair(const MetricField& g, const MetricField& g0) {
  if (!(g.grid() == g0.grid()) || g.n() != g0.n()) throw std::invalid_argument("deturck_vector: grid mismatch");
  g.validate();
  g0.validate();
}

}  // namespace

TensorField deturck_vector(const MetricField& g, const MetricField& g0) {
  check_pair(g, g0);
  const int n = g.n();
  const TensorField gamma = compute_christoffel(g);
  const auto ginv = g.inverse();
  const auto g0inv = g0.inverse();
  const TensorField dg0 = covariant_derivative(g0.as_tensor_field(), gamma);  // (a, i, j)
  auto d = [&](std::size_t p, int a, int i, int j) { return dg0(p, (a * n + i) * n + j); };
  TensorField v(g.grid(), n, 1);
  for (std::size_t p = 0; p < g.points(); ++p) {
    Vector w = Vector::Zero(n);
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) w[k] += ginv[p](a, b) * (d(p, k, a, b) - d(p, a, b, k) - d(p, b, a, k));
    const Vector out = -0.5 * g0inv[p] * w;
    for (int j = 0; j < n; ++j) v(p, j) = out[j];
  }
  return v;
}

TensorField deturck_vector_divergence_form(const MetricField& g, const MetricField& g0) {
  check_pair(g, g0);
  const int n = g.n();
  const TensorField gamma = compute_christoffel(g);
  const auto ginv = g.inverse();
  const auto g0inv = g0.inverse();
  TensorField s(g.grid(), n, 2);
  for (std::size_t p = 0; p < g.points(); ++p) {
    const double tr = trace_with<double>(ginv[p], g0[p]);
    set_fiber_matrix(s, p, 0.5 * tr * g[p] - g0[p]);
  }
  const TensorField ds = covariant_derivative(s, gamma);  // (p, q, k)
  TensorField v(g.grid(), n, 1);
  for (std::size_t p = 0; p < g.points(); ++p) {
    Vector w = Vector::Zero(n);
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) w[k] += ginv[p](a, b) * ds(p, (a * n + b) * n + k);
    const Vector out = -g0inv[p] * w;
    for (int j = 0; j < n; ++j) v(p, j) = out[j];
  }
  return v;
}

}  // namespace rbflow
