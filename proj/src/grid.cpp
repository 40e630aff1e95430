#include "rbflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rbflow {

DegenerateMetricError::DegenerateMetricError(std::size_t point, const std::string& context)
    : std::runtime_error(context + ": metric is not positive definite at grid index " + std::to_string(point)),
      point_(point) {}

Grid::Grid(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("Grid: at least one axis required");
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("Grid: axis sizes must be positive");
  }
  const int d = dim();
  spacing_.resize(d);
  strides_.resize(d);
  std::size_t stride = 1;
  for (int a = d - 1; a >= 0; --a) {
    strides_[a] = stride;
    stride *= static_cast<std::size_t>(dims_[a]);
    spacing_[a] = kTwoPi / dims_[a];
  }
  size_ = stride;
}

double Grid::min_spacing() const { return *std::min_element(spacing_.begin(), spacing_.end()); }

double Grid::cell_volume() const {
  return std::accumulate(spacing_.begin(), spacing_.end(), 1.0, std::multiplies<>());
}

int Grid::axis_index(std::size_t index, int axis) const {
  return static_cast<int>((index / strides_[axis]) % static_cast<std::size_t>(dims_[axis]));
}

std::size_t Grid::shift(std::size_t index, int axis, int offset) const {
  const int n = dims_[axis];
  const int i = axis_index(index, axis);
  int j = (i + offset) % n;
  if (j < 0) j += n;
  return index + (static_cast<std::ptrdiff_t>(j) - i) * static_cast<std::ptrdiff_t>(strides_[axis]);
}

std::vector<int> Grid::multi_index(std::size_t index) const {
  std::vector<int> m(dim());
  for (int a = 0; a < dim(); ++a) m[a] = axis_index(index, a);
  return m;
}

double Grid::coordinate(std::size_t index, int axis) const { return axis_index(index, axis) * spacing_[axis]; }

std::size_t ipow(int n, int rank) {
  std::size_t r = 1;
  for (int i = 0; i < rank; ++i) r *= static_cast<std::size_t>(n);
  return r;
}

TensorField::TensorField(Grid grid, int n, int rank)
    : grid_(std::move(grid)), n_(n), rank_(rank), components_(ipow(n, rank)) {
  data_.assign(grid_.size() * components_, 0.0);
}

double TensorField::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

namespace {
void check_same_shape(const TensorField& a, const TensorField& b) {
  if (!(a.grid() == b.grid()) || a.n() != b.n() || a.rank() != b.rank()) {
    throw std::invalid_argument("TensorField: shape mismatch");
  }
}
}  // namespace

TensorField& TensorField::operator+=(const TensorField& other) {
  check_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

TensorField& TensorField::operator-=(const TensorField& other) {
  check_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

TensorField& TensorField::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

TensorField operator+(TensorField a, const TensorField& b) { return a += b; }
TensorField operator-(TensorField a, const TensorField& b) { return a -= b; }
TensorField operator*(double s, TensorField a) { return a *= s; }

MetricField::MetricField(Grid grid, int n) : grid_(std::move(grid)), n_(n) {
  g_.assign(grid_.size(), Matrix::Identity(n, n));
}

MetricField::MetricField(Grid grid, std::vector<Matrix> values) : grid_(std::move(grid)), g_(std::move(values)) {
  if (g_.size() != grid_.size()) throw std::invalid_argument("MetricField: value count does not match grid");
  n_ = g_.empty() ? 0 : static_cast<int>(g_.front().rows());
  for (const auto& m : g_) {
    if (m.rows() != n_ || m.cols() != n_) throw std::invalid_argument("MetricField: inconsistent matrix size");
  }
}

MetricField MetricField::from_function(const Grid& grid, int n,
                                       const std::function<Matrix(std::span<const double>)>& fn) {
  std::vector<Matrix> values(grid.size());
  std::vector<double> x(grid.dim());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int a = 0; a < grid.dim(); ++a) x[a] = grid.coordinate(p, a);
    values[p] = fn(x);
    if (values[p].rows() != n || values[p].cols() != n) {
      throw std::invalid_argument("MetricField::from_function: wrong matrix size");
    }
  }
  return MetricField(grid, std::move(values));
}

MetricField MetricField::flat(const Grid& grid, int n) { return MetricField(grid, n); }

void MetricField::validate() const {
  for (std::size_t p = 0; p < g_.size(); ++p) {
    const Matrix& m = g_[p];
    if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
      throw DegenerateMetricError(p, "MetricField");
    }
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) throw DegenerateMetricError(p, "MetricField");
  }
}

bool MetricField::is_positive_definite() const {
  try {
    validate();
  } catch (const DegenerateMetricError&) {
    return false;
  }
  return true;
}

std::vector<Matrix> MetricField::inverse() const {
  std::vector<Matrix> inv(g_.size());
  for (std::size_t p = 0; p < g_.size(); ++p) {
    Eigen::LLT<Matrix> llt(g_[p]);
    if (llt.info() != Eigen::Success) throw DegenerateMetricError(p, "MetricField::inverse");
    inv[p] = llt.solve(Matrix::Identity(n_, n_));
    inv[p] = 0.5 * (inv[p] + inv[p].transpose()).eval();
  }
  return inv;
}

std::vector<double> MetricField::volume_density() const {
  std::vector<double> mu(g_.size());
  for (std::size_t p = 0; p < g_.size(); ++p) mu[p] = std::sqrt(g_[p].determinant());
  return mu;
}

double MetricField::total_volume() const {
  const auto mu = volume_density();
  return std::accumulate(mu.begin(), mu.end(), 0.0) * grid_.cell_volume();
}

TensorField MetricField::as_tensor_field() const {
  TensorField t(grid_, n_, 2);
  for (std::size_t p = 0; p < g_.size(); ++p) {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) t(p, i * n_ + j) = g_[p](i, j);
  }
  return t;
}

TensorField partial_derivative(const TensorField& field) {
  const Grid& grid = field.grid();
  const int n = field.n();
  if (grid.dim() != n) throw std::invalid_argument("partial_derivative: grid dimension must equal tensor dimension");
  const std::size_t nc = field.components();
  TensorField out(grid, n, field.rank() + 1);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int a = 0; a < n; ++a) {
      for (std::size_t c = 0; c < nc; ++c) {
        out(p, a * nc + c) = stencil::d1(grid, p, a, [&](std::size_t q) { return field(q, c); });
      }
    }
  }
  return out;
}

TensorField flat_laplacian(const TensorField& field) {
  const Grid& grid = field.grid();
  TensorField out(grid, field.n(), field.rank());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t c = 0; c < field.components(); ++c) {
      double acc = 0.0;
      for (int a = 0; a < grid.dim(); ++a) {
        acc += stencil::d2(grid, p, a, [&](std::size_t q) { return field(q, c); });
      }
      out(p, c) = acc;
    }
  }
  return out;
}

TensorField scalar_field(const Grid& grid, const std::function<double(std::span<const double>)>& fn) {
  TensorField t(grid, grid.dim(), 0);
  std::vector<double> x(grid.dim());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int a = 0; a < grid.dim(); ++a) x[a] = grid.coordinate(p, a);
    t(p, 0) = fn(x);
  }
  return t;
}

}  // namespace rbflow
