#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Thrown when a metric fails to be symmetric positive definite at some grid point.
class DegenerateMetricError : public std::runtime_error {
 public:
  DegenerateMetricError(std::size_t point, const std::string& context);
  std::size_t point() const noexcept { return point_; }

 private:
  std::size_t point_;
};

/// Periodic tensor-product grid over the cube [0, 2*pi)^d. Points are stored
/// row-major: the first axis varies slowest.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<int> dims);

  int dim() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t size() const { return size_; }
  double spacing(int axis) const { return spacing_[axis]; }
  double min_spacing() const;
  double cell_volume() const;

  /// Index of the point displaced by `offset` cells along `axis`, wrapping periodically.
  std::size_t shift(std::size_t index, int axis, int offset) const;
  int axis_index(std::size_t index, int axis) const;
  std::vector<int> multi_index(std::size_t index) const;
  double coordinate(std::size_t index, int axis) const;

  bool operator==(const Grid& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Covariant tensor field of a given rank over a grid; each point carries n^rank
/// components flattened row-major in the tensor indices.
class TensorField {
 public:
  TensorField() = default;
  TensorField(Grid grid, int n, int rank);

  const Grid& grid() const { return grid_; }
  int n() const { return n_; }
  int rank() const { return rank_; }
  std::size_t components() const { return components_; }
  std::size_t points() const { return grid_.size(); }

  double& operator()(std::size_t point, std::size_t comp) { return data_[point * components_ + comp]; }
  double operator()(std::size_t point, std::size_t comp) const { return data_[point * components_ + comp]; }

  std::span<double> at(std::size_t point) { return {data_.data() + point * components_, components_}; }
  std::span<const double> at(std::size_t point) const {
    return {data_.data() + point * components_, components_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double max_abs() const;

  TensorField& operator+=(const TensorField& other);
  TensorField& operator-=(const TensorField& other);
  TensorField& operator*=(double s);

 private:
  Grid grid_;
  int n_ = 0;
  int rank_ = 0;
  std::size_t components_ = 1;
  std::vector<double> data_;
};

TensorField operator+(TensorField a, const TensorField& b);
TensorField operator-(TensorField a, const TensorField& b);
TensorField operator*(double s, TensorField a);

/// Integer power n^rank.
std::size_t ipow(int n, int rank);

/// Field of symmetric positive-definite n x n matrices on a periodic grid.
class MetricField {
 public:
  MetricField() = default;
  MetricField(Grid grid, int n);
  MetricField(Grid grid, std::vector<Matrix> values);

  /// Evaluates `fn` at the coordinates of every grid point.
  static MetricField from_function(const Grid& grid, int n,
                                   const std::function<Matrix(std::span<const double>)>& fn);
  static MetricField flat(const Grid& grid, int n);

  const Grid& grid() const { return grid_; }
  int n() const { return n_; }
  std::size_t points() const { return grid_.size(); }

  Matrix& operator[](std::size_t point) { return g_[point]; }
  const Matrix& operator[](std::size_t point) const { return g_[point]; }
  const std::vector<Matrix>& values() const { return g_; }

  /// Throws DegenerateMetricError at the first point whose matrix is not SPD.
  void validate() const;
  bool is_positive_definite() const;
  std::vector<Matrix> inverse() const;
  /// sqrt(det g) at each point.
  std::vector<double> volume_density() const;
  double total_volume() const;
  TensorField as_tensor_field() const;

 private:
  Grid grid_;
  int n_ = 0;
  std::vector<Matrix> g_;
};

namespace stencil {

/// Fourth-order central first derivative along `axis` of a scalar sampled by `value(point)`.
template <class F>
double d1(const Grid& grid, std::size_t p, int axis, F&& value) {
  const double h = grid.spacing(axis);
  return (value(grid.shift(p, axis, -2)) - 8.0 * value(grid.shift(p, axis, -1)) +
          8.0 * value(grid.shift(p, axis, 1)) - value(grid.shift(p, axis, 2))) /
         (12.0 * h);
}

/// Fourth-order central second derivative along a single axis.
template <class F>
double d2(const Grid& grid, std::size_t p, int axis, F&& value) {
  const double h = grid.spacing(axis);
  return (-value(grid.shift(p, axis, -2)) + 16.0 * value(grid.shift(p, axis, -1)) - 30.0 * value(p) +
          16.0 * value(grid.shift(p, axis, 1)) - value(grid.shift(p, axis, 2))) /
         (12.0 * h * h);
}

/// Mixed derivative d_a d_b (a != b) as the tensor product of two first-derivative stencils.
template <class F>
double d11(const Grid& grid, std::size_t p, int a, int b, F&& value) {
  static constexpr int offsets[4] = {-2, -1, 1, 2};
  static constexpr double weights[4] = {1.0, -8.0, 8.0, -1.0};
  double acc = 0.0;
  for (int s = 0; s < 4; ++s) {
    const std::size_t pa = grid.shift(p, a, offsets[s]);
    for (int t = 0; t < 4; ++t) {
      acc += weights[s] * weights[t] * value(grid.shift(pa, b, offsets[t]));
    }
  }
  return acc / (144.0 * grid.spacing(a) * grid.spacing(b));
}

}  // namespace stencil

/// Partial derivative of every component; the new derivative index is placed first.
/// Requires grid.dim() == field.n().
TensorField partial_derivative(const TensorField& field);

/// Flat second-derivative Laplacian sum_a d_a d_a of each component.
TensorField flat_laplacian(const TensorField& field);

TensorField scalar_field(const Grid& grid, const std::function<double(std::span<const double>)>& fn);

}  // namespace rbflow
