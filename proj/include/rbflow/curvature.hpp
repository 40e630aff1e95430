#pragma once

#include "rbflow/algebra.hpp"
#include "rbflow/grid.hpp"

#include <span>
#include <vector>

namespace rbflow {

/// Curvature of a metric field, per grid point.
///   gamma: rank 3, component (k,i,j) = Gamma^k_ij
///   riem, weyl: rank 4, (4,0) tensors
///   ric: rank 2; scal: rank 0
/// For n = 2 the Weyl field is left at zero.
struct CurvatureBundle {
  TensorField gamma;
  TensorField riem;
  TensorField ric;
  TensorField scal;
  TensorField weyl;
  std::vector<Matrix> ginv;
};

TensorField compute_christoffel(const MetricField& m);
CurvatureBundle compute_curvature(const MetricField& m);

/// Fiber accessors for rank-2 and rank-4 fields.
Matrix fiber_matrix(const TensorField& t, std::size_t p);
void set_fiber_matrix(TensorField& t, std::size_t p, const Matrix& a);
FourTensord fiber_four(const TensorField& t, std::size_t p);
void set_fiber_four(TensorField& t, std::size_t p, const FourTensord& a);

/// Covariant derivative with the derivative slot first: (nabla T)_{a i1..ir}.
TensorField covariant_derivative(const TensorField& t, const TensorField& gamma);

/// g^{ab} nabla_a nabla_b T.
TensorField rough_laplacian(const TensorField& t, const TensorField& gamma, const std::vector<Matrix>& ginv);
TensorField rough_laplacian(const TensorField& t, const MetricField& m);

/// nabla_i nabla_k f for a scalar field, as a rank-2 field.
TensorField hessian(const TensorField& f, const TensorField& gamma);

/// Contracts the first two slots with g^{ab}.
TensorField trace_first_pair(const TensorField& t, const std::vector<Matrix>& ginv);

/// |T|_g^2 for the components of a covariant rank-`rank` tensor at one point.
double tensor_norm_sq(std::span<const double> comps, int n, int rank, const Matrix& ginv);

/// Pointwise |T|_g^2 over a field.
std::vector<double> pointwise_norm_sq(const TensorField& t, const std::vector<Matrix>& ginv);

}  // namespace rbflow
