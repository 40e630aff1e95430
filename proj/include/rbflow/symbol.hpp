#pragma once

#include "rbflow/grid.hpp"

#include <string>
#include <vector>

namespace rbflow {

enum class SymbolVariant { raw, deturck, operator_L };

SymbolVariant parse_symbol_variant(const std::string& name);
std::string to_string(SymbolVariant v);

/// Principal symbol in the direction of the first coordinate covector, |xi| = 1.
/// raw / deturck act on symmetric 2-tensors with coordinates
///   (h11, ..., hnn, h12, ..., h1n, h23, ..., h(n-1)n);
/// operator_L acts on symmetric N x N operators (N = n(n-1)/2) with coordinates:
/// the diagonal entries (1j)(1j), then the diagonal entries (ij)(ij) with 1 < i,
/// then the off-diagonal entries in lexicographic order.
struct SymbolMatrix {
  int n = 0;
  double rho = 0.0;
  SymbolVariant variant = SymbolVariant::raw;
  Matrix mat;
};

enum class Classification { strictly_parabolic_after_deturck, degenerate_schouten, not_parabolic };
std::string to_string(Classification c);

struct EigenvalueCount {
  double value;
  int multiplicity;
};

struct ParabolicityReport {
  int n = 0;
  double rho = 0.0;
  std::vector<EigenvalueCount> eigenvalues;  ///< of the DeTurck-corrected symbol
  Classification classification = Classification::not_parabolic;
};

/// m x m matrix with 1 - 2 rho on the diagonal and -2 rho elsewhere.
Matrix build_A(int m, double rho);

/// det(A - lambda Id) by LU factorization.
double characteristic_polynomial(const Matrix& a, double lambda);

SymbolMatrix symbol(int n, double rho, SymbolVariant variant);

/// Eigenvalues of a general real matrix, ascending. The matrix is first split
/// into the irreducible diagonal blocks of its block-triangular permutation
/// form, so structurally isolated eigenvalues are returned exactly. Throws if
/// any eigenvalue has |imag| > imag_tol.
Vector real_spectrum(const Matrix& a, double imag_tol = 1e-10);

/// Groups sorted eigenvalues that agree within tol.
std::vector<EigenvalueCount> group_eigenvalues(const Vector& sorted, double tol = 1e-9);

/// Critical parameter 1/(2(n-1)).
double schouten_rho(int n);

ParabolicityReport classify(int n, double rho);

/// V^j = -1/2 g0^{jk} g^{pq} (nabla_k g0_pq - nabla_p g0_qk - nabla_q g0_pk),
/// with nabla the Levi-Civita connection of g. Rank-1 field.
TensorField deturck_vector(const MetricField& g, const MetricField& g0);

/// V^j = -g0^{jk} g^{pq} nabla_p (1/2 tr_g(g0) g_qk - (g0)_qk), differentiating the
/// bracketed tensor field directly.
TensorField deturck_vector_divergence_form(const MetricField& g, const MetricField& g0);

}  // namespace rbflow
