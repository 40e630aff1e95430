#pragma once

// Fiberwise tensor algebra: rank-4 tensors on a single tangent space, the
// Kulkarni-Nomizu product, the B contraction, Weyl decomposition, and the
// curvature operator on the lexicographic orthonormal basis of Lambda^2.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace rbflow {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Dense rank-4 array T(i,j,k,l), flattened row-major. The container
/// imposes no symmetry.
template <class Scalar>
class FourTensor {
 public:
  FourTensor() = default;
  explicit FourTensor(int n) : n_(n), v_(VectorX<Scalar>::Zero(static_cast<Eigen::Index>(n) * n * n * n)) {}
  FourTensor(int n, VectorX<Scalar> values) : n_(n), v_(std::move(values)) {
    if (v_.size() != static_cast<Eigen::Index>(n) * n * n * n) throw std::invalid_argument("FourTensor: bad size");
  }
  template <class It>
  static FourTensor from_range(int n, It first) {
    FourTensor t(n);
    for (Eigen::Index c = 0; c < t.v_.size(); ++c, ++first) t.v_[c] = *first;
    return t;
  }

  int n() const { return n_; }
  Eigen::Index index(int i, int j, int k, int l) const { return ((static_cast<Eigen::Index>(i) * n_ + j) * n_ + k) * n_ + l; }
  Scalar& operator()(int i, int j, int k, int l) { return v_[index(i, j, k, l)]; }
  const Scalar& operator()(int i, int j, int k, int l) const { return v_[index(i, j, k, l)]; }

  VectorX<Scalar>& values() { return v_; }
  const VectorX<Scalar>& values() const { return v_; }
  Scalar max_abs() const { return v_.size() ? v_.cwiseAbs().maxCoeff() : Scalar(0); }

  FourTensor& operator+=(const FourTensor& o) { v_ += o.v_; return *this; }
  FourTensor& operator-=(const FourTensor& o) { v_ -= o.v_; return *this; }
  FourTensor& operator*=(Scalar s) { v_ *= s; return *this; }
  friend FourTensor operator+(FourTensor a, const FourTensor& b) { return a += b; }
  friend FourTensor operator-(FourTensor a, const FourTensor& b) { return a -= b; }
  friend FourTensor operator*(Scalar s, FourTensor a) { return a *= s; }
  friend FourTensor operator-(FourTensor a) { return a *= Scalar(-1); }

 private:
  int n_ = 0;
  VectorX<Scalar> v_;
};

using FourTensord = FourTensor<double>;

/// result(i0,i1,i2,i3) = T(i_{s[0]}, i_{s[1]}, i_{s[2]}, i_{s[3]}).
/// Example: slots {0,1,3,2} gives T_ijlk, slots {0,3,1,2} gives T_iljk.
template <class Scalar>
FourTensor<Scalar> reindex(const FourTensor<Scalar>& t, std::array<int, 4> s) {
  const int n = t.n();
  FourTensor<Scalar> r(n);
  std::array<int, 4> idx{};
  for (idx[0] = 0; idx[0] < n; ++idx[0])
    for (idx[1] = 0; idx[1] < n; ++idx[1])
      for (idx[2] = 0; idx[2] < n; ++idx[2])
        for (idx[3] = 0; idx[3] < n; ++idx[3])
          r(idx[0], idx[1], idx[2], idx[3]) = t(idx[s[0]], idx[s[1]], idx[s[2]], idx[s[3]]);
  return r;
}

/// (p o q)_ijkl = p_ik q_jl + p_jl q_ik - p_il q_jk - p_jk q_il.
template <class Scalar>
FourTensor<Scalar> kulkarni_nomizu(const MatrixX<Scalar>& p, const MatrixX<Scalar>& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols() || p.rows() != p.cols()) {
    throw std::invalid_argument("kulkarni_nomizu: dimension mismatch");
  }
  const int n = static_cast<int>(p.rows());
  FourTensor<Scalar> r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          r(i, j, k, l) = p(i, k) * q(j, l) + p(j, l) * q(i, k) - p(i, l) * q(j, k) - p(j, k) * q(i, l);
  return r;
}

/// Raises slots 2 and 4: U_k^p_l^r = g^pq g^rs T_kqls.
template <class Scalar>
FourTensor<Scalar> raise_even_slots(const FourTensor<Scalar>& t, const MatrixX<Scalar>& ginv) {
  const int n = t.n();
  FourTensor<Scalar> half(n), out(n);
  for (int k = 0; k < n; ++k)
    for (int p = 0; p < n; ++p)
      for (int l = 0; l < n; ++l)
        for (int s = 0; s < n; ++s) {
          Scalar acc(0);
          for (int q = 0; q < n; ++q) acc += ginv(p, q) * t(k, q, l, s);
          half(k, p, l, s) = acc;
        }
  for (int k = 0; k < n; ++k)
    for (int p = 0; p < n; ++p)
      for (int l = 0; l < n; ++l)
        for (int r = 0; r < n; ++r) {
          Scalar acc(0);
          for (int s = 0; s < n; ++s) acc += ginv(r, s) * half(k, p, l, s);
          out(k, p, l, r) = acc;
        }
  return out;
}

/// B(S,T)_ijkl = g^pq g^rs S_ipjr T_kqls, evaluated as one matrix product
/// over the (p,r) pair after raising T.
template <class Scalar>
FourTensor<Scalar> b_tensor(const FourTensor<Scalar>& s, const FourTensor<Scalar>& t, const MatrixX<Scalar>& ginv) {
  if (s.n() != t.n() || ginv.rows() != s.n()) throw std::invalid_argument("b_tensor: shape mismatch");
  const int n = s.n();
  const FourTensor<Scalar> u = raise_even_slots(t, ginv);
  MatrixX<Scalar> ms(n * n, n * n), mu(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < n; ++p)
        for (int r = 0; r < n; ++r) {
          ms(i * n + j, p * n + r) = s(i, p, j, r);
          mu(i * n + j, p * n + r) = u(i, p, j, r);
        }
  const MatrixX<Scalar> b = ms * mu.transpose();
  FourTensor<Scalar> out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) out(i, j, k, l) = b(i * n + j, k * n + l);
  return out;
}

/// B_ijkl - B_ijlk - B_iljk + B_ikjl.
template <class Scalar>
FourTensor<Scalar> b_combination(const FourTensor<Scalar>& b) {
  return b - reindex(b, {0, 1, 3, 2}) - reindex(b, {0, 3, 1, 2}) + reindex(b, {0, 2, 1, 3});
}

/// Ric_ik = g^jl R_ijkl.
template <class Scalar>
MatrixX<Scalar> ricci_contraction(const FourTensor<Scalar>& rm, const MatrixX<Scalar>& ginv) {
  const int n = rm.n();
  MatrixX<Scalar> ric = MatrixX<Scalar>::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      Scalar acc(0);
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) acc += ginv(j, l) * rm(i, j, k, l);
      ric(i, k) = acc;
    }
  return ric;
}

template <class Scalar>
Scalar trace_with(const MatrixX<Scalar>& ginv, const MatrixX<Scalar>& a) {
  return (ginv.array() * a.array()).sum();
}

/// |A|^2 of a symmetric 2-tensor: g^ik g^jl A_ij A_kl.
template <class Scalar>
Scalar norm_sq(const MatrixX<Scalar>& a, const MatrixX<Scalar>& ginv) {
  return (ginv * a * ginv * a.transpose()).trace();
}

/// Full g-norm squared of a rank-4 tensor.
template <class Scalar>
Scalar norm_sq(const FourTensor<Scalar>& t, const MatrixX<Scalar>& ginv) {
  const int n = t.n();
  // Raise all four slots by applying g^{-1} as an (n x n^3) reshaped product per slot.
  VectorX<Scalar> v = t.values();
  for (int slot = 0; slot < 4; ++slot) {
    VectorX<Scalar> w = VectorX<Scalar>::Zero(v.size());
    const Eigen::Index stride = [&] {
      Eigen::Index s = 1;
      for (int q = slot + 1; q < 4; ++q) s *= n;
      return s;
    }();
    for (Eigen::Index c = 0; c < v.size(); ++c) {
      const int a = static_cast<int>((c / stride) % n);
      const Eigen::Index base = c - static_cast<Eigen::Index>(a) * stride;
      Scalar acc(0);
      for (int b = 0; b < n; ++b) acc += ginv(a, b) * v[base + static_cast<Eigen::Index>(b) * stride];
      w[c] = acc;
    }
    v = std::move(w);
  }
  return v.dot(t.values());
}

/// (Ric^2)_ab = R_ap R_bq g^pq.
template <class Scalar>
MatrixX<Scalar> ricci_square(const MatrixX<Scalar>& ric, const MatrixX<Scalar>& ginv) {
  return ric * ginv * ric.transpose();
}

/// (T * h)_ab = T_apbq h_st g^ps g^qt.
template <class Scalar>
MatrixX<Scalar> star(const FourTensor<Scalar>& t, const MatrixX<Scalar>& h, const MatrixX<Scalar>& ginv) {
  const int n = t.n();
  const MatrixX<Scalar> hup = ginv * h * ginv.transpose();
  MatrixX<Scalar> r = MatrixX<Scalar>::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Scalar acc(0);
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) acc += t(a, p, b, q) * hup(p, q);
      r(a, b) = acc;
    }
  return r;
}

/// g^pq (T_pjkl A_qi + T_ipkl A_qj + T_ijpl A_qk + T_ijkp A_ql).
template <class Scalar>
FourTensor<Scalar> ricci_action(const FourTensor<Scalar>& t, const MatrixX<Scalar>& a, const MatrixX<Scalar>& ginv) {
  const int n = t.n();
  const MatrixX<Scalar> m = ginv * a;  // m(p, i) = g^pq A_qi
  FourTensor<Scalar> r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Scalar acc(0);
          for (int p = 0; p < n; ++p) {
            acc += t(p, j, k, l) * m(p, i) + t(i, p, k, l) * m(p, j) + t(i, j, p, l) * m(p, k) +
                   t(i, j, k, p) * m(p, l);
          }
          r(i, j, k, l) = acc;
        }
  return r;
}

/// W = Riem + R/((n-1)(n-2)) (g_ik g_jl - g_il g_jk) - 1/(n-2) Ric o g.
template <class Scalar>
FourTensor<Scalar> weyl_tensor(const FourTensor<Scalar>& rm, const MatrixX<Scalar>& g, const MatrixX<Scalar>& ginv) {
  const int n = rm.n();
  if (n < 3) throw std::invalid_argument("weyl_tensor: requires n >= 3");
  const MatrixX<Scalar> ric = ricci_contraction(rm, ginv);
  const Scalar r = trace_with(ginv, ric);
  const Scalar nn = Scalar(n);
  return rm + (r / (Scalar(2) * (nn - 1) * (nn - 2))) * kulkarni_nomizu(g, g) -
         (Scalar(1) / (nn - 2)) * kulkarni_nomizu(ric, g);
}

/// Riem = W - R/(2(n-1)(n-2)) g o g + 1/(n-2) Ric o g.
template <class Scalar>
FourTensor<Scalar> riemann_from_weyl(const FourTensor<Scalar>& w, const MatrixX<Scalar>& ric, Scalar r,
                                     const MatrixX<Scalar>& g) {
  const Scalar nn = Scalar(w.n());
  return w - (r / (Scalar(2) * (nn - 1) * (nn - 2))) * kulkarni_nomizu(g, g) +
         (Scalar(1) / (nn - 2)) * kulkarni_nomizu(ric, g);
}

/// E with E^T g E = Id, from the Cholesky factor g = L L^T (E = L^{-T}).
template <class Scalar>
MatrixX<Scalar> orthonormal_frame(const MatrixX<Scalar>& g) {
  Eigen::LLT<MatrixX<Scalar>> llt(g);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("orthonormal_frame: metric not positive definite");
  const int n = static_cast<int>(g.rows());
  return llt.matrixU().solve(MatrixX<Scalar>::Identity(n, n));
}

/// T'_abcd = E_ia E_jb E_kc E_ld T_ijkl.
template <class Scalar>
FourTensor<Scalar> to_frame(const FourTensor<Scalar>& t, const MatrixX<Scalar>& e) {
  const int n = t.n();
  VectorX<Scalar> v = t.values();
  for (int slot = 0; slot < 4; ++slot) {
    Eigen::Index stride = 1;
    for (int q = slot + 1; q < 4; ++q) stride *= n;
    VectorX<Scalar> w = VectorX<Scalar>::Zero(v.size());
    for (Eigen::Index c = 0; c < v.size(); ++c) {
      const int a = static_cast<int>((c / stride) % n);
      const Eigen::Index base = c - static_cast<Eigen::Index>(a) * stride;
      Scalar acc(0);
      for (int i = 0; i < n; ++i) acc += e(i, a) * v[base + static_cast<Eigen::Index>(i) * stride];
      w[c] = acc;
    }
    v = std::move(w);
  }
  return FourTensor<Scalar>(n, std::move(v));
}

/// Lexicographic pairs (0,1),(0,2),...,(n-2,n-1).
inline std::vector<std::array<int, 2>> lambda2_pairs(int n) {
  std::vector<std::array<int, 2>> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) pairs.push_back({a, b});
  return pairs;
}

/// Matrix Q_(ab)(cd) = T_abcd of a tensor already expressed in an orthonormal frame.
template <class Scalar>
MatrixX<Scalar> operator_matrix(const FourTensor<Scalar>& t_frame) {
  const auto pairs = lambda2_pairs(t_frame.n());
  const int m = static_cast<int>(pairs.size());
  MatrixX<Scalar> q(m, m);
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < m; ++y) q(x, y) = t_frame(pairs[x][0], pairs[x][1], pairs[y][0], pairs[y][1]);
  return q;
}

/// Curvature operator of a (4,0) tensor relative to the metric g.
template <class Scalar>
MatrixX<Scalar> curvature_operator(const FourTensor<Scalar>& rm, const MatrixX<Scalar>& g) {
  return operator_matrix(to_frame(rm, orthonormal_frame(g)));
}

/// Inverse of operator_matrix: the (4,0) tensor in the orthonormal frame with
/// antisymmetry in each pair.
template <class Scalar>
FourTensor<Scalar> tensor_from_operator(const MatrixX<Scalar>& q, int n) {
  const auto pairs = lambda2_pairs(n);
  const int m = static_cast<int>(pairs.size());
  if (q.rows() != m || q.cols() != m) throw std::invalid_argument("tensor_from_operator: size mismatch");
  FourTensor<Scalar> t(n);
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < m; ++y) {
      const auto [a, b] = pairs[x];
      const auto [c, d] = pairs[y];
      const Scalar v = q(x, y);
      t(a, b, c, d) = v;
      t(b, a, c, d) = -v;
      t(a, b, d, c) = -v;
      t(b, a, d, c) = v;
    }
  return t;
}

/// Dimension n with n(n-1)/2 = size of the operator matrix.
inline int dimension_from_operator_size(Eigen::Index m) {
  for (int n = 2; n < 64; ++n) {
    if (n * (n - 1) / 2 == m) return n;
  }
  throw std::invalid_argument("operator size is not n(n-1)/2");
}

template <class Scalar>
MatrixX<Scalar> op_square(const MatrixX<Scalar>& q) {
  return q * q;
}

/// Q^# through the (4,0) identity (Q#Q)_ijkl = B_ikjl - B_iljk in an orthonormal
/// frame. Agrees with the Lie-algebraic sharp when Q satisfies the first Bianchi
/// identity (automatic for n = 3).
template <class Scalar>
MatrixX<Scalar> op_sharp(const MatrixX<Scalar>& q) {
  const int n = dimension_from_operator_size(q.rows());
  const FourTensor<Scalar> t = tensor_from_operator(q, n);
  const MatrixX<Scalar> id = MatrixX<Scalar>::Identity(n, n);
  const FourTensor<Scalar> b = b_tensor(t, t, id);
  return operator_matrix(FourTensor<Scalar>(reindex(b, {0, 2, 1, 3}) - reindex(b, {0, 3, 1, 2})));
}

/// Reaction part of the operator ODE: 2Q^2 + 2Q^# - 4 rho tr(Q) Q.
template <class Scalar>
MatrixX<Scalar> operator_reaction(const MatrixX<Scalar>& q, Scalar rho) {
  return Scalar(2) * op_square(q) + Scalar(2) * op_sharp(q) - Scalar(4) * rho * q.trace() * q;
}

/// Zeroth-order part of the Riemann evolution (no Laplacian, no Hessian of R):
/// 2 b_combination(B) - ricci_action(Riem, Ric) + 2 rho R Riem.
template <class Scalar>
FourTensor<Scalar> riemann_reaction(const FourTensor<Scalar>& rm, const MatrixX<Scalar>& ginv, Scalar rho) {
  const MatrixX<Scalar> ric = ricci_contraction(rm, ginv);
  const Scalar r = trace_with(ginv, ric);
  return Scalar(2) * b_combination(b_tensor(rm, rm, ginv)) - ricci_action(rm, ric, ginv) + Scalar(2) * rho * r * rm;
}

/// Lower-order terms of the Weyl evolution, expressed through W, Ric and R.
template <class Scalar>
FourTensor<Scalar> weyl_rhs_zeroth_order(const FourTensor<Scalar>& w, const MatrixX<Scalar>& ric, Scalar r,
                                         const MatrixX<Scalar>& g, const MatrixX<Scalar>& ginv, Scalar rho) {
  const int n = w.n();
  if (n < 3) throw std::invalid_argument("weyl_rhs_zeroth_order: requires n >= 3");
  const Scalar m = Scalar(n - 2);
  const Scalar ric_sq = norm_sq(ric, ginv);
  return Scalar(2) * b_combination(b_tensor(w, w, ginv)) + Scalar(2) * rho * r * w - ricci_action(w, ric, ginv) +
         (Scalar(2) / (m * m)) * kulkarni_nomizu(ricci_square(ric, ginv), g) +
         (Scalar(1) / m) * kulkarni_nomizu(ric, ric) - (Scalar(2) * r / (m * m)) * kulkarni_nomizu(ric, g) +
         ((r * r - ric_sq) / (Scalar(n - 1) * m * m)) * kulkarni_nomizu(g, g);
}

/// Removes the Bianchi part: T - (T_ijkl + T_jkil + T_kijl)/3 for a tensor with
/// pair antisymmetry and pair symmetry.
template <class Scalar>
FourTensor<Scalar> bianchi_projection(const FourTensor<Scalar>& t) {
  const FourTensor<Scalar> cyc = t + reindex(t, {1, 2, 0, 3}) + reindex(t, {2, 0, 1, 3});
  return t - (Scalar(1) / Scalar(3)) * cyc;
}

/// Random algebraic curvature tensor: a random symmetric operator lifted to
/// (4,0) form and projected onto the Bianchi kernel.
template <class Rng>
FourTensord random_algebraic_curvature(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  const int m = n * (n - 1) / 2;
  Eigen::MatrixXd q(m, m);
  for (int x = 0; x < m; ++x)
    for (int y = x; y < m; ++y) q(x, y) = q(y, x) = normal(rng);
  return bianchi_projection(tensor_from_operator(q, n));
}

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
template <class Rng>
Eigen::MatrixXd random_spd(int n, Rng& rng, double lo = 0.5, double hi = 2.0) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(lo, hi);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd o = qr.householderQ();
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = uni(rng);
  Eigen::MatrixXd g = o * d.asDiagonal() * o.transpose();
  return 0.5 * (g + g.transpose());
}

template <class Rng>
Eigen::MatrixXd random_symmetric(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) a(i, j) = a(j, i) = normal(rng);
  return a;
}

/// Pulls a tensor given in an orthonormal frame E back to coordinates:
/// T_ijkl = F_ai F_bj F_ck F_dl T'_abcd with F = E^{-1}.
template <class Scalar>
FourTensor<Scalar> from_frame(const FourTensor<Scalar>& t_frame, const MatrixX<Scalar>& e) {
  return to_frame(t_frame, MatrixX<Scalar>(e.inverse()));
}

}  // namespace rbflow
