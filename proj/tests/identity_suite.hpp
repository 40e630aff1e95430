#pragma once

// Algebraic identities on one random curvature fiber (random SPD metric,
// random algebraic curvature tensor). Each entry is a relative max-norm
// residual; all should sit at round-off.

#include "oracles.hpp"
#include "rbflow/algebra.hpp"

#include <map>
#include <random>
#include <string>

namespace identity_suite {

using rbflow::FourTensord;
using Eigen::MatrixXd;

inline double rel(const FourTensord& a, const FourTensord& b) {
  return (a - b).max_abs() / std::max({1.0, a.max_abs(), b.max_abs()});
}

template <class F>
FourTensord build(int n, F&& f) {
  FourTensord t(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) t(a, b, c, d) = f(a, b, c, d);
  return t;
}

inline std::map<std::string, double> evaluate(int n, std::mt19937_64& rng) {
  using namespace rbflow;
  std::map<std::string, double> out;
  const MatrixXd g = random_spd(n, rng), gi = g.inverse();
  const FourTensord rm = random_algebraic_curvature(n, rng);
  const MatrixXd ric = ricci_contraction<double>(rm, gi);
  const double r = trace_with<double>(gi, ric);
  const FourTensord w = weyl_tensor<double>(rm, g, gi);
  const MatrixXd ric2 = ricci_square<double>(ric, gi);
  const double rs = norm_sq<double>(ric, gi);
  const double m = n - 2.0;
  auto kn = [](const MatrixXd& a, const MatrixXd& b) { return kulkarni_nomizu<double>(a, b); };
  auto contract = [&](const FourTensord& x, const FourTensord& y) { return oracle::brute_b_tensor(x, y, gi); };
  const FourTensord gg = kn(g, g), rg = kn(ric, g);
  const FourTensord b = contract(rm, rm);

  // Curvature operator identities, evaluated in an orthonormal frame and pulled back.
  const MatrixXd e = orthonormal_frame<double>(g);
  const MatrixXd q = curvature_operator<double>(rm, g);
  out["trace_is_half_scalar"] = std::abs(2.0 * q.trace() - r) / std::max(1.0, std::abs(r));
  const FourTensord sq = from_frame<double>(tensor_from_operator<double>(q * q, n), e);
  out["square_from_B"] = rel(sq, b - reindex(b, {0, 1, 3, 2}));
  const FourTensord sharp = from_frame<double>(tensor_from_operator<double>(oracle::lie_sharp(q), n), e);
  out["sharp_from_B"] = rel(sharp, reindex(b, {0, 2, 1, 3}) - reindex(b, {0, 3, 1, 2}));
  // The library sharp (B identity route) against the structure-constant route.
  const MatrixXd lib = op_sharp<double>(q), lie = oracle::lie_sharp(q);
  out["sharp_dual_route"] = (lib - lie).cwiseAbs().maxCoeff() / std::max(1.0, lie.cwiseAbs().maxCoeff());

  out["weyl_round_trip"] = rel(riemann_from_weyl<double>(w, ric, r, g), rm);

  const MatrixXd rr = star<double>(rm, ric, gi), wr = star<double>(w, ric, gi);
  out["riem_star_ric"] =
      rel(kn(rr, g),
          kn(wr, g) - (2 / m) * kn(ric2, g) + (n * r / ((n - 1) * m)) * rg + (((n - 1) * rs - r * r) / ((n - 1) * m)) * gg);
  out["ricci_action_split"] = rel(ricci_action<double>(rm, ric, gi), ricci_action<double>(w, ric, gi) +
                                                                          (2 / m) * kn(ric2, g) + (2 / m) * kn(ric, ric) -
                                                                          (2 * r / ((n - 1) * m)) * rg);
  out["b_combination_split"] =
      rel(b_combination(b), b_combination(contract(w, w)) + (1 / m) * kn(wr, g) - (1 / (m * m)) * kn(ric2, g) +
                                (1 / (2 * m)) * kn(ric, ric) + (r / ((n - 1) * m * m)) * rg +
                                (rs / (2 * m * m) - r * r / (2 * (n - 1) * m * m)) * gg);

  // Kulkarni-Nomizu contractions X_apbq Y_csdt g^ps g^qt.
  out["gg_star_ric"] = [&] {
    const MatrixXd lhs = star<double>(gg, ric, gi), rhs = 2.0 * (r * g - ric);
    return (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
  }();
  out["ricg_star_ric"] = [&] {
    const MatrixXd lhs = star<double>(rg, ric, gi), rhs = -2.0 * ric2 + r * ric + rs * g;
    return (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
  }();
  out["contract_w_gg"] = rel(contract(w, gg) + contract(gg, w), -2.0 * reindex(w, {0, 3, 1, 2}) - 2.0 * reindex(w, {2, 1, 3, 0}));
  const MatrixXd gr = gi * ric;  // gr(p, x) = g^pq R_qx
  out["contract_w_ricg"] = rel(contract(w, rg) + contract(rg, w), build(n, [&](int a, int bb, int c, int d) {
                                 double s = 0.0;
                                 for (int p = 0; p < n; ++p)
                                   s += w(c, bb, d, p) * gr(p, a) + w(c, p, d, a) * gr(p, bb) + w(a, d, bb, p) * gr(p, c) +
                                        w(a, p, bb, c) * gr(p, d);
                                 return wr(a, bb) * g(c, d) + wr(c, d) * g(a, bb) - s;
                               }));
  out["contract_gg_gg"] = rel(contract(gg, gg), build(n, [&](int a, int bb, int c, int d) {
                                return 4.0 * ((n - 2) * g(a, bb) * g(c, d) + g(a, c) * g(bb, d));
                              }));
  out["contract_ricg_gg"] = rel(contract(rg, gg) + contract(gg, rg), build(n, [&](int a, int bb, int c, int d) {
                                  return 2.0 * ((n - 4) * ric(a, bb) * g(c, d) + (n - 4) * ric(c, d) * g(a, bb) +
                                                2 * ric(a, c) * g(bb, d) + 2 * ric(bb, d) * g(a, c)) +
                                         4.0 * r * g(a, bb) * g(c, d);
                                }));
  out["contract_ricg_ricg"] = rel(contract(rg, rg), build(n, [&](int a, int bb, int c, int d) {
                                    return -2 * ric2(a, bb) * g(c, d) - 2 * ric2(c, d) * g(a, bb) + ric2(a, c) * g(bb, d) +
                                           ric2(bb, d) * g(a, c) + (n - 4) * ric(a, bb) * ric(c, d) +
                                           2 * ric(a, c) * ric(bb, d) + r * (ric(a, bb) * g(c, d) + ric(c, d) * g(a, bb)) +
                                           rs * g(a, bb) * g(c, d);
                                  }));
  return out;
}

}  // namespace identity_suite
