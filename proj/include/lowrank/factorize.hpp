#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/error.hpp"
#include "lowrank/poly.hpp"
#include "lowrank/ratfun.hpp"

namespace lowrank {

/// W = outer * inner with outer minimum phase and |inner| = 1 on the circle.
struct OuterInnerPair {
  RatTF outer;
  RatTF inner;
};

namespace detail {

inline void reject_circle_roots(const std::vector<Complex>& rts, ErrorCode code, const char* what) {
  for (const auto& r : rts) {
    if (near_circle(r)) {
      std::ostringstream os;
      os << what << ": root " << r << " lies on the unit circle";
      fail(code, os.str());
    }
  }
}

inline std::vector<Complex> outside_disc(const std::vector<Complex>& rts) {
  std::vector<Complex> out;
  for (const auto& r : rts)
    if (std::abs(r) > 1.0) out.push_back(r);
  return out;
}

// prod(z - a) / prod(1 - a z): real-coefficient Blaschke product, equal to 1 at z = 1.
inline RatTF blaschke(const std::vector<Complex>& zeros) {
  const Poly o = Poly::from_roots(zeros);
  return RatTF::reduce(o, o.reversed());
}

inline bool is_inner(const RatTF& q, double tolerance) {
  if (q.is_zero() || !q.is_causal() || !is_stable(q)) return false;
  for (const auto& v : eval_circle(q, angle_grid(64)))
    if (std::abs(std::abs(v) - 1.0) > tolerance) return false;
  return true;
}

}  // namespace detail

/// Moves every zero outside the closed disc to its reflection 1/conj(a); the
/// removed zeros form the inner factor, normalized to Q(1) = 1.
inline OuterInnerPair outer_inner(const RatTF& w) {
  if (w.is_zero()) fail(ErrorCode::invalid_input, "outer_inner: zero transfer function");
  if (!w.is_causal() || !is_stable(w))
    fail(ErrorCode::invalid_input, "outer_inner: W must be stable and causal");
  const auto zeros = roots(w.num());
  detail::reject_circle_roots(zeros, ErrorCode::indeterminate_zero, "outer_inner");
  const auto outside = detail::outside_disc(zeros);
  if (outside.empty()) return {w, RatTF::constant(1.0)};
  const Poly o = Poly::from_roots(outside);
  const Poly outer_num = divmod(w.num(), o).quotient * o.reversed();
  return {RatTF::reduce(outer_num, w.den()), RatTF::reduce(o, o.reversed())};
}

/// Greatest common inner divisor of two scalar inner functions: the Blaschke
/// product over their common zeros (plus any common delay).
inline RatTF inner_gcd(const RatTF& qa, const RatTF& qb) {
  if (!detail::is_inner(qa, 1e-8) || !detail::is_inner(qb, 1e-8))
    fail(ErrorCode::invalid_input, "inner_gcd: arguments must be inner");
  auto ca = cluster_roots(roots(qa.num()));
  auto cb = cluster_roots(roots(qb.num()));
  std::vector<Complex> common;
  for (auto& a : ca) {
    for (auto& b : cb) {
      if (b.multiplicity == 0 || !roots_match(a.center, b.center)) continue;
      const int k = std::min(a.multiplicity, b.multiplicity);
      for (int i = 0; i < k; ++i) common.push_back(0.5 * (a.center + b.center));
      a.multiplicity -= k;
      b.multiplicity -= k;
      if (a.multiplicity == 0) break;
    }
  }
  const int delay = std::min(qa.relative_degree(), qb.relative_degree());
  RatTF g = detail::blaschke(common);
  if (delay > 0) g = g * RatTF::delay(delay);
  return g;
}

/// Causal projection [W]+: the part of the Laurent expansion of W on the unit
/// circle carrying z^{-k}, k >= 0. Partial fractions split the poles inside
/// and outside the circle; of the polynomial part only the constant is causal.
inline RatTF causal_project(const RatTF& w) {
  if (w.is_zero()) return w;
  const auto poles = roots(w.den());
  detail::reject_circle_roots(poles, ErrorCode::singular_projection, "causal_project");
  std::vector<Complex> inside, outside;
  for (const auto& p : poles) (std::abs(p) < 1.0 ? inside : outside).push_back(p);
  if (outside.empty() && w.is_causal()) return w;

  Poly d_in, d_out;
  if (outside.empty()) {
    d_in = w.den();
    d_out = Poly::constant(1.0);
  } else if (inside.empty()) {
    d_in = Poly::constant(1.0);
    d_out = w.den();
  } else {
    d_in = Poly::from_roots(inside);
    d_out = divmod(w.den(), d_in).quotient;
  }
  const Poly den = d_in * d_out;
  const auto [poly_part, rem] = divmod(w.num(), den);

  // rem = A * d_out + B * d_in with deg A < deg d_in, deg B < deg d_out.
  const int n_in = d_in.degree();
  const int n_out = d_out.degree();
  const int n = n_in + n_out;
  Eigen::VectorXd a_coef = Eigen::VectorXd::Zero(n_in);
  Eigen::VectorXd b_coef = Eigen::VectorXd::Zero(n_out);
  if (n > 0) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n_in; ++j)
      for (int k = 0; k <= n_out; ++k) m(j + k, j) = d_out[static_cast<std::size_t>(k)];
    for (int j = 0; j < n_out; ++j)
      for (int k = 0; k <= n_in; ++k) m(j + k, n_in + j) = d_in[static_cast<std::size_t>(k)];
    Eigen::VectorXd rhs(n);
    for (int k = 0; k < n; ++k) rhs(k) = rem[static_cast<std::size_t>(k)];
    const Eigen::VectorXd sol = m.fullPivLu().solve(rhs);
    if (!sol.allFinite()) fail(ErrorCode::numeric, "causal_project: partial-fraction system is singular");
    a_coef = sol.head(n_in);
    b_coef = sol.tail(n_out);
  }
  double c0 = poly_part[0];
  if (n_out > 0) c0 += b_coef(0) / d_out[0];
  if (n_in == 0) return RatTF::constant(c0);
  const Poly a_poly(std::vector<double>(a_coef.data(), a_coef.data() + n_in));
  return RatTF::reduce(c0 * d_in + a_poly, d_in);
}

/// Spectrally equivalent polynomial with every root inside the unit circle:
/// roots a with |a| > 1 are reflected to 1/conj(a) with gain |a|. The sign of
/// the leading coefficient is preserved.
inline Poly stabilize_poly(const Poly& d) {
  if (d.is_zero()) fail(ErrorCode::invalid_input, "stabilize_poly: zero polynomial");
  const auto rts = roots(d);
  detail::reject_circle_roots(rts, ErrorCode::indeterminate_zero, "stabilize_poly");
  const auto outside = detail::outside_disc(rts);
  if (outside.empty()) return d;
  const Poly o = Poly::from_roots(outside);
  Poly out = divmod(d, o).quotient * o.reversed();
  if ((out.lead() < 0.0) != (d.lead() < 0.0)) out = -out;
  return out;
}

}  // namespace lowrank
