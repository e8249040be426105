#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/error.hpp"

namespace lowrank {

using Complex = std::complex<double>;

namespace tol {
// Two roots are considered common when |r1 - r2| <= kRootMatch * max(1, |r1|).
inline constexpr double kRootMatch = 1e-8;
// Roots whose modulus lies within this band of 1 are "on the circle".
inline constexpr double kCircle = 1e-9;
// A coefficient produced by adding/subtracting terms is treated as an exact
// zero when it is below this fraction of the magnitude of the terms.
inline constexpr double kCancel = 1e-12;
// Roots of one polynomial closer than this (relative) are grouped into a
// cluster and represented by their centroid when matching.
inline constexpr double kCluster = 1e-5;
}  // namespace tol

/// Real polynomial in z with ascending coefficients: coeffs()[k] multiplies z^k.
/// The zero polynomial has no coefficients and degree -1.
class Poly {
 public:
  Poly() = default;

  explicit Poly(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    for (double& v : c_) {
      if (!std::isfinite(v)) fail(ErrorCode::invalid_input, "Poly: non-finite coefficient");
      if (v == 0.0) v = 0.0;
    }
    trim();
  }

  Poly(std::initializer_list<double> coeffs) : Poly(std::vector<double>(coeffs)) {}

  static Poly constant(double c) { return Poly(std::vector<double>{c}); }

  static Poly monomial(int k, double c = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(k) + 1, 0.0);
    v.back() = c;
    return Poly(std::move(v));
  }

  /// Monic polynomial with the given roots, scaled by `lead`. Roots must be
  /// closed under conjugation; imaginary residue of the product is dropped.
  static Poly from_roots(std::span<const Complex> roots, double lead = 1.0) {
    std::vector<Complex> acc{Complex(1.0)};
    for (const Complex& r : roots) {
      std::vector<Complex> next(acc.size() + 1, Complex(0.0));
      for (std::size_t k = 0; k < acc.size(); ++k) {
        next[k + 1] += acc[k];
        next[k] -= r * acc[k];
      }
      acc = std::move(next);
    }
    std::vector<double> re(acc.size());
    for (std::size_t k = 0; k < acc.size(); ++k) re[k] = lead * acc[k].real();
    return Poly(std::move(re));
  }

  const std::vector<double>& coeffs() const noexcept { return c_; }
  int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const noexcept { return c_.empty(); }
  double lead() const noexcept { return c_.empty() ? 0.0 : c_.back(); }

  double operator[](std::size_t k) const noexcept { return k < c_.size() ? c_[k] : 0.0; }

  template <class T>
  T eval(T z) const {
    T acc{0.0};
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  Poly derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Poly(std::move(d));
  }

  /// z^deg * p(1/z).
  Poly reversed() const { return Poly(std::vector<double>(c_.rbegin(), c_.rend())); }

  /// Multiplication by z^k.
  Poly shifted(int k) const {
    if (is_zero()) return {};
    std::vector<double> v(static_cast<std::size_t>(k), 0.0);
    v.insert(v.end(), c_.begin(), c_.end());
    return Poly(std::move(v));
  }

  double norm_inf() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Number of exact zero low-order coefficients (multiplicity of the root at 0).
  int low_order_zeros() const {
    int k = 0;
    while (k < static_cast<int>(c_.size()) && c_[static_cast<std::size_t>(k)] == 0.0) ++k;
    return k;
  }

  friend bool operator==(const Poly&, const Poly&) = default;

  friend Poly operator*(double s, const Poly& p) {
    std::vector<double> v = p.c_;
    for (double& x : v) x *= s;
    return Poly(std::move(v));
  }

  friend Poly operator*(const Poly& a, const Poly& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<double> v(a.c_.size() + b.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) v[i + j] += a.c_[i] * b.c_[j];
    return Poly(std::move(v));
  }

  friend Poly operator+(const Poly& a, const Poly& b) { return combine(a, b, 1.0); }
  friend Poly operator-(const Poly& a, const Poly& b) { return combine(a, b, -1.0); }
  Poly operator-() const { return -1.0 * *this; }

 private:
  // a + sign*b; coefficients that cancel to rounding level become exact zeros.
  static Poly combine(const Poly& a, const Poly& b, double sign) {
    std::size_t n = std::max(a.c_.size(), b.c_.size());
    std::vector<double> v(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      double x = a[k];
      double y = sign * b[k];
      double s = x + y;
      if (std::abs(s) <= tol::kCancel * (std::abs(x) + std::abs(y))) s = 0.0;
      v[k] = s;
    }
    return Poly(std::move(v));
  }

  void trim() {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
  }

  std::vector<double> c_;
};

/// Product of two polynomials that also returns the coefficient-wise
/// magnitude scale (|a| * |b|); used to detect cancellation in sums of products.
inline std::pair<Poly, std::vector<double>> multiply_with_scale(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return {Poly{}, {}};
  std::size_t n = a.coeffs().size() + b.coeffs().size() - 1;
  std::vector<double> v(n, 0.0), s(n, 0.0);
  for (std::size_t i = 0; i < a.coeffs().size(); ++i)
    for (std::size_t j = 0; j < b.coeffs().size(); ++j) {
      double t = a.coeffs()[i] * b.coeffs()[j];
      v[i + j] += t;
      s[i + j] += std::abs(t);
    }
  return {Poly(std::move(v)), std::move(s)};
}

/// a*b + sign*c*d with rounding-level cancellation snapped to zero. The
/// threshold uses the magnitudes of the individual products, so a leading
/// coefficient that cancels in exact arithmetic does not survive as noise.
inline Poly cross_combine(const Poly& a, const Poly& b, const Poly& c, const Poly& d, double sign) {
  auto [ab, sab] = multiply_with_scale(a, b);
  auto [cd, scd] = multiply_with_scale(c, d);
  std::size_t n = std::max(sab.size(), scd.size());
  std::vector<double> v(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double x = ab[k];
    double y = sign * cd[k];
    double scale = (k < sab.size() ? sab[k] : 0.0) + (k < scd.size() ? scd[k] : 0.0);
    double s = x + y;
    if (std::abs(s) <= tol::kCancel * scale) s = 0.0;
    v[k] = s;
  }
  return Poly(std::move(v));
}

struct PolyDivision {
  Poly quotient;
  Poly remainder;
};

inline PolyDivision divmod(const Poly& num, const Poly& den) {
  if (den.is_zero()) fail(ErrorCode::invalid_input, "divmod: division by the zero polynomial");
  if (num.degree() < den.degree()) return {Poly{}, num};
  std::vector<double> r = num.coeffs();
  const auto& d = den.coeffs();
  const int dn = den.degree();
  std::vector<double> q(static_cast<std::size_t>(num.degree() - dn) + 1, 0.0);
  for (int k = num.degree() - dn; k >= 0; --k) {
    double coef = r[static_cast<std::size_t>(k + dn)] / d.back();
    q[static_cast<std::size_t>(k)] = coef;
    for (int j = 0; j <= dn; ++j) r[static_cast<std::size_t>(k + j)] -= coef * d[static_cast<std::size_t>(j)];
    r[static_cast<std::size_t>(k + dn)] = 0.0;
  }
  r.resize(static_cast<std::size_t>(std::max(dn, 0)));
  return {Poly(std::move(q)), Poly(std::move(r))};
}

namespace detail {

inline Complex polish_root(const Poly& p, const Poly& dp, Complex r) {
  Complex best = r;
  double best_res = std::abs(p.eval(r));
  for (int it = 0; it < 4 && best_res > 0.0; ++it) {
    Complex d = dp.eval(best);
    if (d == Complex(0.0)) break;
    Complex cand = best - p.eval(best) / d;
    double res = std::abs(p.eval(cand));
    if (!(res < best_res)) break;
    best = cand;
    best_res = res;
  }
  return best;
}

}  // namespace detail

/// Roots of p via eigenvalues of the companion matrix, each polished with a
/// few Newton steps on p. Exact zero low-order coefficients give exact zero
/// roots; complex roots come out in exact conjugate pairs.
inline std::vector<Complex> roots(const Poly& p) {
  std::vector<Complex> out;
  if (p.degree() <= 0) return out;
  const int zeros = p.low_order_zeros();
  out.assign(static_cast<std::size_t>(zeros), Complex(0.0));
  Poly q(std::vector<double>(p.coeffs().begin() + zeros, p.coeffs().end()));
  const int d = q.degree();
  if (d == 1) {
    out.emplace_back(-q[0] / q[1], 0.0);
  } else if (d > 1) {
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(d, d);
    const double lead = q.lead();
    for (int j = 0; j < d; ++j) companion(0, j) = -q[static_cast<std::size_t>(d - 1 - j)] / lead;
    for (int i = 1; i < d; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success)
      fail(ErrorCode::numeric, "roots: companion eigenvalue iteration did not converge (degree " +
                                   std::to_string(d) + ")");
    const Poly dq = q.derivative();
    const auto& ev = solver.eigenvalues();
    for (int i = 0; i < d; ++i) {
      Complex r = ev(i);
      if (r.imag() == 0.0) {
        double x = detail::polish_root(q, dq, Complex(r.real(), 0.0)).real();
        out.emplace_back(x, 0.0);
      } else if (r.imag() > 0.0) {
        Complex x = detail::polish_root(q, dq, r);
        if (x.imag() <= 0.0) x = r;
        out.push_back(x);
        out.push_back(std::conj(x));
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Complex& a, const Complex& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

/// A root together with its multiplicity inside one polynomial.
struct RootCluster {
  Complex center;
  int multiplicity = 1;
};

/// Groups numerically split multiple roots; the centroid of a perturbed
/// k-fold root is far more accurate than the individual roots.
inline std::vector<RootCluster> cluster_roots(const std::vector<Complex>& rts) {
  std::vector<RootCluster> clusters;
  std::vector<bool> used(rts.size(), false);
  for (std::size_t i = 0; i < rts.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    Complex sum = rts[i];
    int count = 1;
    const double radius = tol::kCluster * std::max(1.0, std::abs(rts[i]));
    for (std::size_t j = i + 1; j < rts.size(); ++j) {
      if (!used[j] && std::abs(rts[j] - rts[i]) <= radius) {
        used[j] = true;
        sum += rts[j];
        ++count;
      }
    }
    Complex c = sum / static_cast<double>(count);
    if (std::abs(c.imag()) <= tol::kCluster * std::max(1.0, std::abs(c))) c = Complex(c.real(), 0.0);
    clusters.push_back({c, count});
  }
  return clusters;
}

inline bool roots_match(Complex a, Complex b) {
  return std::abs(a - b) <= tol::kRootMatch * std::max(1.0, std::abs(a));
}

}  // namespace lowrank
