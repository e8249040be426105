#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lowrank/error.hpp"
#include "lowrank/poly.hpp"

namespace lowrank {

/// Coefficients of a causal transfer function written in the delay operator:
/// num[j] and den[j] multiply z^{-j}; den[0] == 1.
struct DelayForm {
  std::vector<double> num;
  std::vector<double> den;
};

/// Scalar rational transfer function num(z)/den(z) in canonical form: common
/// roots cancelled, denominator monic. The zero function is 0/1.
class RatTF {
 public:
  RatTF() : den_(Poly::constant(1.0)) {}

  static RatTF constant(double c) { return reduce(Poly::constant(c), Poly::constant(1.0)); }

  /// z^{-k}
  static RatTF delay(int k) { return reduce(Poly::constant(1.0), Poly::monomial(k)); }

  /// z^{k}
  static RatTF advance(int k) { return reduce(Poly::monomial(k), Poly::constant(1.0)); }

  static RatTF reduce(Poly num, Poly den);

  /// Builds b(z^{-1}) / a(z^{-1}) from delay-operator coefficient lists.
  static RatTF from_delay(const std::vector<double>& b, const std::vector<double>& a) {
    if (a.empty() || a.front() == 0.0)
      fail(ErrorCode::invalid_input, "from_delay: denominator constant term must be nonzero");
    const std::size_t n = std::max(a.size(), b.size()) - 1;
    std::vector<double> num(n + 1, 0.0), den(n + 1, 0.0);
    for (std::size_t j = 0; j < b.size(); ++j) num[n - j] = b[j];
    for (std::size_t j = 0; j < a.size(); ++j) den[n - j] = a[j];
    return reduce(Poly(std::move(num)), Poly(std::move(den)));
  }

  const Poly& num() const noexcept { return num_; }
  const Poly& den() const noexcept { return den_; }

  bool is_zero() const noexcept { return num_.is_zero(); }
  int relative_degree() const noexcept { return den_.degree() - num_.degree(); }
  bool is_causal() const noexcept { return is_zero() || relative_degree() >= 0; }
  bool is_strictly_causal() const noexcept { return is_zero() || relative_degree() > 0; }

  /// Value at z -> infinity; only defined for causal functions.
  double at_infinity() const {
    if (!is_causal()) fail(ErrorCode::invalid_input, "at_infinity: non-causal transfer function");
    return relative_degree() == 0 ? num_.lead() / den_.lead() : 0.0;
  }

  Complex eval(Complex z) const {
    Complex d = den_.eval(z);
    double scale = 0.0, mag = 1.0;
    for (double c : den_.coeffs()) {
      scale += std::abs(c) * mag;
      mag *= std::abs(z);
    }
    if (std::abs(d) <= 1e-14 * scale) {
      std::ostringstream os;
      os << "evaluation at a pole z=" << z;
      fail(ErrorCode::singular_evaluation, os.str());
    }
    return num_.eval(z) / d;
  }

  DelayForm to_delay() const {
    if (!is_causal()) fail(ErrorCode::invalid_input, "to_delay: non-causal transfer function");
    const int n = den_.degree();
    DelayForm f;
    f.num.assign(static_cast<std::size_t>(n) + 1, 0.0);
    f.den.assign(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = 0; j <= n; ++j) {
      f.num[static_cast<std::size_t>(j)] = num_[static_cast<std::size_t>(n - j)];
      f.den[static_cast<std::size_t>(j)] = den_[static_cast<std::size_t>(n - j)];
    }
    while (f.num.size() > 1 && f.num.back() == 0.0) f.num.pop_back();
    while (f.den.size() > 1 && f.den.back() == 0.0) f.den.pop_back();
    if (is_zero()) f.num = {0.0};
    return f;
  }

  friend RatTF operator+(const RatTF& a, const RatTF& b) { return combine(a, b, 1.0); }
  friend RatTF operator-(const RatTF& a, const RatTF& b) { return combine(a, b, -1.0); }
  friend RatTF operator*(const RatTF& a, const RatTF& b) {
    return reduce(a.num_ * b.num_, a.den_ * b.den_);
  }
  friend RatTF operator/(const RatTF& a, const RatTF& b) {
    if (b.is_zero()) fail(ErrorCode::invalid_input, "division by the zero transfer function");
    return reduce(a.num_ * b.den_, a.den_ * b.num_);
  }
  friend RatTF operator*(double s, const RatTF& a) { return reduce(s * a.num_, a.den_); }
  RatTF operator-() const { return reduce(-num_, den_); }

  friend bool operator==(const RatTF&, const RatTF&) = default;

 private:
  RatTF(Poly n, Poly d) : num_(std::move(n)), den_(std::move(d)) {}

  // Sums over the least common denominator, so shared poles never appear
  // as repeated roots.
  static RatTF combine(const RatTF& a, const RatTF& b, double sign);

  Poly num_;
  Poly den_;
};

inline RatTF RatTF::reduce(Poly num, Poly den) {
  if (den.is_zero()) fail(ErrorCode::invalid_input, "reduce: zero denominator");
  if (num.is_zero()) return RatTF();
  // Powers of z are cancelled exactly so that pure delays stay exact.
  const int zn = num.low_order_zeros();
  const int zd = den.low_order_zeros();
  const int zc = std::min(zn, zd);
  auto drop = [](const Poly& p, int k) {
    return Poly(std::vector<double>(p.coeffs().begin() + k, p.coeffs().end()));
  };
  num = drop(num, zn);
  den = drop(den, zd);
  if (num.degree() > 0 && den.degree() > 0) {
    auto cn = cluster_roots(roots(num));
    auto cd = cluster_roots(roots(den));
    std::vector<Complex> common;
    for (auto& a : cn) {
      for (auto& b : cd) {
        if (b.multiplicity == 0 || !roots_match(a.center, b.center)) continue;
        const int k = std::min(a.multiplicity, b.multiplicity);
        const Complex mid = 0.5 * (a.center + b.center);
        for (int i = 0; i < k; ++i) common.push_back(mid);
        a.multiplicity -= k;
        b.multiplicity -= k;
        if (a.multiplicity == 0) break;
      }
    }
    if (!common.empty()) {
      const Poly factor = Poly::from_roots(common);
      num = divmod(num, factor).quotient;
      den = divmod(den, factor).quotient;
      if (num.is_zero() || den.is_zero())
        fail(ErrorCode::numeric, "reduce: common-factor division collapsed a polynomial");
    }
  }
  num = num.shifted(zn - zc);
  den = den.shifted(zd - zc);
  const double s = den.lead();
  if (s != 1.0) {
    num = (1.0 / s) * num;
    std::vector<double> d = den.coeffs();
    for (double& c : d) c /= s;
    d.back() = 1.0;
    den = Poly(std::move(d));
  }
  return RatTF(std::move(num), std::move(den));
}

namespace detail {

struct CommonSplit {
  Poly rest_a;  // a / g
  Poly rest_b;  // b / g
};

/// Removes from a and b the monic factor g built on their shared roots.
inline CommonSplit split_common(const Poly& a, const Poly& b) {
  if (a.degree() < 1 || b.degree() < 1) return {a, b};
  auto ca = cluster_roots(roots(a));
  auto cb = cluster_roots(roots(b));
  std::vector<Complex> common;
  for (auto& x : ca) {
    for (auto& y : cb) {
      if (y.multiplicity == 0 || !roots_match(x.center, y.center)) continue;
      const int k = std::min(x.multiplicity, y.multiplicity);
      const Complex mid = 0.5 * (x.center + y.center);
      for (int i = 0; i < k; ++i) common.push_back(mid);
      x.multiplicity -= k;
      y.multiplicity -= k;
      if (x.multiplicity == 0) break;
    }
  }
  if (common.empty()) return {a, b};
  const Poly g = Poly::from_roots(common);
  return {divmod(a, g).quotient, divmod(b, g).quotient};
}

}  // namespace detail

inline RatTF RatTF::combine(const RatTF& a, const RatTF& b, double sign) {
  if (a.den_ == b.den_) return reduce(cross_combine(a.num_, Poly{1.0}, b.num_, Poly{1.0}, sign), a.den_);
  const detail::CommonSplit s = detail::split_common(a.den_, b.den_);
  return reduce(cross_combine(a.num_, s.rest_b, b.num_, s.rest_a, sign), a.den_ * s.rest_b);
}

inline std::string to_string(const Poly& p) {
  std::ostringstream os;
  os << "[";
  for (std::size_t k = 0; k < p.coeffs().size(); ++k) os << (k ? ", " : "") << p.coeffs()[k];
  if (p.is_zero()) os << "0";
  os << "]";
  return os.str();
}

inline std::string to_string(const RatTF& w) {
  return "{num: " + to_string(w.num()) + ", den: " + to_string(w.den()) + "}";
}

/// W*(z) = W(1/z); for real coefficients this is the conjugate on the circle.
inline RatTF para_conjugate(const RatTF& w) {
  if (w.is_zero()) return w;
  const int dn = w.num().degree();
  const int dd = w.den().degree();
  Poly num = w.num().reversed();
  Poly den = w.den().reversed();
  if (dd > dn) num = num.shifted(dd - dn);
  if (dn > dd) den = den.shifted(dn - dd);
  return RatTF::reduce(std::move(num), std::move(den));
}

/// `count` angles evenly spaced on [0, pi], endpoints included.
inline std::vector<double> angle_grid(std::size_t count) {
  std::vector<double> a(count);
  for (std::size_t k = 0; k < count; ++k)
    a[k] = count == 1 ? 0.0 : std::numbers::pi * static_cast<double>(k) / static_cast<double>(count - 1);
  return a;
}

inline std::vector<Complex> eval_circle(const RatTF& w, const std::vector<double>& angles) {
  std::vector<Complex> out;
  out.reserve(angles.size());
  for (double th : angles) {
    try {
      out.push_back(w.eval(std::polar(1.0, th)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::singular_evaluation) throw;
      fail(ErrorCode::singular_evaluation, "eval_circle: pole on the unit circle at theta=" + std::to_string(th));
    }
  }
  return out;
}

struct PolesZeros {
  std::vector<Complex> poles;
  std::vector<Complex> zeros;
};

inline PolesZeros poles_zeros(const RatTF& w) {
  if (w.is_zero()) fail(ErrorCode::invalid_input, "poles_zeros: zero transfer function");
  return {roots(w.den()), roots(w.num())};
}

inline double max_modulus(const std::vector<Complex>& v) {
  double m = 0.0;
  for (const auto& x : v) m = std::max(m, std::abs(x));
  return m;
}

inline bool near_circle(Complex r) { return std::abs(std::abs(r) - 1.0) <= tol::kCircle; }

struct Classification {
  bool causal = false;
  bool strictly_causal = false;
  bool stable = false;
  bool minimum_phase = false;
  bool circle_pole = false;
  // A zero within the circle band: minimum phase cannot be decided.
  bool circle_zero = false;
};

inline Classification classify(const RatTF& w) {
  Classification c;
  c.causal = w.is_causal();
  c.strictly_causal = w.is_strictly_causal();
  const auto poles = roots(w.den());
  const auto zeros = w.is_zero() ? std::vector<Complex>{} : roots(w.num());
  for (const auto& p : poles) c.circle_pole = c.circle_pole || near_circle(p);
  for (const auto& z : zeros) c.circle_zero = c.circle_zero || near_circle(z);
  c.stable = max_modulus(poles) < 1.0 - tol::kCircle;
  c.minimum_phase = c.stable && !w.is_zero() && max_modulus(zeros) < 1.0 - tol::kCircle;
  return c;
}

inline bool is_stable(const RatTF& w) { return max_modulus(roots(w.den())) < 1.0 - tol::kCircle; }

struct ClosedLoop {
  RatTF p;  // (1 - F H)^{-1}
  RatTF q;  // (1 - H F)^{-1}
  std::array<std::array<RatTF, 2>, 2> t;
  bool internally_stable = false;
};

/// Feedback interconnection y1 = F y2 + v, y2 = H y1 + r.
inline ClosedLoop closed_loop(const RatTF& f, const RatTF& h) {
  if (!f.is_causal() || !h.is_causal())
    fail(ErrorCode::invalid_input, "closed_loop: F and H must be causal");
  if (std::abs(1.0 - f.at_infinity() * h.at_infinity()) <= 1e-12)
    fail(ErrorCode::singular_loop, "closed_loop: loop is not well posed (1 - F(inf) H(inf) = 0)");
  const RatTF one = RatTF::constant(1.0);
  const RatTF sens = one - f * h;
  if (sens.is_zero()) fail(ErrorCode::singular_loop, "closed_loop: 1 - F H is identically zero");
  ClosedLoop cl;
  cl.p = one / sens;
  cl.q = cl.p;
  cl.t = {{{cl.p, cl.p * f}, {cl.q * h, cl.q}}};
  cl.internally_stable = true;
  for (const auto& row : cl.t)
    for (const auto& entry : row) cl.internally_stable = cl.internally_stable && is_stable(entry);
  return cl;
}

struct SpectrumGrid {
  std::vector<double> angles;
  std::vector<Complex> phi11, phi12, phi21, phi22, det_phi;
};

struct Spectrum {
  SpectrumGrid grid;
  RatTF h;  // phi21 / phi11 = W2 / W1
};

/// Joint spectral density of [W1; W2] e with unit-variance scalar e.
inline Spectrum spectrum(const RatTF& w1, const RatTF& w2, const std::vector<double>& angles) {
  if (w1.is_zero()) fail(ErrorCode::invalid_input, "spectrum: W1 must be nonzero");
  for (const RatTF* w : {&w1, &w2}) {
    if (!w->is_causal() || !is_stable(*w))
      fail(ErrorCode::invalid_input, "spectrum: W1 and W2 must be stable and causal");
  }
  Spectrum s;
  s.grid.angles = angles;
  const auto v1 = eval_circle(w1, angles);
  const auto v2 = eval_circle(w2, angles);
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const Complex p11 = std::norm(v1[k]);
    const Complex p22 = std::norm(v2[k]);
    const Complex p12 = v1[k] * std::conj(v2[k]);
    const Complex p21 = std::conj(p12);
    s.grid.phi11.push_back(p11);
    s.grid.phi22.push_back(p22);
    s.grid.phi12.push_back(p12);
    s.grid.phi21.push_back(p21);
    s.grid.det_phi.push_back(p11 * p22 - p12 * p21);
  }
  s.h = w2 / w1;
  return s;
}

}  // namespace lowrank
