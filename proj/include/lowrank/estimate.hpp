#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/error.hpp"
#include "lowrank/factorize.hpp"
#include "lowrank/ratfun.hpp"
#include "lowrank/simulate.hpp"

namespace lowrank {

// ---------------------------------------------------------------------------
// Least squares

struct LstsqResult {
  Eigen::VectorXd x;
  int rank = 0;
  double rss = 0.0;
};

/// Minimum-norm least-squares solution; singular values below
/// 1e-10 * sigma_max are treated as zero.
inline LstsqResult lstsq_min_norm(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  LstsqResult r;
  r.x = svd.solve(b);
  r.rank = static_cast<int>(svd.rank());
  r.rss = (a * r.x - b).squaredNorm();
  return r;
}

// ---------------------------------------------------------------------------
// ARX-type regressions

/// A(z^-1) y(t) = B(z^-1) x(t - delay) fitted by least squares, with
/// A = 1 + a_1 z^-1 + ... + a_q z^-q and B = b_0 + ... + b_r z^-r.
/// With pin_b0 the coefficient b_0 is fixed to 1 and moved to the left side.
struct ArxFit {
  std::vector<double> a;
  std::vector<double> b;
  int q = 0;
  int r = 0;
  std::size_t rows = 0;
  int params = 0;
  int rank = 0;
  double rss = 0.0;
  double residual_rms = 0.0;
  bool rank_warning = false;
};

inline std::size_t arx_first_row(int q, int r, int delay) {
  return static_cast<std::size_t>(std::max(q, r + delay));
}

inline ArxFit fit_arx(const TimeSeries& y, const TimeSeries& x, int q, int r, int delay, bool pin_b0,
                      std::optional<std::size_t> first_row = std::nullopt) {
  if (q < 0 || r < 0 || delay < 0) fail(ErrorCode::invalid_input, "fit_arx: orders must be >= 0");
  if (y.n() != x.n()) fail(ErrorCode::invalid_input, "fit_arx: series lengths differ");
  const std::size_t t0 = first_row.value_or(arx_first_row(q, r, delay));
  if (t0 < arx_first_row(q, r, delay)) fail(ErrorCode::invalid_input, "fit_arx: first row too early for orders");
  const int b_free = pin_b0 ? r : r + 1;
  const int params = q + b_free;
  if (y.n() <= t0 || y.n() - t0 < static_cast<std::size_t>(std::max(params, 1)))
    fail(ErrorCode::invalid_input, "fit_arx: insufficient data for the requested orders");

  const std::size_t rows = y.n() - t0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), params);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t t = t0 + i;
    const auto row = static_cast<Eigen::Index>(i);
    rhs(row) = y[t] - (pin_b0 ? x[t - static_cast<std::size_t>(delay)] : 0.0);
    for (int k = 1; k <= q; ++k) m(row, k - 1) = -y[t - static_cast<std::size_t>(k)];
    for (int k = pin_b0 ? 1 : 0, col = q; k <= r; ++k, ++col)
      m(row, col) = x[t - static_cast<std::size_t>(delay + k)];
  }
  ArxFit fit;
  fit.q = q;
  fit.r = r;
  fit.rows = rows;
  fit.params = params;
  if (params > 0) {
    const LstsqResult ls = lstsq_min_norm(m, rhs);
    fit.rank = ls.rank;
    fit.rss = ls.rss;
    fit.rank_warning = ls.rank < params;
    for (int k = 0; k < q; ++k) fit.a.push_back(ls.x(k));
    if (pin_b0) fit.b.push_back(1.0);
    for (int k = q; k < params; ++k) fit.b.push_back(ls.x(k));
  } else {
    fit.b.push_back(1.0);
    fit.rss = rhs.squaredNorm();
  }
  fit.residual_rms = std::sqrt(fit.rss / static_cast<double>(rows));
  return fit;
}

/// B(z^-1)/A(z^-1) of an ARX fit, optionally preceded by extra delays.
inline RatTF arx_transfer(const ArxFit& fit, int delay = 0) {
  std::vector<double> num(static_cast<std::size_t>(delay), 0.0);
  num.insert(num.end(), fit.b.begin(), fit.b.end());
  std::vector<double> den{1.0};
  den.insert(den.end(), fit.a.begin(), fit.a.end());
  return RatTF::from_delay(num, den);
}

/// Deterministic relation A(z^-1) y2 = B(z^-1) y1 fitted by least squares.
struct RelationFit {
  std::vector<double> a;  // a_1..a_q
  std::vector<double> b;  // b_0..b_r
  RatTF h_hat;
  double residual_rms = 0.0;
  int solver_rank = 0;
  int params = 0;
  std::size_t rows = 0;
  double rss = 0.0;
  bool rank_warning = false;
};

inline RelationFit to_relation(const ArxFit& f) {
  return {f.a, f.b, arx_transfer(f), f.residual_rms, f.rank, f.params, f.rows, f.rss, f.rank_warning};
}

inline RelationFit fit_relation(const TimeSeries& y1, const TimeSeries& y2, int q, int r, bool pin_b0 = false) {
  if (q < 0 || r < 0) fail(ErrorCode::invalid_input, "fit_relation: orders must be >= 0");
  if (y1.n() != y2.n()) fail(ErrorCode::invalid_input, "fit_relation: series lengths differ");
  if (y1.n() <= static_cast<std::size_t>(q + r + 1 + std::max(q, r)))
    fail(ErrorCode::invalid_input, "fit_relation: insufficient data for orders (q, r)");
  return to_relation(fit_arx(y2, y1, q, r, 0, pin_b0));
}

// ---------------------------------------------------------------------------
// BIC order selection

inline constexpr double kBicRssFloor = 1e-24;

struct BicTable {
  std::map<std::pair<int, int>, double> entries;
  std::pair<int, int> best{0, 0};
  std::size_t rows = 0;
};

inline double bic_value(double rss, std::size_t rows, int params) {
  const double n = static_cast<double>(rows);
  const double clamped = std::max(rss, n * kBicRssFloor);
  return n * std::log(clamped / n) + params * std::log(n);
}

/// Scans (q, r) in [0, q_max] x [0, r_max]. Every model is fitted on the same
/// rows (those usable by the largest model) so the scores are comparable.
/// Ties go to the smallest q + r, then the smallest q.
inline BicTable scan_bic_arx(const TimeSeries& y, const TimeSeries& x, int q_max, int r_max, int delay,
                             bool pin_b0) {
  if (q_max < 0 || r_max < 0) fail(ErrorCode::invalid_input, "scan_bic: maximum orders must be >= 0");
  const std::size_t t0 = arx_first_row(q_max, r_max, delay);
  BicTable table;
  bool have = false;
  double best = 0.0;
  for (int q = 0; q <= q_max; ++q) {
    for (int r = 0; r <= r_max; ++r) {
      const ArxFit fit = fit_arx(y, x, q, r, delay, pin_b0, t0);
      const double v = bic_value(fit.rss, fit.rows, fit.params);
      table.entries[{q, r}] = v;
      table.rows = fit.rows;
      const auto [bq, br] = table.best;
      const bool better = !have || v < best || (v == best && (q + r < bq + br || (q + r == bq + br && q < bq)));
      if (better) {
        best = v;
        table.best = {q, r};
        have = true;
      }
    }
  }
  return table;
}

inline BicTable scan_bic(const TimeSeries& y1, const TimeSeries& y2, int q_max, int r_max, bool pin_b0 = false) {
  if (y1.n() != y2.n()) fail(ErrorCode::invalid_input, "scan_bic: series lengths differ");
  if (y1.n() <= static_cast<std::size_t>(q_max + r_max + 1 + std::max(q_max, r_max)))
    fail(ErrorCode::invalid_input, "scan_bic: insufficient data for the largest model");
  return scan_bic_arx(y2, y1, q_max, r_max, 0, pin_b0);
}

// ---------------------------------------------------------------------------
// AR / ARMA

/// A(z^-1) y = C(z^-1) e. For AR fits `ma` is empty and g_hat = 1/A; ARMA fits
/// embed the innovation scale: g_hat = lambda * C / A.
struct ArmaFit {
  std::vector<double> ar;
  std::vector<double> ma;
  double innovation_variance = 0.0;
  RatTF g_hat;
  bool minimum_phase = false;
  bool rank_warning = false;
  bool ma_stabilized = false;
};
using ARFit = ArmaFit;
using ARMAFit = ArmaFit;

namespace detail {

struct LaggedRegression {
  Eigen::MatrixXd m;
  Eigen::VectorXd rhs;
};

// y(t) on [-y(t-1..p), e(t-1..q)] for t in [start, n).
inline LaggedRegression lagged(const std::vector<double>& y, const std::vector<double>& e, int p, int q,
                               std::size_t start) {
  const std::size_t rows = y.size() - start;
  LaggedRegression reg{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), p + q),
                       Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t t = start + i;
    const auto row = static_cast<Eigen::Index>(i);
    reg.rhs(row) = y[t];
    for (int k = 1; k <= p; ++k) reg.m(row, k - 1) = -y[t - static_cast<std::size_t>(k)];
    for (int k = 1; k <= q; ++k) reg.m(row, p + k - 1) = e[t - static_cast<std::size_t>(k)];
  }
  return reg;
}

// Replaces the MA polynomial by its spectrally equivalent minimum-phase
// version, renormalized to a unit constant term.
inline bool make_invertible(std::vector<double>& ma) {
  if (ma.empty()) return false;
  std::vector<double> z_form(ma.size() + 1);
  z_form.back() = 1.0;
  for (std::size_t k = 0; k < ma.size(); ++k) z_form[ma.size() - 1 - k] = ma[k];
  const Poly c(z_form);
  bool outside = false;
  for (const auto& r : roots(c)) outside = outside || std::abs(r) >= 1.0 - tol::kCircle;
  if (!outside) return false;
  const Poly s = stabilize_poly(c);
  for (std::size_t k = 0; k < ma.size(); ++k) ma[k] = s[ma.size() - 1 - k] / s.lead();
  return true;
}

inline RatTF arma_transfer(const std::vector<double>& ar, const std::vector<double>& ma, double gain) {
  std::vector<double> num{gain}, den{1.0};
  for (double c : ma) num.push_back(gain * c);
  den.insert(den.end(), ar.begin(), ar.end());
  return RatTF::from_delay(num, den);
}

}  // namespace detail

/// Conditional least squares AR(order) fit.
inline ArmaFit fit_ar(const TimeSeries& y, int order) {
  if (order < 0) fail(ErrorCode::invalid_input, "fit_ar: order must be >= 0");
  if (y.n() <= static_cast<std::size_t>(3 * order) || y.n() == 0)
    fail(ErrorCode::invalid_input, "fit_ar: insufficient data for the requested order");
  ArmaFit fit;
  const auto start = static_cast<std::size_t>(order);
  const auto reg = detail::lagged(y.samples, {}, order, 0, start);
  double rss = reg.rhs.squaredNorm();
  if (order > 0) {
    const LstsqResult ls = lstsq_min_norm(reg.m, reg.rhs);
    fit.ar.assign(ls.x.data(), ls.x.data() + order);
    fit.rank_warning = ls.rank < order;
    rss = ls.rss;
  }
  fit.innovation_variance = rss / static_cast<double>(y.n() - start);
  fit.g_hat = detail::arma_transfer(fit.ar, {}, 1.0);
  fit.minimum_phase = classify(fit.g_hat).minimum_phase;
  return fit;
}

inline constexpr int kArmaRefinePasses = 20;

/// Hannan-Rissanen ARMA(p, q): a long AR fit supplies innovation proxies, a
/// linear regression on lagged outputs and proxies gives the ARMA
/// coefficients. Refinement repeats the regression on the residuals of the
/// current model while the prediction-error variance decreases. Non-invertible
/// MA estimates are replaced by their spectrally equivalent minimum-phase
/// version.
inline ArmaFit fit_arma(const TimeSeries& y, int p, int q, bool refine = true) {
  if (p < 0 || q < 0) fail(ErrorCode::invalid_input, "fit_arma: orders must be >= 0");
  const std::size_t n = y.n();
  if (n < static_cast<std::size_t>(10 * (p + q + 1)))
    fail(ErrorCode::invalid_input, "fit_arma: insufficient data for the requested orders");
  if (q == 0) {
    ArmaFit fit = fit_ar(y, p);
    fit.g_hat = detail::arma_transfer(fit.ar, {}, std::sqrt(fit.innovation_variance));
    return fit;
  }

  const int long_order = std::max(1, std::min<int>(20, static_cast<int>(n / 10)));
  const std::size_t start = static_cast<std::size_t>(long_order + std::max(p, q));
  if (start + static_cast<std::size_t>(p + q) >= n)
    fail(ErrorCode::invalid_input, "fit_arma: insufficient data after the long AR stage");

  const ArmaFit long_ar = fit_ar(y, long_order);
  const RatTF whiten = RatTF::from_delay([&] {
    std::vector<double> a{1.0};
    a.insert(a.end(), long_ar.ar.begin(), long_ar.ar.end());
    return a;
  }(), {1.0});
  std::vector<double> proxy = filter(whiten, y).samples;
  std::fill(proxy.begin(), proxy.begin() + long_order, 0.0);

  ArmaFit fit;
  auto solve = [&](const std::vector<double>& innovations) {
    const auto reg = detail::lagged(y.samples, innovations, p, q, start);
    const LstsqResult ls = lstsq_min_norm(reg.m, reg.rhs);
    fit.rank_warning = fit.rank_warning || ls.rank < p + q;
    fit.ar.assign(ls.x.data(), ls.x.data() + p);
    fit.ma.assign(ls.x.data() + p, ls.x.data() + p + q);
    fit.ma_stabilized = detail::make_invertible(fit.ma) || fit.ma_stabilized;
  };
  // Prediction errors A/C y; C is kept invertible so the filter is stable.
  auto residuals = [&] {
    std::vector<double> num{1.0}, den{1.0};
    num.insert(num.end(), fit.ar.begin(), fit.ar.end());
    den.insert(den.end(), fit.ma.begin(), fit.ma.end());
    return filter(RatTF::from_delay(num, den), y).samples;
  };
  auto mean_square = [&](const std::vector<double>& e) {
    double ss = 0.0;
    for (std::size_t t = start; t < n; ++t) ss += e[t] * e[t];
    return ss / static_cast<double>(n - start);
  };

  solve(proxy);
  std::vector<double> e = residuals();
  fit.innovation_variance = mean_square(e);
  // Each pass regresses on the previous pass's residuals; the pass with the
  // smallest prediction-error variance is kept.
  for (int pass = 0; refine && pass < kArmaRefinePasses; ++pass) {
    const ArmaFit previous = fit;
    solve(e);
    std::vector<double> e_next = residuals();
    const double v = mean_square(e_next);
    if (!(v < previous.innovation_variance)) {
      fit = previous;
      break;
    }
    const bool converged = previous.innovation_variance - v <= 1e-10 * previous.innovation_variance;
    fit.innovation_variance = v;
    e = std::move(e_next);
    if (converged) break;
  }
  fit.g_hat = detail::arma_transfer(fit.ar, fit.ma, std::sqrt(fit.innovation_variance));
  fit.minimum_phase = classify(fit.g_hat).minimum_phase;
  return fit;
}

// ---------------------------------------------------------------------------
// Exact-chain operations

struct RecoveredBlocks {
  RatTF w1;
  RatTF w2;
  RatTF q1;
};

/// Restores the inner factor Q1 lost by fitting a minimum-phase model to y1:
/// its zeros are the unstable poles of H * G1, so that W2 = H G1 Q1 is stable.
inline RecoveredBlocks recover_w1_w2(const RatTF& g1, const RatTF& h) {
  const Classification c = classify(g1);
  if (!c.causal || !c.minimum_phase) fail(ErrorCode::invalid_input, "recover_w1_w2: G1 must be minimum phase");
  const RatTF x = h * g1;
  const auto poles = roots(x.den());
  detail::reject_circle_roots(poles, ErrorCode::indeterminate_zero, "recover_w1_w2");
  const RatTF q1 = detail::blaschke(detail::outside_disc(poles));
  RecoveredBlocks out{g1 * q1, x * q1, q1};
  if (!is_stable(out.w2) || !out.w2.is_causal())
    fail(ErrorCode::inconsistency,
         "recover_w1_w2: W2 = H G1 Q1 is unstable; inputs are not compatible with a low-rank model");
  return out;
}

/// Canonical feedback pair: F+ is the one-step Wiener predictor of y1 from
/// the strict past of y2 and K the transfer function of its error.
struct WienerPair {
  RatTF f_plus;
  RatTF k;
  RatTF h;
  RatTF g2;
  RatTF q2;
  bool joint_minimum_phase = true;
  double reconstruction_error = 0.0;
};

inline WienerPair wiener_predictor(const RatTF& w1, const RatTF& w2) {
  for (const RatTF* w : {&w1, &w2}) {
    if (!w->is_causal() || !is_stable(*w))
      fail(ErrorCode::invalid_input, "wiener_predictor: W1 and W2 must be stable and causal");
  }
  if (w2.is_zero() || w1.is_zero()) fail(ErrorCode::invalid_input, "wiener_predictor: W1 and W2 must be nonzero");
  const OuterInnerPair oi2 = outer_inner(w2);
  WienerPair out;
  out.g2 = oi2.outer;
  out.q2 = oi2.inner;
  try {
    const OuterInnerPair oi1 = outer_inner(w1);
    out.joint_minimum_phase = inner_gcd(oi1.inner, oi2.inner) == RatTF::constant(1.0);
  } catch (const Error&) {
    out.joint_minimum_phase = false;
  }
  const RatTF projected = causal_project(RatTF::advance(1) * w1 * para_conjugate(oi2.inner));
  out.f_plus = projected / oi2.outer;
  if (!out.f_plus.is_causal() || !is_stable(out.f_plus))
    fail(ErrorCode::numeric, "wiener_predictor: F+ is not stable and causal after cancellation");
  // z^-1 F+ W2 = z^-1 [z W1 Q2*]+ Q2; the outer factor cancels exactly.
  out.k = w1 - RatTF::delay(1) * projected * oi2.inner;
  out.h = w2 / w1;

  for (double th : angle_grid(64)) {
    const Complex z = std::polar(1.0, th);
    const Complex lhs = w1.eval(z);
    Complex hv;
    try {
      hv = out.h.eval(z);
    } catch (const Error&) {
      continue;
    }
    const Complex rhs = out.k.eval(z) / (1.0 - out.f_plus.eval(z) * hv / z);
    out.reconstruction_error = std::max(out.reconstruction_error, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  if (out.reconstruction_error > 1e-8)
    fail(ErrorCode::numeric, "wiener_predictor: W1 = (1 - z^-1 F+ H)^-1 K violated on the grid");
  return out;
}

struct FamilyMember {
  RatTF f;
  RatTF k;
  bool internally_stable = false;
};

/// Member of the family of forward loops F = S / (1 + S H) that realize the
/// same W1 around a stable feedback channel H.
inline FamilyMember f_family(const RatTF& h, const RatTF& w1, const RatTF& s) {
  if (!h.is_causal() || !is_stable(h))
    fail(ErrorCode::unsupported, "f_family: H must be stable (the unstable case needs coprime factorizations)");
  if (!s.is_causal() || !is_stable(s)) fail(ErrorCode::invalid_input, "f_family: S must be stable and proper");
  const RatTF p = RatTF::constant(1.0) + s * h;
  if (p.is_zero()) fail(ErrorCode::singular_loop, "f_family: 1 + S H is identically zero");
  FamilyMember m{s / p, w1 / p, false};
  m.internally_stable = closed_loop(m.f, h).internally_stable;
  return m;
}

// ---------------------------------------------------------------------------
// Two-stage identification with a measured input

struct Orders {
  int q = 0;
  int r = 0;
};

struct ArmaOrders {
  int p = 0;
  int q = 0;
};

struct InputIdentOptions {
  // Per-channel stage-1 orders; empty means BIC selection up to max_orders.
  std::optional<std::array<Orders, 2>> input_orders;
  Orders max_orders{4, 5};
  Orders relation_orders{2, 2};
  ArmaOrders arma_orders{2, 2};
  bool arma_refine = true;
};

struct InputModelFit {
  RatTF f1_hat, f2_hat;
  RatTF k1_hat, k2_hat;
  RatTF h_hat;
  TimeSeries residual1, residual2;
  std::array<ArxFit, 2> stage1;
  RelationFit relation;
  ArmaFit arma;
};

inline InputModelFit identify_with_input(const TimeSeries& y1, const TimeSeries& y2, const TimeSeries& u,
                                         const InputIdentOptions& opt = {}) {
  if (y1.n() != y2.n() || y1.n() != u.n())
    fail(ErrorCode::invalid_input, "identify_with_input: series lengths differ");
  InputModelFit out;
  const TimeSeries* ys[2] = {&y1, &y2};
  for (int i = 0; i < 2; ++i) {
    Orders o;
    if (opt.input_orders) {
      o = (*opt.input_orders)[static_cast<std::size_t>(i)];
    } else {
      const BicTable t = scan_bic_arx(*ys[i], u, opt.max_orders.q, opt.max_orders.r, 1, false);
      o = {t.best.first, t.best.second};
    }
    out.stage1[static_cast<std::size_t>(i)] = fit_arx(*ys[i], u, o.q, o.r, 1, false);
  }
  out.f1_hat = arx_transfer(out.stage1[0], 1);
  out.f2_hat = arx_transfer(out.stage1[1], 1);
  auto residual = [&](const TimeSeries& y, const RatTF& f, const char* label) {
    TimeSeries r = filter(f, u, label);
    for (std::size_t t = 0; t < r.n(); ++t) r.samples[t] = y[t] - r.samples[t];
    return r;
  };
  out.residual1 = residual(y1, out.f1_hat, "y1_tilde");
  out.residual2 = residual(y2, out.f2_hat, "y2_tilde");
  out.relation = fit_relation(out.residual1, out.residual2, opt.relation_orders.q, opt.relation_orders.r);
  out.h_hat = out.relation.h_hat;
  out.arma = fit_arma(out.residual1, opt.arma_orders.p, opt.arma_orders.q, opt.arma_refine);
  out.k1_hat = out.arma.g_hat;
  out.k2_hat = out.h_hat * out.k1_hat;
  return out;
}

}  // namespace lowrank
