#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "lowrank/ratfun.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

RatTF ex1_w1() { return RatTF::from_delay({1.0}, {1.0, -0.2, -0.25, 0.05}); }
RatTF ex1_w2() { return RatTF::from_delay({1.0}, {1.0, -0.6, 0.03, 0.01}); }

void expect_coeffs(const Poly& p, const std::vector<double>& want, double tol) {
  ASSERT_EQ(p.coeffs().size(), want.size()) << to_string(p);
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(p[k], want[k], tol) << "coefficient " << k;
}

bool contains(const std::vector<Complex>& v, Complex x, double tol) {
  for (const auto& y : v)
    if (std::abs(x - y) <= tol) return true;
  return false;
}

}  // namespace

TEST(Poly, TrimsAndEvaluates) {
  const Poly p{1.0, -3.0, 2.0, 0.0, 0.0};
  EXPECT_EQ(p.degree(), 2);
  EXPECT_EQ(p.eval(Complex(2.0)), Complex(3.0));
  EXPECT_TRUE((Poly{0.0, 0.0}.is_zero()));
  EXPECT_EQ(Poly().degree(), -1);
}

TEST(Poly, RejectsNonFinite) {
  EXPECT_THROW(Poly({1.0, std::nan("")}), Error);
}

TEST(Poly, ReversedAndShifted) {
  const Poly p{1.0, 2.0, 3.0};
  expect_coeffs(p.reversed(), {3.0, 2.0, 1.0}, 0.0);
  expect_coeffs(p.shifted(2), {0.0, 0.0, 1.0, 2.0, 3.0}, 0.0);
}

TEST(Poly, DivmodReconstructs) {
  const Poly a{5.0, -1.0, 0.0, 2.0, 1.0};
  const Poly b{1.0, 0.5, 1.0};
  const auto [quot, rem] = divmod(a, b);
  EXPECT_LT(rem.degree(), b.degree());
  const Poly back = quot * b + rem;
  expect_coeffs(back, a.coeffs(), 1e-14);
}

TEST(Poly, RootsAreAccurate) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto want = oracle::random_roots(rng, 6, 0.1, 3.0);
    const Poly p = Poly::from_roots(want);
    const auto got = roots(p);
    ASSERT_EQ(got.size(), want.size());
    for (const auto& r : got) EXPECT_LE(std::abs(oracle::horner(p.coeffs(), r)), 1e-10 * p.norm_inf());
    for (const auto& r : want) EXPECT_TRUE(contains(got, r, 1e-7)) << r;
  }
}

TEST(Poly, ExactZeroRoots) {
  const auto r = roots(Poly{0.0, 0.0, 0.0, 1.0});
  ASSERT_EQ(r.size(), 3u);
  for (const auto& x : r) EXPECT_EQ(x, Complex(0.0));
}

TEST(RatTF, ReduceCancelsCommonFactor) {
  const Poly num = Poly{0.5, 1.0} * Poly{-0.2, 1.0};
  const Poly den = Poly{-0.2, 1.0} * Poly{0.1, 1.0};
  const RatTF w = RatTF::reduce(num, den);
  expect_coeffs(w.num(), {0.5, 1.0}, 1e-14);
  expect_coeffs(w.den(), {0.1, 1.0}, 1e-14);
}

TEST(RatTF, ReduceKeepsCoprimePair) {
  const Poly den = Poly{-0.5, 1.0} * Poly{0.5, 1.0} * Poly{-0.2, 1.0};
  const RatTF w = RatTF::reduce(Poly::monomial(3), den);
  EXPECT_EQ(w.num(), Poly::monomial(3));
  expect_coeffs(w.den(), {0.05, -0.25, -0.2, 1.0}, 1e-15);
  EXPECT_EQ(w, ex1_w1());
}

TEST(RatTF, ReduceZeroAndErrors) {
  const RatTF z = RatTF::reduce(Poly(), Poly{1.0});
  EXPECT_TRUE(z.is_zero());
  EXPECT_EQ(z.den(), Poly{1.0});
  try {
    RatTF::reduce(Poly{1.0}, Poly());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
}

TEST(RatTF, ReduceIsIdempotent) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const RatTF w = oracle::random_stable(rng, 3, 0.1, 2.0);
    EXPECT_EQ(RatTF::reduce(w.num(), w.den()), w);
  }
}

TEST(RatTF, ExampleOneRelation) {
  const RatTF h = ex1_w2() / ex1_w1();
  expect_coeffs(h.num(), {0.5, 1.0}, 1e-12);
  expect_coeffs(h.den(), {0.1, 1.0}, 1e-12);
  const RatTF w2 = h * ex1_w1();
  expect_coeffs(w2.num(), ex1_w2().num().coeffs(), 1e-12);
  expect_coeffs(w2.den(), ex1_w2().den().coeffs(), 1e-12);
}

TEST(RatTF, MultiplicativeIdentity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const RatTF w = oracle::random_stable(rng, 2, 0.1, 2.0);
    EXPECT_EQ(w * RatTF::constant(1.0), w);
  }
}

TEST(RatTF, DivisionByZeroFails) {
  try {
    (void)(RatTF::constant(1.0) / RatTF());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
}

TEST(RatTF, FieldAxiomsOnGrid) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rnd = [&] {
    std::vector<double> n(3), d(3);
    for (auto& c : n) c = u(rng);
    for (auto& c : d) c = u(rng);
    d[2] = 1.0 + std::abs(d[2]);
    return RatTF::reduce(Poly(n), Poly(d));
  };
  for (int trial = 0; trial < 50; ++trial) {
    const RatTF a = rnd(), b = rnd(), c = rnd();
    const RatTF lhs = (a + b) * c;
    const RatTF rhs = a * c + b * c;
    for (double th : angle_grid(64)) {
      const Complex z = std::polar(1.0, th);
      Complex l, r;
      try {
        l = oracle::eval(lhs, z);
        r = oracle::eval(a, z) * oracle::eval(c, z) + oracle::eval(b, z) * oracle::eval(c, z);
      } catch (...) {
        continue;
      }
      if (!std::isfinite(std::abs(r)) || std::abs(r) > 1e6) continue;
      EXPECT_LE(std::abs(l - r), 1e-9 * std::max(1.0, std::abs(r)));
      // a c + b c cancels a repeated factor of c, whose roots are only
      // accurate to about the square root of the machine precision.
      EXPECT_LE(std::abs(oracle::eval(rhs, z) - r), 1e-6 * std::max(1.0, std::abs(r)));
    }
  }
}

TEST(RatTF, DelayFormRoundTrip) {
  const RatTF h = RatTF::from_delay({1.0, 0.5}, {1.0, 0.1});
  expect_coeffs(h.num(), {0.5, 1.0}, 0.0);
  const DelayForm d = h.to_delay();
  EXPECT_EQ(d.num, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(d.den, (std::vector<double>{1.0, 0.1}));
  const DelayForm e = RatTF::delay(2).to_delay();
  EXPECT_EQ(e.num, (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_EQ(e.den, (std::vector<double>{1.0}));
}

TEST(RatTF, CausalityFlags) {
  EXPECT_TRUE(RatTF::delay(1).is_strictly_causal());
  EXPECT_FALSE(RatTF::advance(1).is_causal());
  EXPECT_EQ(RatTF::from_delay({2.0, 1.0}, {1.0, -0.2}).at_infinity(), 2.0);
  EXPECT_THROW((void)RatTF::advance(1).at_infinity(), Error);
  EXPECT_THROW((void)RatTF::advance(1).to_delay(), Error);
}

TEST(RatTF, EvalAtPoleFails) {
  const RatTF w = RatTF::reduce(Poly{1.0}, Poly{-1.0, 1.0});
  try {
    (void)w.eval(Complex(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_evaluation);
  }
}

TEST(ParaConjugate, ConstantAndInvolution) {
  EXPECT_EQ(para_conjugate(RatTF::constant(3.0)), RatTF::constant(3.0));
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const RatTF w = oracle::random_stable(rng, 3, 0.2, 2.5) * RatTF::delay(trial % 3);
    const RatTF back = para_conjugate(para_conjugate(w));
    expect_coeffs(back.num(), w.num().coeffs(), 1e-12);
    expect_coeffs(back.den(), w.den().coeffs(), 1e-12);
  }
}

TEST(ParaConjugate, InnerFactorIsUnitary) {
  const RatTF q1 = RatTF::reduce(Poly{2.0, 1.0}, Poly{1.0, 2.0});
  const RatTF prod = q1 * para_conjugate(q1);
  EXPECT_EQ(prod, RatTF::constant(1.0));
  for (double th : angle_grid(64)) EXPECT_NEAR(std::abs(q1.eval(std::polar(1.0, th))), 1.0, 1e-12);
}

TEST(EvalCircle, Values) {
  for (const auto& v : eval_circle(RatTF::constant(1.0), angle_grid(8))) EXPECT_EQ(v, Complex(1.0));
  const RatTF h = RatTF::reduce(Poly{0.5, 1.0}, Poly{0.1, 1.0});
  EXPECT_NEAR(std::abs(eval_circle(h, {0.0})[0] - 1.5 / 1.1), 0.0, 1e-15);
}

TEST(EvalCircle, PoleOnGridNamesAngle) {
  const RatTF w = RatTF::reduce(Poly{1.0}, Poly{1.0, 1.0});
  try {
    (void)eval_circle(w, angle_grid(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_evaluation);
    EXPECT_NE(std::string(e.what()).find("theta"), std::string::npos) << e.what();
  }
}

TEST(PolesZeros, Examples) {
  const auto pz2 = poles_zeros(RatTF::reduce(Poly{2.0, 1.0}, Poly{-0.2, 1.0}));
  ASSERT_EQ(pz2.zeros.size(), 1u);
  EXPECT_NEAR(std::abs(pz2.zeros[0] - Complex(-2.0)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(pz2.poles[0] - Complex(0.2)), 0.0, 1e-14);

  const auto pz1 = poles_zeros(ex1_w1());
  ASSERT_EQ(pz1.poles.size(), 3u);
  for (double p : {0.5, -0.5, 0.2}) EXPECT_TRUE(contains(pz1.poles, Complex(p), 1e-12)) << p;
  ASSERT_EQ(pz1.zeros.size(), 3u);
  for (const auto& z : pz1.zeros) EXPECT_EQ(z, Complex(0.0));

  const auto pz0 = poles_zeros(RatTF::constant(3.0));
  EXPECT_TRUE(pz0.poles.empty());
  EXPECT_TRUE(pz0.zeros.empty());
}

TEST(Classify, Examples) {
  const Classification h = classify(RatTF::from_delay({1.0, -2.0}, {1.0, 2.0}));
  EXPECT_TRUE(h.causal);
  EXPECT_FALSE(h.stable);

  const Classification w = classify(ex1_w1());
  EXPECT_TRUE(w.causal);
  EXPECT_TRUE(w.stable);
  EXPECT_TRUE(w.minimum_phase);

  const Classification d = classify(RatTF::delay(1));
  EXPECT_TRUE(d.strictly_causal);
  EXPECT_TRUE(d.stable);
  EXPECT_TRUE(d.minimum_phase);
}

TEST(Classify, MinimumPhaseInverseIsStable) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const RatTF w = oracle::random_stable(rng, 3, 0.1, 0.9);
    ASSERT_TRUE(classify(w).minimum_phase);
    const RatTF inv = RatTF::constant(1.0) / w;
    EXPECT_TRUE(classify(inv).stable);
    EXPECT_TRUE(classify(inv).minimum_phase);
  }
}

TEST(Classify, CircleZeroIsReported) {
  const Classification c = classify(RatTF::reduce(Poly{1.0, 1.0}, Poly{0.0, 1.0}));
  EXPECT_TRUE(c.circle_zero);
  EXPECT_FALSE(c.minimum_phase);
}

TEST(ClosedLoop, OpenLoop) {
  const RatTF h = RatTF::from_delay({1.0, 0.5}, {1.0, 0.1});
  const ClosedLoop cl = closed_loop(RatTF(), h);
  EXPECT_EQ(cl.p, RatTF::constant(1.0));
  EXPECT_EQ(cl.t[0][0], RatTF::constant(1.0));
  EXPECT_TRUE(cl.t[0][1].is_zero());
  EXPECT_EQ(cl.t[1][0], h);
  EXPECT_EQ(cl.t[1][1], RatTF::constant(1.0));
  EXPECT_TRUE(cl.internally_stable);
}

TEST(ClosedLoop, ExampleOneThirdPair) {
  // F3 = z (1 - W1^{-1}) / H realizes W1 with K = 1.
  const RatTF w1 = ex1_w1();
  const RatTF h = ex1_w2() / w1;
  const RatTF f3 = RatTF::advance(1) * (RatTF::constant(1.0) - RatTF::constant(1.0) / w1) / h;
  ASSERT_TRUE(f3.is_causal());
  const ClosedLoop cl = closed_loop(RatTF::delay(1) * f3, h);
  EXPECT_TRUE(cl.internally_stable);
  for (double th : angle_grid(64)) {
    const Complex z = std::polar(1.0, th);
    EXPECT_NEAR(std::abs(cl.p.eval(z) - w1.eval(z)), 0.0, 1e-10);
  }
}

TEST(ClosedLoop, SensitivityIdentity) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const RatTF f = RatTF::delay(1) * oracle::random_stable(rng, 2, 0.1, 2.0);
    const RatTF h = oracle::random_stable(rng, 2, 0.1, 2.0);
    const ClosedLoop cl = closed_loop(f, h);
    for (double th : angle_grid(64)) {
      const Complex z = std::polar(1.0, th);
      const Complex v = cl.p.eval(z) * (1.0 - f.eval(z) * h.eval(z));
      EXPECT_NEAR(std::abs(v - 1.0), 0.0, 1e-10);
    }
  }
}

TEST(ClosedLoop, IllPosed) {
  try {
    (void)closed_loop(RatTF::constant(1.0), RatTF::constant(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular_loop);
  }
}

TEST(Spectrum, ExampleValues) {
  const auto s1 = spectrum(ex1_w1(), ex1_w2(), angle_grid(32));
  expect_coeffs(s1.h.num(), {0.5, 1.0}, 1e-12);
  expect_coeffs(s1.h.den(), {0.1, 1.0}, 1e-12);

  const RatTF w1 = RatTF::reduce(Poly{2.0, 1.0}, Poly{-0.2, 1.0});
  const RatTF w2 = RatTF::reduce(Poly{-2.0, 1.0}, Poly{-0.2, 1.0});
  const auto s2 = spectrum(w1, w2, {0.0});
  EXPECT_NEAR(s2.grid.phi11[0].real(), 14.0625, 1e-12);
  for (const auto& d : s2.grid.det_phi) EXPECT_NEAR(std::abs(d), 0.0, 1e-10);
}

TEST(Spectrum, HermitianAndNonnegative) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = spectrum(oracle::random_stable(rng, 2, 0.1, 2.0), oracle::random_stable(rng, 2, 0.1, 2.0),
                            angle_grid(64));
    for (std::size_t k = 0; k < s.grid.angles.size(); ++k) {
      EXPECT_EQ(s.grid.phi12[k], std::conj(s.grid.phi21[k]));
      EXPECT_GE(s.grid.phi11[k].real(), -1e-12);
      EXPECT_GE(s.grid.phi22[k].real(), -1e-12);
    }
  }
}
