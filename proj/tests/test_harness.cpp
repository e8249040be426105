#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "lowrank/harness.hpp"

using namespace lowrank;

TEST(BoxplotStats, SmallSample) {
  const BoxStats s = boxplot_stats({1.0, 2.0, 3.0, 4.0, 5.0});
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.q25, 2.0);
  EXPECT_EQ(s.q75, 4.0);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 5.0);
  EXPECT_DOUBLE_EQ(s.variance, 2.5);
  EXPECT_EQ(s.outlier_count, 0);
}

TEST(BoxplotStats, InterpolatedQuantiles) {
  const BoxStats s = boxplot_stats({4.0, 1.0, 3.0, 2.0});
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.q25, 1.75);
  EXPECT_DOUBLE_EQ(s.q75, 3.25);
}

TEST(BoxplotStats, ConstantAndSingle) {
  const BoxStats c = boxplot_stats(std::vector<double>(7, 0.25));
  EXPECT_EQ(c.variance, 0.0);
  EXPECT_EQ(c.outlier_count, 0);
  const BoxStats one = boxplot_stats({3.0});
  EXPECT_EQ(one.median, 3.0);
  EXPECT_EQ(one.variance, 0.0);
}

TEST(BoxplotStats, Outlier) {
  const BoxStats s = boxplot_stats({0.0, 0.0, 0.0, 0.0, 100.0});
  EXPECT_EQ(s.outlier_count, 1);
  EXPECT_EQ(s.median, 0.0);
}

TEST(BoxplotStats, EmptyIsAnError) {
  try {
    (void)boxplot_stats({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
  }
}

TEST(BoxplotStats, PermutationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  std::vector<double> x(101);
  for (double& v : x) v = d(rng);
  const BoxStats a = boxplot_stats(x);
  std::shuffle(x.begin(), x.end(), rng);
  const BoxStats b = boxplot_stats(x);
  EXPECT_EQ(a.median, b.median);
  EXPECT_EQ(a.variance, b.variance);
  EXPECT_EQ(a.q25, b.q25);
  EXPECT_EQ(a.outlier_count, b.outlier_count);
}

TEST(BodeCompare, IdenticalAndSignFlip) {
  const RatTF w = RatTF::from_delay({1.0, 2.0}, {1.0, -0.2});
  const auto grid = angle_grid(128);
  EXPECT_EQ(bode_compare(w, w, grid).max_rel_err, 0.0);
  EXPECT_LE(bode_compare(w, -1.0 * w, grid).max_rel_err, 1e-15);
  EXPECT_NEAR(bode_compare(w, 2.0 * w, grid).mean_rel_err, 1.0, 1e-12);
}

TEST(BodeCompare, PrintedExampleTwoEstimate) {
  // Estimate of W1 printed for the second example, in positive powers of z.
  const RatTF w1 = RatTF::from_delay({1.0, 2.0}, {1.0, -0.2});
  const RatTF printed = RatTF::reduce(Poly{1.177, 2.666, 1.039}, Poly{-0.0721, 0.3558, 1.0});
  const double err = bode_compare(w1, printed, angle_grid(128)).max_rel_err;
  EXPECT_LT(err, 0.25);
  EXPECT_GT(err, 0.01);
}

namespace {

McDesign toy_design() {
  McDesign d;
  d.scenario_id = "toy";
  d.param_names = {"mean"};
  d.true_values = {0.0};
  d.angles = angle_grid(8);
  d.curves = {{"flat", std::vector<double>(8, 1.0)}};
  return d;
}

RunRecord toy_run(std::uint64_t seed) {
  const TimeSeries e = gen_noise(200, {1.0, seed});
  double m = 0.0;
  for (double v : e.samples) m += v;
  m /= 200.0;
  if (seed % 7 == 0) fail(ErrorCode::numeric, "synthetic failure");
  return {{m}, std::abs(m), {std::vector<double>(8, 1.0 + m)}};
}

}  // namespace

TEST(MonteCarlo, SingleRun) {
  const McResult r = run_monte_carlo(toy_design(), 1, 11, toy_run);
  ASSERT_EQ(r.outcomes.size(), 1u);
  EXPECT_EQ(r.outcomes[0].seed, mix_seed(11, 0));
  EXPECT_EQ(r.summary.params[0].stats.variance, 0.0);
}

TEST(MonteCarlo, ThreadCountDoesNotChangeOutput) {
  const McDesign d = toy_design();
  const McResult a = run_monte_carlo(d, 40, 3, toy_run, 1);
  const McResult b = run_monte_carlo(d, 40, 3, toy_run, 4);
  EXPECT_EQ(runs_csv(d, a), runs_csv(d, b));
  EXPECT_EQ(to_json(a.summary).dump(), to_json(b.summary).dump());
}

TEST(MonteCarlo, FailuresAreRecorded) {
  const McDesign d = toy_design();
  const McResult r = run_monte_carlo(d, 60, 3, toy_run);
  int failed = 0;
  for (const auto& o : r.outcomes) {
    if (!o.ok) {
      EXPECT_EQ(o.status, "failed:numeric");
      ++failed;
    }
  }
  EXPECT_EQ(r.summary.failures, failed);
  EXPECT_EQ(r.summary.valid, failed * 20 <= 60);
  EXPECT_THROW((void)run_monte_carlo(d, 0, 3, toy_run), Error);
}
