#include <gtest/gtest.h>

#include "properties.hpp"

namespace {

void expect_holds(const props::Check& c) {
  EXPECT_GE(c.cases, props::kCases) << c.name;
  EXPECT_EQ(c.violations, 0) << c.name;
  EXPECT_LE(c.worst, c.tol) << c.name;
}

}  // namespace

TEST(Properties, OuterInner) { expect_holds(props::outer_inner_suite()); }
TEST(Properties, CausalProject) { expect_holds(props::causal_project_suite()); }
TEST(Properties, FFamily) { expect_holds(props::f_family_suite()); }
TEST(Properties, WienerOrthogonality) { expect_holds(props::wiener_orthogonality_suite()); }
TEST(Properties, WienerConstantForMinimumPhase) { expect_holds(props::wiener_constant_suite()); }
TEST(Properties, SpectrumDeterminant) { expect_holds(props::spectrum_det_suite()); }
TEST(Properties, SpectrumRelation) { expect_holds(props::spectrum_relation_suite()); }
TEST(Properties, DeterministicRelation) { expect_holds(props::deterministic_relation_suite()); }
