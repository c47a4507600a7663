#include <gtest/gtest.h>

#include "actgrid/verify.hpp"
#include "test_support.hpp"

namespace actgrid {
namespace {

ActionGrid fitted_grid() {
  const auto samples = testing::synthetic_actions(5000, 21);
  const auto norm = compute_normalizer(samples);
  return build_action_grid(fit_gaussians(samples, norm), GridSpec{});
}

VerifyConfig quick() {
  VerifyConfig cfg;
  cfg.samples = 50'000;
  cfg.random_triples = 2000;
  return cfg;
}

TEST(Verify, FreshGridPassesEveryCheck) {
  const auto results = verify_grid(fitted_grid(), quick());
  ASSERT_EQ(results.size(), 4u);
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.statistic << " " << r.detail;
}

TEST(Verify, ShiftedBoundaryFailsEqualMass) {
  auto g = fitted_grid();
  auto& p = g.partitions[axis_index(Axis::roll)];
  // Move one interior boundary halfway into its neighbor bin.
  p.boundaries[8] = 0.5 * (p.boundaries[8] + p.boundaries[9]);
  const auto r = check_equal_mass(g, quick());
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.statistic, 4.0);
  EXPECT_NE(r.detail.find("roll"), std::string::npos);
}

TEST(Verify, FixedSeedIsReproducible) {
  const auto g = fitted_grid();
  const auto a = check_equal_mass(g, quick());
  const auto b = check_equal_mass(g, quick());
  EXPECT_EQ(a.statistic, b.statistic);
  auto other = quick();
  other.seed = 1;
  EXPECT_NE(check_equal_mass(g, other).statistic, a.statistic);
}

TEST(Verify, SamplerStaysInRangeForFarTail) {
  TruncatedGaussianSampler draw(0.0, 0.1, 0.6, 0.7);
  std::mt19937_64 rng(0);
  for (int i = 0; i < 1000; ++i) {
    const double x = draw(rng);
    ASSERT_GE(x, 0.6);
    ASSERT_LE(x, 0.7);
  }
}

TEST(Verify, ProbabilityGridShape) {
  const auto ps = probability_grid();
  ASSERT_EQ(ps.size(), 1000u);
  EXPECT_DOUBLE_EQ(ps.front(), 1e-6);
  for (double p : ps) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_LT(max_ppf_roundtrip_error(0.0, 1.0, ps), 1e-10);
}

TEST(Verify, BijectivityOnSmallSpec) {
  const auto r = check_bijectivity(GridSpec{3, 5, 7, 2, 4, 6});
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.statistic, 0.0);
}

}  // namespace
}  // namespace actgrid
