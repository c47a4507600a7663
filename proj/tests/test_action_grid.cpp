#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "actgrid/action_grid.hpp"
#include "test_support.hpp"

namespace actgrid {
namespace {

GaussianParams typical_params() {
  GaussianParams g;
  g[Axis::phi] = {0.2, 1.6};
  g[Axis::theta] = {1.5, 0.6};
  g[Axis::r] = {0.5, 0.3};
  g[Axis::roll] = {0.0, 0.3};
  g[Axis::pitch] = {0.05, 0.25};
  g[Axis::yaw] = {-0.1, 0.4};
  g.sample_count = 1;
  return g;
}

TEST(GridSpec, VocabularyArithmetic) {
  EXPECT_EQ(GridSpec{}.vocab_size(), 8194u);
  EXPECT_EQ((GridSpec{8, 8, 8, 8, 8, 8}).vocab_size(), 1026u);
  EXPECT_EQ((GridSpec{3, 5, 7, 2, 4, 6}).vocab_size(), 3u * 5 * 7 + 2 * 4 * 6 + 2);
}

TEST(GridSpec, Parse) {
  EXPECT_EQ(parse_grid_spec("32,16,8,16,16,16"), GridSpec{});
  EXPECT_THROW(parse_grid_spec("1,2,3"), std::invalid_argument);
  EXPECT_THROW(parse_grid_spec("1,2,3,4,5,0"), std::invalid_argument);
  EXPECT_THROW(parse_grid_spec("1,2,3,4,5,x"), std::invalid_argument);
  EXPECT_THROW(parse_grid_spec("1,2,3,4,5,6,7"), std::invalid_argument);
}

TEST(Linearize, Examples) {
  const GridSpec spec;
  EXPECT_EQ(linearize_trans(spec, 0, 0, 0), 0u);
  EXPECT_EQ(linearize_trans(spec, 15, 31, 7), 4095u);
  EXPECT_EQ(linearize_trans(spec, 1, 2, 3), 275u);
  EXPECT_EQ(delinearize_trans(spec, 0), (IndexTriple{0, 0, 0}));
  EXPECT_EQ(delinearize_trans(spec, 4095), (IndexTriple{15, 31, 7}));
  EXPECT_EQ(delinearize_trans(spec, 275), (IndexTriple{1, 2, 3}));
  EXPECT_THROW(linearize_trans(spec, 16, 0, 0), std::out_of_range);
  EXPECT_THROW(delinearize_trans(spec, 4096), std::out_of_range);
  EXPECT_THROW(delinearize_rot(spec, 4096), std::out_of_range);
}

TEST(Linearize, EnumerationOracleIsBijective) {
  // Oracle: enumerate in (theta, phi, r) nested order; the k-th triple gets id k.
  const GridSpec spec;
  std::size_t k = 0;
  std::set<std::size_t> seen;
  for (std::size_t t = 0; t < spec.m_theta; ++t) {
    for (std::size_t p = 0; p < spec.m_phi; ++p) {
      for (std::size_t r = 0; r < spec.m_r; ++r, ++k) {
        ASSERT_EQ(linearize_trans(spec, t, p, r), k);
        ASSERT_EQ(delinearize_trans(spec, k), (IndexTriple{t, p, r}));
        seen.insert(k);
        if (t == 1 && p == 2 && r == 3) {
          EXPECT_EQ(k, 275u);
        }
      }
    }
  }
  EXPECT_EQ(seen.size(), 4096u);
  for (std::size_t id = 0; id < spec.rotation_tokens(); ++id) {
    const auto idx = delinearize_rot(spec, id);
    ASSERT_EQ(linearize_rot(spec, idx[0], idx[1], idx[2]), id);
  }
}

TEST(ActionGrid, BuildRecordsLayout) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  EXPECT_EQ(g.vocab_size(), 8194u);
  EXPECT_EQ(g.rotation_offset(), 4096u);
  EXPECT_EQ(g.gripper_offset(), 8192u);
  for (std::size_t a = 0; a < kAxisCount; ++a) {
    EXPECT_EQ(g.partitions[a].bins(), g.spec.count(static_cast<Axis>(a)));
    EXPECT_EQ(g.partitions[a].range_lo, axis_range(static_cast<Axis>(a)).first);
  }
  const auto small = build_action_grid(typical_params(), GridSpec{8, 8, 8, 8, 8, 8});
  EXPECT_EQ(small.vocab_size(), 1026u);
}

TEST(Codec, GripperThresholdIsStrict) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  NormalizedAction a{0.1, 0.1, 0.1, 0, 0, 0, 0.7};
  EXPECT_EQ(encode_action(a, g).grip - g.gripper_offset(), 1u);
  a[6] = 0.5;
  EXPECT_EQ(encode_action(a, g).grip - g.gripper_offset(), 0u);
}

TEST(Codec, ZeroTranslationComposesDigitizeAndLinearize) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  const NormalizedAction a{0, 0, 0, 0, 0, 0, 0};
  const auto t = encode_action(a, g);
  const auto expected = linearize_trans(g.spec, digitize(0.0, g.partition(Axis::theta)),
                                        digitize(0.0, g.partition(Axis::phi)), 0);
  EXPECT_EQ(t.trans, expected);
  EXPECT_EQ(encode_action(a, g), t);
}

TEST(Codec, DecodeUsesTruncatedMeanOnTwoBinRoll) {
  GaussianParams p = typical_params();
  p[Axis::roll] = {0.0, 1.0};
  const auto g = build_action_grid(p, GridSpec{4, 4, 4, 2, 2, 2});
  EXPECT_NEAR(g.partition(Axis::roll).boundaries[1], 0.0, 1e-15);
  const TokenTriple t{0, static_cast<std::uint32_t>(g.rotation_offset() + linearize_rot(g.spec, 1, 0, 0)),
                      static_cast<std::uint32_t>(g.gripper_offset())};
  EXPECT_NEAR(decode_tokens(t, g)[3], 0.45986222928642656, 1e-9);
}

TEST(Codec, GripperDecodesToExactSymbols) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  TokenTriple t{0, static_cast<std::uint32_t>(g.rotation_offset()), static_cast<std::uint32_t>(g.gripper_offset())};
  EXPECT_EQ(decode_tokens(t, g)[6], 0.0);
  t.grip += 1;
  EXPECT_EQ(decode_tokens(t, g)[6], 1.0);
}

TEST(Codec, LayoutViolationsThrow) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  const auto r0 = static_cast<std::uint32_t>(g.rotation_offset());
  const auto g0 = static_cast<std::uint32_t>(g.gripper_offset());
  EXPECT_THROW(decode_tokens({r0, r0, g0}, g), std::out_of_range);
  EXPECT_THROW(decode_tokens({0, 0, g0}, g), std::out_of_range);
  EXPECT_THROW(decode_tokens({0, r0, r0}, g), std::out_of_range);
  EXPECT_THROW(decode_tokens({0, r0, g0 + 2}, g), std::out_of_range);
}

TEST(Codec, RandomActionsStayInTheirBins) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> grip(0.0, 1.0);
  for (int i = 0; i < 10'000; ++i) {
    const NormalizedAction a{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), grip(rng)};
    const auto t = encode_action(a, g);
    const auto d = decode_tokens(t, g);
    ASSERT_EQ(axis_bins(d, g), axis_bins(a, g));
    ASSERT_EQ(encode_action(d, g), t);
    ASSERT_EQ(decode_tokens(encode_action(d, g), g), d);
  }
}

TEST(QuantizationReport, RepresentativesAreFixedPoints) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  NormalizationSpec norm;
  norm.lo.fill(-1.0);
  norm.hi.fill(1.0);
  std::vector<ActionSample> samples;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const TokenTriple t{static_cast<std::uint32_t>(rng() % 4096), static_cast<std::uint32_t>(4096 + rng() % 4096),
                        static_cast<std::uint32_t>(8192 + rng() % 2)};
    samples.push_back(denormalize(decode_tokens(t, g), norm));
  }
  const auto rep = quantization_report(samples, norm, g);
  for (std::size_t k = 0; k < kScaledVars; ++k) EXPECT_LT(rep.mse[k], 1e-28);
  EXPECT_EQ(rep.gripper_mismatches, 0u);
  std::uint64_t total = 0;
  for (auto c : rep.occupancy) total += c;
  EXPECT_EQ(total, 3u * 200);
}

TEST(QuantizationReport, SingleSampleMaxEqualsMse) {
  const auto g = build_action_grid(typical_params(), GridSpec{});
  NormalizationSpec norm;
  norm.lo.fill(-1.0);
  norm.hi.fill(1.0);
  ActionSample s;
  s.x = 0.31;
  s.y = -0.2;
  s.z = 0.05;
  s.roll = 0.123;
  s.yaw = -0.7;
  const std::vector<ActionSample> one = {s};
  const auto rep = quantization_report(one, norm, g);
  for (std::size_t k = 0; k < kScaledVars; ++k) EXPECT_EQ(rep.max_squared_error[k], rep.mse[k]);
  EXPECT_THROW(quantization_report({}, norm, g), std::invalid_argument);
}

TEST(QuantizationReport, FinerGridLowersError) {
  const auto samples = testing::synthetic_actions(20'000, 0);
  const auto norm = compute_normalizer(samples);
  const auto params = fit_gaussians(samples, norm);
  const auto fine = quantization_report(samples, norm, build_action_grid(params, GridSpec{}));
  const auto coarse = quantization_report(samples, norm, build_action_grid(params, GridSpec{8, 8, 8, 8, 8, 8}));
  for (std::size_t k = 0; k < kScaledVars; ++k) EXPECT_LT(fine.mse[k], coarse.mse[k]) << QuantizationReport::kAxes[k];
}

}  // namespace
}  // namespace actgrid
