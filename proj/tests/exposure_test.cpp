#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "viable/exposure.hpp"

using namespace viable;

namespace {

const ClassSpace kAB = ClassSpace::categorical({"A", "B"});
const ClassSpace kABC = ClassSpace::categorical({"A", "B", "C"});

AlignmentDistribution cat(std::vector<double> p) { return AlignmentDistribution::categorical(std::move(p)); }

ExposureResult exposure_of(const ClassSpace& space, std::vector<double> shares) {
  return {space, cat(std::move(shares))};
}

AlignmentVector random_list(std::mt19937_64& rng, const ClassSpace& space, std::size_t n) {
  std::exponential_distribution<double> draw(1.0);
  std::vector<AlignmentDistribution> entries;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p(space.size());
    double total = 0.0;
    for (double& x : p) total += (x = draw(rng));
    for (double& x : p) x /= total;
    entries.push_back(cat(std::move(p)));
  }
  return AlignmentVector(space, std::move(entries));
}

}  // namespace

TEST(Exposure, DotProduct) {
  const AlignmentVector list(kAB, {make_one_hot("A", kAB), make_one_hot("B", kAB)});
  const auto e = exposure(list, WeightVector({2.0 / 3.0, 1.0 / 3.0}));
  EXPECT_NEAR(e.value[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(e.value[1], 1.0 / 3.0, 1e-15);
}

TEST(Exposure, ScalarWeightedMean) {
  const AlignmentVector list(ClassSpace::scalar(),
                             {AlignmentDistribution::scalar(0.98), AlignmentDistribution::scalar(-0.94)});
  const auto e = exposure(list, WeightVector({0.8, 0.2}));
  EXPECT_NEAR(e.value.score(), 0.596, 1e-15);
}

TEST(Exposure, ScalarMissingScorePolicies) {
  const AlignmentVector list(ClassSpace::scalar(),
                             {AlignmentDistribution::scalar(0.5), AlignmentDistribution::missing_score()});
  const WeightVector w({0.75, 0.25});
  EXPECT_NEAR(exposure(list, w, MissingScorePolicy::Zero).value.score(), 0.375, 1e-15);
  EXPECT_NEAR(exposure(list, w, MissingScorePolicy::Renormalize).value.score(), 0.5, 1e-15);
}

TEST(Exposure, LengthMismatch) {
  const AlignmentVector list(kAB, {make_one_hot("A", kAB)});
  EXPECT_THROW(exposure(list, WeightVector({0.5, 0.5})), ShapeError);
}

TEST(Exposure, UniformWeightsEqualPopulationEstimator) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto list = random_list(rng, kABC, 2 + trial % 49);
    const auto e = exposure(list, weights(AttentionModel::uniform(list.size())));
    const auto p = population_estimator(list);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(e.value[c], p[c], 1e-12);
  }
}

TEST(Exposure, NormalizationProperty) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(1e-4, 0.999);
  for (int trial = 0; trial < 200; ++trial) {
    const auto list = random_list(rng, kABC, 1 + trial % 80);
    const auto e = exposure(list, weights(AttentionModel::geometric(unit(rng), list.size())));
    EXPECT_NO_THROW(validate_distribution(kABC, e.value));
  }
}

TEST(Exposure, LinearInWeightsProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 40;
    const auto list = random_list(rng, kABC, n);
    const WeightVector w1 = weights(AttentionModel::geometric(0.01 + 0.98 * unit(rng), n));
    const WeightVector w2 = weights(AttentionModel::log_series(0.01 + 0.98 * unit(rng), n));
    const double a = unit(rng);
    std::vector<double> mixed(n);
    for (std::size_t i = 0; i < n; ++i) mixed[i] = a * w1[i] + (1.0 - a) * w2[i];
    const auto e = exposure(list, WeightVector(mixed));
    const auto e1 = exposure(list, w1);
    const auto e2 = exposure(list, w2);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(e.value[c], a * e1.value[c] + (1.0 - a) * e2.value[c], 1e-12);
  }
}

TEST(Exposure, UniformWeightsArePermutationInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto list = random_list(rng, kABC, 2 + trial % 20);
    std::vector<AlignmentDistribution> shuffled(list.begin(), list.end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const WeightVector w = weights(AttentionModel::uniform(list.size()));
    const auto a = exposure(list, w);
    const auto b = exposure(AlignmentVector(kABC, shuffled), w);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a.value[c], b.value[c], 1e-15);
  }
}

TEST(BinomialZ, Identity) {
  const DistanceSpec spec{DistanceMetric::BinomialZ, 100, SampleBasis::ListLength};
  EXPECT_EQ(binomial_z(exposure_of(kAB, {0.3, 0.7}), cat({0.3, 0.7}), spec, "A"), 0.0);
}

TEST(BinomialZ, ClosedForm) {
  const DistanceSpec spec{DistanceMetric::BinomialZ, 100, SampleBasis::ListLength};
  EXPECT_DOUBLE_EQ(binomial_z(exposure_of(kAB, {0.6, 0.4}), cat({0.5, 0.5}), spec, "A"), 2.0);
}

TEST(BinomialZ, DatingProportions) {
  const DistanceSpec spec{DistanceMetric::BinomialZ, 672, SampleBasis::RealizationCount};
  EXPECT_NEAR(binomial_z(exposure_of(kAB, {0.16, 0.84}), cat({0.13, 0.87}), spec, "A"), 2.312461914518982, 1e-9);
  EXPECT_NEAR(binomial_z(exposure_of(kAB, {0.16, 0.84}), cat({0.13, 0.87}), spec, "A"),
              oracle::z_statistic(0.16, 0.13, 672), 1e-12);
}

TEST(BinomialZ, DegenerateEstimate) {
  const DistanceSpec spec{DistanceMetric::BinomialZ, 10, SampleBasis::ListLength};
  EXPECT_EQ(binomial_z(exposure_of(kAB, {1.0, 0.0}), cat({1.0, 0.0}), spec, "A"), 0.0);
  EXPECT_EQ(binomial_z(exposure_of(kAB, {0.0, 1.0}), cat({0.0, 1.0}), spec, "A"), 0.0);
  EXPECT_TRUE(std::isinf(binomial_z(exposure_of(kAB, {0.1, 0.9}), cat({0.0, 1.0}), spec, "A")));
}

TEST(BinomialZ, NeedsTwoClasses) {
  const DistanceSpec spec{DistanceMetric::BinomialZ, 10, SampleBasis::ListLength};
  EXPECT_THROW(binomial_z(exposure_of(kABC, {0.2, 0.3, 0.5}), cat({0.2, 0.3, 0.5}), spec, "A"), ModeError);
  EXPECT_THROW(spec.validate(kABC), ConfigError);
}

TEST(ChiSquare, Identity) {
  const DistanceSpec spec{DistanceMetric::ChiSquare, 50, SampleBasis::ListLength};
  EXPECT_EQ(chi_square(exposure_of(kABC, {0.2, 0.3, 0.5}), cat({0.2, 0.3, 0.5}), spec), 0.0);
}

TEST(ChiSquare, TwoClassClosedForm) {
  const DistanceSpec spec{DistanceMetric::ChiSquare, 100, SampleBasis::ListLength};
  EXPECT_NEAR(chi_square(exposure_of(kAB, {0.6, 0.4}), cat({0.5, 0.5}), spec), 4.0, 1e-12);
}

TEST(ChiSquare, ThreeClass) {
  const DistanceSpec spec{DistanceMetric::ChiSquare, 200, SampleBasis::ListLength};
  EXPECT_NEAR(chi_square(exposure_of(kABC, {0.55, 0.25, 0.2}), cat({0.5, 0.3, 0.2}), spec), 2.6666666666666667,
              1e-9);
}

TEST(ChiSquare, ZeroExpectedClass) {
  const DistanceSpec spec{DistanceMetric::ChiSquare, 10, SampleBasis::ListLength};
  EXPECT_TRUE(std::isinf(chi_square(exposure_of(kABC, {0.5, 0.4, 0.1}), cat({0.5, 0.5, 0.0}), spec)));
  EXPECT_NEAR(chi_square(exposure_of(kABC, {0.6, 0.4, 0.0}), cat({0.5, 0.5, 0.0}), spec), 10 * (0.02 + 0.02), 1e-12);
}

TEST(ChiSquare, EqualsZSquaredForTwoClassesProperty) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  std::uniform_int_distribution<std::size_t> size(1, 5000);
  for (int trial = 0; trial < 1000; ++trial) {
    const double e = unit(rng);
    const double p = unit(rng);
    const DistanceSpec z_spec{DistanceMetric::BinomialZ, size(rng), SampleBasis::Explicit};
    const DistanceSpec chi_spec{DistanceMetric::ChiSquare, z_spec.effective_n, SampleBasis::Explicit};
    const double z = binomial_z(exposure_of(kAB, {e, 1.0 - e}), cat({p, 1.0 - p}), z_spec, "A");
    const double chi = chi_square(exposure_of(kAB, {e, 1.0 - e}), cat({p, 1.0 - p}), chi_spec);
    EXPECT_NEAR(chi, z * z, 1e-9 * std::max(1.0, chi));
  }
}

TEST(ScalarBias, NeutralListIsNeutralUnderAnyWeights) {
  const AlignmentVector list(ClassSpace::scalar(),
                             {AlignmentDistribution::scalar(0.01), AlignmentDistribution::scalar(-0.01),
                              AlignmentDistribution::scalar(0.0), AlignmentDistribution::scalar(0.02),
                              AlignmentDistribution::scalar(-0.02)});
  for (double lambda : {0.01, 0.3, 0.9}) {
    EXPECT_LT(std::abs(scalar_bias(exposure(list, weights(AttentionModel::geometric(lambda, 5))))), 0.021);
  }
}

TEST(ScalarBias, SignFlipsWithSteepness) {
  std::vector<AlignmentDistribution> entries{AlignmentDistribution::scalar(0.98)};
  for (int i = 0; i < 9; ++i) entries.push_back(AlignmentDistribution::scalar(-0.5));
  const AlignmentVector list(ClassSpace::scalar(), entries);
  EXPECT_GT(scalar_bias(exposure(list, weights(AttentionModel::geometric(0.9, 10)))), 0.0);
  EXPECT_LT(scalar_bias(exposure(list, weights(AttentionModel::geometric(0.05, 10)))), 0.0);
}

TEST(ScalarBias, SingleItemIsItsScore) {
  const AlignmentVector list(ClassSpace::scalar(), {AlignmentDistribution::scalar(-0.22)});
  EXPECT_DOUBLE_EQ(scalar_bias(exposure(list, weights(AttentionModel::geometric(0.4, 1)))), -0.22);
}

TEST(ScalarBias, CategoricalInputFails) {
  EXPECT_THROW(scalar_bias(exposure_of(kAB, {0.5, 0.5})), ModeError);
}

TEST(DistanceSpec, MetricModeCompatibility) {
  EXPECT_THROW((DistanceSpec{DistanceMetric::AbsScalar, 1, SampleBasis::ListLength}.validate(kAB)), ConfigError);
  EXPECT_THROW((DistanceSpec{DistanceMetric::ChiSquare, 1, SampleBasis::ListLength}.validate(ClassSpace::scalar())),
               ConfigError);
  EXPECT_THROW((DistanceSpec{DistanceMetric::ChiSquare, 0, SampleBasis::ListLength}.validate(kAB)), ConfigError);
  EXPECT_NO_THROW((DistanceSpec{DistanceMetric::ChiSquare, 3, SampleBasis::ListLength}.validate(kABC)));
}
