#include <gtest/gtest.h>

#include <random>

#include "viable/alignment.hpp"
#include "viable/fair_generator.hpp"

using namespace viable;

namespace {

const ClassSpace kGender = ClassSpace::categorical({"Female", "Male", "Unknown"});
const ClassSpace kAB = ClassSpace::categorical({"A", "B"});

AlignmentDistribution random_distribution(std::mt19937_64& rng, std::size_t classes) {
  std::exponential_distribution<double> draw(1.0);
  std::vector<double> p(classes);
  double total = 0.0;
  for (double& x : p) total += (x = draw(rng));
  for (double& x : p) x /= total;
  return AlignmentDistribution::categorical(std::move(p));
}

AlignmentVector random_list(std::mt19937_64& rng, const ClassSpace& space, std::size_t n) {
  std::vector<AlignmentDistribution> entries;
  for (std::size_t i = 0; i < n; ++i) entries.push_back(random_distribution(rng, space.size()));
  return AlignmentVector(space, std::move(entries));
}

}  // namespace

TEST(ClassSpace, RejectsBadLabels) {
  EXPECT_THROW(ClassSpace::categorical({"A"}), LabelError);
  EXPECT_THROW(ClassSpace::categorical({"A", "A"}), LabelError);
  EXPECT_THROW(ClassSpace::categorical({"A", ""}), LabelError);
  EXPECT_THROW(kAB.index_of("C"), LabelError);
  EXPECT_THROW(ClassSpace::scalar().index_of("A"), ModeError);
}

TEST(OneHot, GenderExample) {
  const auto female = make_one_hot("Female", kGender);
  EXPECT_EQ(std::vector<double>(female.probabilities().begin(), female.probabilities().end()),
            (std::vector<double>{1.0, 0.0, 0.0}));
  const auto unknown = make_one_hot("Unknown", kGender);
  EXPECT_EQ(std::vector<double>(unknown.probabilities().begin(), unknown.probabilities().end()),
            (std::vector<double>{0.0, 0.0, 1.0}));
  EXPECT_THROW(make_one_hot("X", kAB), LabelError);
}

TEST(AlignmentVector, ValidatesEntries) {
  EXPECT_THROW(AlignmentVector(kAB, {}), DomainError);
  EXPECT_THROW(AlignmentVector(kAB, {AlignmentDistribution::categorical({0.6, 0.6})}), DomainError);
  EXPECT_THROW(AlignmentVector(kAB, {AlignmentDistribution::categorical({1.2, -0.2})}), DomainError);
  EXPECT_THROW(AlignmentVector(kAB, {AlignmentDistribution::categorical({1.0})}), ShapeError);
  EXPECT_THROW(AlignmentVector(kAB, {AlignmentDistribution::scalar(0.1)}), ModeError);
  EXPECT_THROW(AlignmentVector(ClassSpace::scalar(), {AlignmentDistribution::scalar(1.5)}), DomainError);
  EXPECT_THROW(AlignmentVector(ClassSpace::scalar(), {make_one_hot("A", kAB)}), ModeError);
  EXPECT_NO_THROW(AlignmentVector(ClassSpace::scalar(), {AlignmentDistribution::missing_score()}));
}

TEST(PopulationEstimator, TwoOppositeItemsSplitEvenly) {
  const AlignmentVector list(kAB, {make_one_hot("A", kAB), make_one_hot("B", kAB)});
  const auto p = population_estimator(list);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(PopulationEstimator, PoolShare) {
  const ClassSpace race = ClassSpace::categorical({"Black", "other"});
  std::vector<AlignmentDistribution> pool;
  for (int i = 0; i < 4407; ++i) pool.push_back(make_one_hot(i < 573 ? "Black" : "other", race));
  EXPECT_NEAR(population_estimator(race, pool)[0], 0.130, 5e-4);
}

TEST(PopulationEstimator, ScalarMean) {
  const AlignmentVector list(ClassSpace::scalar(), {AlignmentDistribution::scalar(0.98),
                                                    AlignmentDistribution::scalar(-0.94),
                                                    AlignmentDistribution::scalar(-0.22)});
  EXPECT_NEAR(population_estimator(list).score(), -0.06, 1e-12);
}

TEST(PopulationEstimator, MissingScores) {
  const AlignmentVector list(ClassSpace::scalar(), {AlignmentDistribution::scalar(0.6),
                                                    AlignmentDistribution::missing_score(),
                                                    AlignmentDistribution::scalar(0.3)});
  EXPECT_NEAR(population_estimator(list, MissingScorePolicy::Zero).score(), 0.3, 1e-15);
  EXPECT_NEAR(population_estimator(list, MissingScorePolicy::Renormalize).score(), 0.45, 1e-15);
  const AlignmentVector empty(ClassSpace::scalar(), {AlignmentDistribution::missing_score()});
  EXPECT_THROW(population_estimator(empty, MissingScorePolicy::Renormalize), DomainError);
}

TEST(PopulationEstimator, EmptyPoolFails) {
  EXPECT_THROW(population_estimator(kAB, std::span<const AlignmentDistribution>{}), DomainError);
}

TEST(PopulationEstimator, OutputIsDistributionProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto list = random_list(rng, kGender, 1 + trial % 40);
    EXPECT_NO_THROW(validate_distribution(kGender, population_estimator(list)));
  }
}

TEST(Aggregate, MirroredRealizationsAverageOut) {
  const RealizationSet set({AlignmentVector(kAB, {make_one_hot("A", kAB), make_one_hot("B", kAB)}),
                            AlignmentVector(kAB, {make_one_hot("B", kAB), make_one_hot("A", kAB)})});
  const auto agg = aggregate_realizations(set);
  for (const auto& e : agg) {
    EXPECT_DOUBLE_EQ(e[0], 0.5);
    EXPECT_DOUBLE_EQ(e[1], 0.5);
  }
}

TEST(Aggregate, IdenticalRealizationsAreIdempotent) {
  std::mt19937_64 rng(3);
  const auto list = random_list(rng, kGender, 12);
  const RealizationSet set({list, list, list, list});
  const auto agg = aggregate_realizations(set);
  for (std::size_t i = 0; i < list.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(agg[i][c], list[i][c], 1e-15);
  }
}

TEST(Aggregate, MismatchedRealizationsFail) {
  const AlignmentVector two(kAB, {make_one_hot("A", kAB), make_one_hot("B", kAB)});
  const AlignmentVector one(kAB, {make_one_hot("A", kAB)});
  EXPECT_THROW(RealizationSet({two, one}), DomainError);
  const ClassSpace other = ClassSpace::categorical({"A", "C"});
  EXPECT_THROW(RealizationSet({two, AlignmentVector(other, {make_one_hot("A", other), make_one_hot("C", other)})}),
               DomainError);
  EXPECT_THROW(RealizationSet({}), DomainError);
}

TEST(Aggregate, PreservesPopulationEstimatorProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 17;
    const std::size_t k = 1 + trial % 9;
    std::vector<AlignmentVector> lists;
    for (std::size_t r = 0; r < k; ++r) lists.push_back(random_list(rng, kGender, n));
    const RealizationSet set(lists);
    const auto of_aggregate = population_estimator(aggregate_realizations(set));
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (const auto& l : lists) mean += population_estimator(l)[c];
      mean /= static_cast<double>(k);
      EXPECT_NEAR(of_aggregate[c], mean, 1e-12);
    }
  }
}

TEST(Aggregate, UniformShufflesConvergeToPoolShare) {
  // 13 % minority pool; 10 000 shuffles of length 20.
  const ClassSpace space = ClassSpace::categorical({"minority", "majority"});
  std::vector<AlignmentDistribution> pool;
  for (int i = 0; i < 200; ++i) pool.push_back(make_one_hot(i < 26 ? "minority" : "majority", space));
  const auto set = synthesize_realizations(space, pool, 20, 10000, SynthesisPolicy::uniform_shuffle(), 2024);
  const auto agg = aggregate_realizations(set);
  const double p = population_estimator(space, pool)[0];
  for (const auto& e : agg) EXPECT_LT(std::abs(e[0] - p), 0.02);
}

TEST(ProjectBinary, DatingExample) {
  const ClassSpace race = ClassSpace::categorical({"white", "Black", "Asian", "other"});
  const AlignmentVector list(race, {AlignmentDistribution::categorical({0.547, 0.130, 0.121, 0.202})});
  const auto projected = project_binary(list, "Black");
  EXPECT_EQ(projected.class_space().labels(), (std::vector<std::string>{"Black", "non-Black"}));
  EXPECT_NEAR(projected[0][0], 0.130, 1e-15);
  EXPECT_NEAR(projected[0][1], 0.870, 1e-15);
}

TEST(ProjectBinary, OneHotCases) {
  const AlignmentVector list(kGender, {make_one_hot("Male", kGender), make_one_hot("Female", kGender)});
  const auto projected = project_binary(list, "Male");
  EXPECT_EQ(projected[0][0], 1.0);
  EXPECT_EQ(projected[0][1], 0.0);
  EXPECT_EQ(projected[1][0], 0.0);
  EXPECT_EQ(projected[1][1], 1.0);
}

TEST(ProjectBinary, Errors) {
  const AlignmentVector scalar(ClassSpace::scalar(), {AlignmentDistribution::scalar(0.1)});
  EXPECT_THROW(project_binary(scalar, "A"), ModeError);
  const AlignmentVector list(kAB, {make_one_hot("A", kAB)});
  EXPECT_THROW(project_binary(list, "C"), LabelError);
}

TEST(ProjectBinary, CommutesWithAveragingProperty) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto list = random_list(rng, kGender, 1 + trial % 30);
    for (const std::string& c : kGender.labels()) {
      const auto a = population_estimator(project_binary(list, c));
      const auto b = project_binary(population_estimator(list), kGender, c);
      EXPECT_NEAR(a[0], b[0], 1e-12);
      EXPECT_NEAR(a[1], b[1], 1e-12);
    }
  }
}
