#pragma once

// Attention-weighted exposure of a ranked list and its statistical distance
// from a population estimate.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "viable/alignment.hpp"
#include "viable/attention.hpp"
#include "viable/errors.hpp"

namespace viable {

// Exposure and estimate are treated as equal within this margin when the
// estimate is degenerate (a class share of exactly 0 or 1).
inline constexpr double kDegenerateMatchTolerance = 1e-12;

struct ExposureResult {
  ClassSpace class_space;
  AlignmentDistribution value;
};

enum class DistanceMetric { BinomialZ, ChiSquare, AbsScalar };

// Where effective_n came from.
enum class SampleBasis { ListLength, RealizationCount, Explicit };

inline std::string_view to_string(DistanceMetric metric) {
  switch (metric) {
    case DistanceMetric::BinomialZ:
      return "z";
    case DistanceMetric::ChiSquare:
      return "chi2";
    case DistanceMetric::AbsScalar:
      return "scalar";
  }
  return "unknown";
}

inline std::string_view to_string(SampleBasis basis) {
  switch (basis) {
    case SampleBasis::ListLength:
      return "list";
    case SampleBasis::RealizationCount:
      return "realizations";
    case SampleBasis::Explicit:
      return "explicit";
  }
  return "unknown";
}

struct DistanceSpec {
  DistanceMetric metric = DistanceMetric::BinomialZ;
  std::size_t effective_n = 1;
  SampleBasis basis = SampleBasis::ListLength;

  void validate(const ClassSpace& space) const {
    if (effective_n < 1) throw ConfigError("effective_n must be >= 1");
    switch (metric) {
      case DistanceMetric::BinomialZ:
        if (space.is_scalar() || space.size() != 2) {
          throw ConfigError("the binomial Z distance needs exactly two classes; project to binary first");
        }
        break;
      case DistanceMetric::ChiSquare:
        if (space.is_scalar()) throw ConfigError("the chi-square distance needs categorical alignment");
        break;
      case DistanceMetric::AbsScalar:
        if (!space.is_scalar()) throw ConfigError("the scalar distance needs scalar alignment");
        break;
    }
  }
};

// E = L^T W: per-class attention-weighted share, or the weighted mean score.
inline ExposureResult exposure(const AlignmentVector& list, const WeightVector& w,
                               MissingScorePolicy policy = MissingScorePolicy::Zero) {
  if (list.size() != w.size()) {
    throw ShapeError("alignment vector has length " + std::to_string(list.size()) + " but weight vector has " +
                     std::to_string(w.size()));
  }
  const ClassSpace& space = list.class_space();
  if (space.is_scalar()) {
    double weighted = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].has_score()) continue;
      weighted += w[i] * list[i].score();
      mass += w[i];
    }
    if (policy == MissingScorePolicy::Renormalize) {
      if (mass <= 0.0) throw DomainError("every scalar score is missing");
      weighted /= mass;
    }
    return {space, AlignmentDistribution::scalar(weighted)};
  }
  std::vector<double> shares(space.size(), 0.0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    for (std::size_t c = 0; c < shares.size(); ++c) shares[c] += w[i] * list[i][c];
  }
  return {space, AlignmentDistribution::categorical(std::move(shares))};
}

namespace detail {

inline void require_same_space(const ExposureResult& e, const AlignmentDistribution& p_hat) {
  validate_distribution(e.class_space, p_hat);
}

}  // namespace detail

// Unsigned Z statistic |E[t] - p[t]| / sqrt(p[t](1 - p[t]) / effective_n).
inline double binomial_z(const ExposureResult& e, const AlignmentDistribution& p_hat, const DistanceSpec& spec,
                         const std::string& target_class) {
  if (e.class_space.is_scalar() || e.class_space.size() != 2) {
    throw ModeError("binomial Z needs two-class categorical alignment");
  }
  detail::require_same_space(e, p_hat);
  const std::size_t t = e.class_space.index_of(target_class);
  const double p = p_hat[t];
  const double observed = e.value[t];
  if (p <= 0.0 || p >= 1.0) {
    return std::abs(observed - p) <= kDegenerateMatchTolerance ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double standard_error = std::sqrt(p * (1.0 - p) / static_cast<double>(spec.effective_n));
  return std::abs(observed - p) / standard_error;
}

// Goodness-of-fit statistic effective_n * sum_c (E[c] - p[c])^2 / p[c].
inline double chi_square(const ExposureResult& e, const AlignmentDistribution& p_hat, const DistanceSpec& spec) {
  if (e.class_space.is_scalar()) throw ModeError("chi-square needs categorical alignment");
  detail::require_same_space(e, p_hat);
  double statistic = 0.0;
  for (std::size_t c = 0; c < e.class_space.size(); ++c) {
    const double p = p_hat[c];
    const double observed = e.value[c];
    if (p <= 0.0) {
      if (observed > kDegenerateMatchTolerance) return std::numeric_limits<double>::infinity();
      continue;
    }
    const double diff = observed - p;
    statistic += diff * diff / p;
  }
  return static_cast<double>(spec.effective_n) * statistic;
}

// Signed lean E - target; positive leans towards +1.
inline double scalar_bias(const ExposureResult& e, double target = 0.0) {
  if (!e.class_space.is_scalar()) throw ModeError("scalar bias needs scalar alignment");
  return e.value.score() - target;
}

// Signed gap between exposure and estimate for the reported class (or score).
// Zero when no target class is given for categorical data.
inline double signed_deviation(const ExposureResult& e, const AlignmentDistribution& p_hat,
                               const std::optional<std::string>& target_class) {
  if (e.class_space.is_scalar()) return scalar_bias(e, p_hat.score());
  if (!target_class) return 0.0;
  const std::size_t t = e.class_space.index_of(*target_class);
  return e.value[t] - p_hat[t];
}

// Unsigned distance under `spec`.
inline double distance(const ExposureResult& e, const AlignmentDistribution& p_hat, const DistanceSpec& spec,
                       const std::optional<std::string>& target_class) {
  switch (spec.metric) {
    case DistanceMetric::BinomialZ:
      if (!target_class) throw ConfigError("the binomial Z distance needs a target class");
      return binomial_z(e, p_hat, spec, *target_class);
    case DistanceMetric::ChiSquare:
      return chi_square(e, p_hat, spec);
    case DistanceMetric::AbsScalar:
      return std::abs(scalar_bias(e, p_hat.score()));
  }
  throw ConfigError("unknown distance metric");
}

}  // namespace viable
