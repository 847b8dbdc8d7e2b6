#pragma once

// The viable-parameter test: sweep the attention parameter across a
// plausible domain and ask whether any setting brings exposure within
// delta_max of the population estimate.

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
#include "viable/exposure.hpp"

namespace viable {

enum class Verdict { Fair, Unfair, TriviallyFairSmallN };

enum class BiasDirection { Over, Under, None };

inline std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Fair:
      return "fair";
    case Verdict::Unfair:
      return "unfair";
    case Verdict::TriviallyFairSmallN:
      return "trivially_fair_small_n";
  }
  return "unknown";
}

inline std::string_view to_string(BiasDirection direction) {
  switch (direction) {
    case BiasDirection::Over:
      return "over";
    case BiasDirection::Under:
      return "under";
    case BiasDirection::None:
      return "none";
  }
  return "unknown";
}

inline bool is_fair(Verdict verdict) { return verdict != Verdict::Unfair; }

struct AuditConfig {
  Family family = Family::TruncatedGeometric;
  // Plausible parameter values. A degenerate interval (low == high) audits a
  // single parameter value.
  ParamInterval domain = default_domain(Family::TruncatedGeometric);
  std::size_t grid_points = 1000;
  double delta_max = 1.0;
  DistanceSpec distance{};
  // Lists of at most this many items are read completely (uniform attention).
  std::size_t small_n_cutoff = 7;
  std::optional<std::string> target_class;
  MissingScorePolicy missing_scores = MissingScorePolicy::Zero;

  void validate(const ClassSpace& space) const {
    if (!is_parametric(family)) {
      throw ConfigError("the scan needs a single-parameter family, got '" + std::string(to_string(family)) + "'");
    }
    if (!(domain.low <= domain.high)) throw ConfigError("domain low must not exceed high");
    try {
      AttentionModel::with_param(family, domain.low, 1);
      AttentionModel::with_param(family, domain.high, 1);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("domain outside the family's parameter range: ") + e.what());
    }
    if (domain.low < domain.high && grid_points < 2) throw ConfigError("grid needs at least two points");
    if (!(delta_max > 0.0)) throw ConfigError("delta_max must be positive");
    distance.validate(space);
    if (target_class) {
      if (space.is_scalar()) throw ConfigError("scalar alignment takes no target class");
      if (!space.contains(*target_class)) throw ConfigError("target class '" + *target_class + "' not in class space");
    } else if (distance.metric == DistanceMetric::BinomialZ) {
      throw ConfigError("the binomial Z distance needs a target class");
    }
  }
};

struct CurvePoint {
  double param = 0.0;
  double distance = 0.0;
  double signed_deviation = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct ViableReport {
  Verdict verdict = Verdict::Unfair;
  // Hulls of maximal runs of grid points with distance < delta_max.
  std::vector<ParamInterval> viable_intervals;
  // Empty when the small-n rule fired (no parameter was scanned).
  std::optional<double> argmin_param;
  double min_distance = std::numeric_limits<double>::infinity();
  BiasDirection bias_direction_at_argmin = BiasDirection::None;
  std::vector<CurvePoint> curve;
  AuditConfig config;
  std::size_t n = 0;
};

// Over / Under when the target share (or scalar lean) is above / below the estimate.
inline BiasDirection direction_of(double signed_dev) {
  if (signed_dev > kDegenerateMatchTolerance) return BiasDirection::Over;
  if (signed_dev < -kDegenerateMatchTolerance) return BiasDirection::Under;
  return BiasDirection::None;
}

inline BiasDirection bias_direction(const ExposureResult& e, const AlignmentDistribution& p_hat,
                                    const std::string& target_class) {
  const std::size_t t = e.class_space.index_of(target_class);
  return direction_of(e.value[t] - p_hat[t]);
}

// Log-spaced grid over the domain; each point sits at the centre of its cell,
// so the endpoints themselves are never evaluated.
inline std::vector<double> parameter_grid(const AuditConfig& config) {
  if (config.domain.low == config.domain.high) return {config.domain.low};
  const double log_low = std::log(config.domain.low);
  const double step = (std::log(config.domain.high) - log_low) / static_cast<double>(config.grid_points);
  std::vector<double> grid(config.grid_points);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    grid[j] = std::exp(log_low + (static_cast<double>(j) + 0.5) * step);
  }
  return grid;
}

// Distance and signed deviation for one attention model.
inline CurvePoint evaluate_weights(const AlignmentVector& list, const AlignmentDistribution& p_hat,
                                   const AuditConfig& config, const WeightVector& w, double param) {
  const ExposureResult e = exposure(list, w, config.missing_scores);
  return {param, distance(e, p_hat, config.distance, config.target_class),
          signed_deviation(e, p_hat, config.target_class)};
}

inline CurvePoint evaluate_at(const AlignmentVector& list, const AlignmentDistribution& p_hat,
                              const AuditConfig& config, double param) {
  return evaluate_weights(list, p_hat, config, weights(AttentionModel::with_param(config.family, param, list.size())),
                          param);
}

inline ViableReport scan(const AlignmentVector& list, const AlignmentDistribution& p_hat, const AuditConfig& config) {
  const ClassSpace& space = list.class_space();
  config.validate(space);
  try {
    validate_distribution(space, p_hat);
  } catch (const Error& e) {
    throw ConfigError(std::string("population estimate does not match the list's class space: ") + e.what());
  }

  ViableReport report;
  report.config = config;
  report.n = list.size();

  if (list.size() <= config.small_n_cutoff) {
    const CurvePoint point =
        evaluate_weights(list, p_hat, config, weights(AttentionModel::uniform(list.size())), 0.0);
    report.min_distance = point.distance;
    report.bias_direction_at_argmin = direction_of(point.signed_deviation);
    if (point.distance < config.delta_max) {
      report.verdict = Verdict::TriviallyFairSmallN;
      report.viable_intervals.push_back(config.domain);
    } else {
      report.verdict = Verdict::Unfair;
    }
    return report;
  }

  const std::vector<double> grid = parameter_grid(config);
  report.curve.reserve(grid.size());
  for (double param : grid) report.curve.push_back(evaluate_at(list, p_hat, config, param));

  std::optional<std::size_t> run_start;
  std::size_t best = 0;
  for (std::size_t j = 0; j < report.curve.size(); ++j) {
    const CurvePoint& point = report.curve[j];
    if (point.distance < report.curve[best].distance) best = j;
    const bool viable = point.distance < config.delta_max;
    if (viable && !run_start) run_start = j;
    if (!viable && run_start) {
      report.viable_intervals.push_back({report.curve[*run_start].param, report.curve[j - 1].param});
      run_start.reset();
    }
  }
  if (run_start) report.viable_intervals.push_back({report.curve[*run_start].param, report.curve.back().param});

  report.argmin_param = report.curve[best].param;
  report.min_distance = report.curve[best].distance;
  report.bias_direction_at_argmin = direction_of(report.curve[best].signed_deviation);
  report.verdict = report.viable_intervals.empty() ? Verdict::Unfair : Verdict::Fair;
  return report;
}

// Audits the per-rank average of all realizations as one list.
inline ViableReport scan_aggregate(const RealizationSet& set, const AlignmentDistribution& p_hat,
                                   const AuditConfig& config) {
  return scan(aggregate_realizations(set, config.missing_scores), p_hat, config);
}

}  // namespace viable
