#pragma once

// n-truncated discrete attention distributions over ranks 1..n.
//
// Every family produces a probability vector over ranks. The decreasing
// families (geometric, log-series, discrete Pareto, inverse-log) put more
// attention on rank 1 than on rank n; Uniform models a short list that the
// user reads completely. Weight computation for the parametric families
// happens in log space and is renormalized at the end, so large n and steep
// parameters do not underflow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "viable/errors.hpp"

namespace viable {

enum class Family {
  TruncatedGeometric,
  TruncatedLogSeries,
  TruncatedDiscretePareto,
  Uniform,
  InverseLog,
};

inline std::string_view to_string(Family family) {
  switch (family) {
    case Family::TruncatedGeometric:
      return "geometric";
    case Family::TruncatedLogSeries:
      return "logseries";
    case Family::TruncatedDiscretePareto:
      return "pareto";
    case Family::Uniform:
      return "uniform";
    case Family::InverseLog:
      return "inverselog";
  }
  return "unknown";
}

inline Family family_from_string(std::string_view name) {
  if (name == "geometric") return Family::TruncatedGeometric;
  if (name == "logseries") return Family::TruncatedLogSeries;
  if (name == "pareto") return Family::TruncatedDiscretePareto;
  if (name == "uniform") return Family::Uniform;
  if (name == "inverselog") return Family::InverseLog;
  throw ConfigError("unknown attention family '" + std::string(name) + "'");
}

inline bool is_parametric(Family family) {
  return family == Family::TruncatedGeometric || family == Family::TruncatedLogSeries ||
         family == Family::TruncatedDiscretePareto;
}

// Open interval of parameter values.
struct ParamInterval {
  double low = 0.0;
  double high = 0.0;

  bool contains(double x) const { return low <= x && x <= high; }
  friend bool operator==(const ParamInterval&, const ParamInterval&) = default;
};

// Numeric search bounds used by the fitting routines: the family's open
// domain pulled in far enough that weights stay finite.
inline ParamInterval search_bounds(Family family) {
  switch (family) {
    case Family::TruncatedGeometric:
    case Family::TruncatedLogSeries:
      return {1e-12, 1.0 - 1e-12};
    case Family::TruncatedDiscretePareto:
      return {1e-6, 1e4};
    default:
      throw InfeasibleTargetError("family '" + std::string(to_string(family)) +
                                  "' has no parameter");
  }
}

// Audit domain used when the caller supplies neither a domain nor view bounds.
inline ParamInterval default_domain(Family family) {
  switch (family) {
    case Family::TruncatedGeometric:
    case Family::TruncatedLogSeries:
      return {1e-6, 1.0 - 1e-6};
    case Family::TruncatedDiscretePareto:
      return {1e-3, 1e3};
    default:
      throw ConfigError("family '" + std::string(to_string(family)) + "' has no parameter");
  }
}

class AttentionModel {
 public:
  AttentionModel(Family family, std::vector<double> params, std::size_t n)
      : family_(family), params_(std::move(params)), n_(n) {
    validate();
  }

  static AttentionModel geometric(double lambda, std::size_t n) {
    return {Family::TruncatedGeometric, {lambda}, n};
  }
  static AttentionModel log_series(double p, std::size_t n) {
    return {Family::TruncatedLogSeries, {p}, n};
  }
  static AttentionModel discrete_pareto(double alpha, std::size_t n) {
    return {Family::TruncatedDiscretePareto, {alpha}, n};
  }
  static AttentionModel uniform(std::size_t n) { return {Family::Uniform, {}, n}; }
  static AttentionModel inverse_log(std::size_t n) { return {Family::InverseLog, {}, n}; }

  // Single-parameter constructor shared by the fitting and scanning code.
  static AttentionModel with_param(Family family, double param, std::size_t n) {
    if (!is_parametric(family)) return {family, {}, n};
    return {family, {param}, n};
  }

  Family family() const noexcept { return family_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t n() const noexcept { return n_; }

  // The single parameter of a one-parameter family.
  double param() const {
    if (params_.empty()) throw ParameterError("attention model has no parameter");
    return params_.front();
  }

 private:
  void validate() const {
    if (n_ == 0) throw DomainError("attention model needs n >= 1");
    const std::size_t expected = is_parametric(family_) ? 1 : 0;
    if (params_.size() != expected) {
      throw ParameterError("family '" + std::string(to_string(family_)) + "' takes " +
                           std::to_string(expected) + " parameter(s), got " +
                           std::to_string(params_.size()));
    }
    if (expected == 0) return;
    const double x = params_.front();
    switch (family_) {
      case Family::TruncatedGeometric:
      case Family::TruncatedLogSeries:
        if (!(x > 0.0 && x < 1.0)) {
          throw ParameterError(std::string(to_string(family_)) + " parameter must lie in (0, 1), got " +
                               std::to_string(x));
        }
        break;
      case Family::TruncatedDiscretePareto:
        if (!(x > 0.0) || !std::isfinite(x)) {
          throw ParameterError("pareto shape must be positive and finite, got " + std::to_string(x));
        }
        break;
      default:
        break;
    }
  }

  Family family_;
  std::vector<double> params_;
  std::size_t n_;
};

// Probability vector over ranks; index 0 is rank 1.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {}

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> values() const noexcept { return weights_; }
  auto begin() const noexcept { return weights_.begin(); }
  auto end() const noexcept { return weights_.end(); }

 private:
  std::vector<double> weights_;
};

namespace detail {

inline std::vector<double> normalize_from_log(std::vector<double> log_w) {
  double peak = log_w.front();
  for (double v : log_w) peak = std::max(peak, v);
  for (double& v : log_w) v = std::exp(v - peak);
  const double total = std::accumulate(log_w.begin(), log_w.end(), 0.0);
  for (double& v : log_w) v /= total;
  return log_w;
}

}  // namespace detail

inline WeightVector weights(const AttentionModel& model) {
  const std::size_t n = model.n();
  std::vector<double> w(n);
  switch (model.family()) {
    case Family::Uniform:
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
      return WeightVector(std::move(w));

    case Family::InverseLog: {
      for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::log(static_cast<double>(i) + 2.0);
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (double& v : w) v /= total;
      return WeightVector(std::move(w));
    }

    case Family::TruncatedGeometric: {
      // lambda (1 - lambda)^(i-1); the lambda factor cancels.
      const double log_q = std::log1p(-model.param());
      for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(i) * log_q;
      return WeightVector(detail::normalize_from_log(std::move(w)));
    }

    case Family::TruncatedLogSeries: {
      // -p^i / (i ln(1 - p)); the constant -1/ln(1 - p) cancels.
      const double log_p = std::log(model.param());
      for (std::size_t i = 0; i < n; ++i) {
        const double rank = static_cast<double>(i + 1);
        w[i] = rank * log_p - std::log(rank);
      }
      return WeightVector(detail::normalize_from_log(std::move(w)));
    }

    case Family::TruncatedDiscretePareto: {
      // F(i) - F(i-1) with F(x) = 1 - (1 + x)^-alpha, i.e. i^-a - (i+1)^-a,
      // written as i^-a * (1 - (1 + 1/i)^-a) to keep precision for any a.
      const double alpha = model.param();
      for (std::size_t i = 0; i < n; ++i) {
        const double rank = static_cast<double>(i + 1);
        w[i] = -alpha * std::log(rank) + std::log(-std::expm1(-alpha * std::log1p(1.0 / rank)));
      }
      return WeightVector(detail::normalize_from_log(std::move(w)));
    }
  }
  return WeightVector(std::move(w));
}

// Mean rank seen, sum of i * w_i over ranks 1..n, including truncation effects.
inline double expected_views(const AttentionModel& model) {
  const WeightVector w = weights(model);
  double mean = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) mean += static_cast<double>(i + 1) * w[i];
  return mean;
}

namespace detail {

// Finds x in bounds with f(x) = target for f monotone on bounds (either
// direction). Pareto's unbounded shape is searched in log space.
inline double bisect_monotone(Family family, const std::function<double(double)>& f, double target) {
  const ParamInterval bounds = search_bounds(family);
  const bool log_space = family == Family::TruncatedDiscretePareto;
  auto to_param = [&](double u) { return log_space ? std::exp(u) : u; };
  double lo = log_space ? std::log(bounds.low) : bounds.low;
  double hi = log_space ? std::log(bounds.high) : bounds.high;

  const double f_lo = f(to_param(lo));
  const double f_hi = f(to_param(hi));
  const double reach_min = std::min(f_lo, f_hi);
  const double reach_max = std::max(f_lo, f_hi);
  if (!(target > reach_min && target < reach_max)) {
    throw InfeasibleTargetError("target " + std::to_string(target) + " is outside the achievable range (" +
                                std::to_string(reach_min) + ", " + std::to_string(reach_max) + ")");
  }
  const bool increasing = f_hi > f_lo;

  // Converges to full double precision well inside the 200 step budget.
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double value = f(to_param(mid));
    if (value == target) return to_param(mid);
    if ((value < target) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return to_param(0.5 * (lo + hi));
}

inline void require_parametric(Family family) {
  if (!is_parametric(family)) {
    throw InfeasibleTargetError("family '" + std::string(to_string(family)) + "' has no parameter to fit");
  }
}

}  // namespace detail

// Parameter whose expected_views equals target_mean.
inline double fit_param_to_expected_views(Family family, std::size_t n, double target_mean) {
  detail::require_parametric(family);
  if (n == 0) throw DomainError("n must be >= 1");
  return detail::bisect_monotone(
      family, [&](double x) { return expected_views(AttentionModel::with_param(family, x, n)); },
      target_mean);
}

// Parameter whose rank-1 weight equals head_weight.
inline double fit_param_to_head_weight(Family family, std::size_t n, double head_weight) {
  detail::require_parametric(family);
  if (n == 0) throw DomainError("n must be >= 1");
  if (!(head_weight > 0.0 && head_weight < 1.0)) {
    throw InfeasibleTargetError("head weight must lie in (0, 1)");
  }
  return detail::bisect_monotone(
      family, [&](double x) { return weights(AttentionModel::with_param(family, x, n))[0]; },
      head_weight);
}

// Parameter interval whose expected views lie in [mean_low, mean_high].
// A bound beyond what the family can reach is clipped to the search bounds.
inline ParamInterval param_interval_from_view_bounds(Family family, std::size_t n, double mean_low,
                                                     double mean_high) {
  detail::require_parametric(family);
  if (n == 0) throw DomainError("n must be >= 1");
  if (!(mean_low >= 1.0 && mean_low < mean_high)) {
    throw InfeasibleTargetError("view bounds must satisfy 1 <= low < high, got [" + std::to_string(mean_low) +
                                ", " + std::to_string(mean_high) + "]");
  }
  const ParamInterval bounds = search_bounds(family);
  const double at_low = expected_views(AttentionModel::with_param(family, bounds.low, n));
  const double at_high = expected_views(AttentionModel::with_param(family, bounds.high, n));
  const double reach_min = std::min(at_low, at_high);
  const double reach_max = std::max(at_low, at_high);
  if (mean_high <= reach_min || mean_low >= reach_max) {
    throw InfeasibleTargetError("no parameter gives expected views in [" + std::to_string(mean_low) + ", " +
                                std::to_string(mean_high) + "] for n = " + std::to_string(n));
  }
  const double param_at_min = at_low < at_high ? bounds.low : bounds.high;
  const double param_at_max = at_low < at_high ? bounds.high : bounds.low;

  const double a = mean_low <= reach_min ? param_at_min : fit_param_to_expected_views(family, n, mean_low);
  const double b = mean_high >= reach_max ? param_at_max : fit_param_to_expected_views(family, n, mean_high);
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace viable
