#pragma once

// Fair ranking construction for a fixed attention model, and a seeded
// generator of shuffled / churned realizations for exercising aggregate
// audits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "viable/alignment.hpp"
#include "viable/attention.hpp"
#include "viable/errors.hpp"
#include "viable/exposure.hpp"

namespace viable {

// Number of items per class, in label order. Label order breaks ties.
struct CompositionSpec {
  std::vector<std::pair<std::string, std::size_t>> class_counts;

  std::size_t n() const {
    std::size_t total = 0;
    for (const auto& [label, count] : class_counts) total += count;
    return total;
  }

  ClassSpace class_space() const {
    std::vector<std::string> labels;
    for (const auto& [label, count] : class_counts) labels.push_back(label);
    return ClassSpace::categorical(std::move(labels));
  }

  AlignmentDistribution proportions() const {
    const double total = static_cast<double>(n());
    std::vector<double> shares;
    for (const auto& [label, count] : class_counts) shares.push_back(static_cast<double>(count) / total);
    return AlignmentDistribution::categorical(std::move(shares));
  }
};

struct GenerateOptions {
  // Target shares; defaults to the composition's own proportions.
  std::optional<AlignmentDistribution> p_hat;
  DistanceMetric metric = DistanceMetric::ChiSquare;
  // 0 means the list length.
  std::size_t effective_n = 0;
  std::optional<std::string> target_class;
  // Node limit for the exact refinement. Past it the best ordering found so
  // far is returned and `proven_optimal` is false.
  std::size_t search_budget = 2'000'000;
};

struct FairRanking {
  AlignmentVector list;
  std::vector<std::size_t> classes;  // class index per rank
  double distance = 0.0;
  bool proven_optimal = false;
};

namespace detail {

// Distance of a class-share vector from the target under one metric, with
// the same conventions as binomial_z / chi_square.
class ShareDistance {
 public:
  ShareDistance(std::vector<double> target, DistanceMetric metric, std::size_t effective_n,
                std::optional<std::size_t> target_index)
      : target_(std::move(target)), metric_(metric), effective_n_(static_cast<double>(effective_n)),
        target_index_(target_index) {}

  double operator()(const std::vector<double>& shares) const {
    if (metric_ == DistanceMetric::BinomialZ) return z_of_gap(shares[*target_index_] - target_[*target_index_]);
    double statistic = 0.0;
    for (std::size_t c = 0; c < target_.size(); ++c) {
      const double gap = shares[c] - target_[c];
      const double term = chi_term(c, gap, shares[c]);
      if (std::isinf(term)) return term;
      statistic += term;
    }
    return effective_n_ * statistic;
  }

  // Lower bound given that class c ends with a share in [lo[c], hi[c]].
  double lower_bound(const std::vector<double>& lo, const std::vector<double>& hi) const {
    auto gap_to = [&](std::size_t c) {
      if (target_[c] < lo[c]) return lo[c] - target_[c];
      if (target_[c] > hi[c]) return target_[c] - hi[c];
      return 0.0;
    };
    if (metric_ == DistanceMetric::BinomialZ) return z_of_gap(gap_to(*target_index_));
    double statistic = 0.0;
    for (std::size_t c = 0; c < target_.size(); ++c) {
      const double term = chi_term(c, gap_to(c), lo[c]);
      if (std::isinf(term)) return term;
      statistic += term;
    }
    return effective_n_ * statistic;
  }

 private:
  double z_of_gap(double gap) const {
    const double p = target_[*target_index_];
    if (p <= 0.0 || p >= 1.0) {
      return std::abs(gap) <= kDegenerateMatchTolerance ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::abs(gap) / std::sqrt(p * (1.0 - p) / effective_n_);
  }

  double chi_term(std::size_t c, double gap, double share) const {
    if (target_[c] <= 0.0) {
      return share > kDegenerateMatchTolerance ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return gap * gap / target_[c];
  }

  std::vector<double> target_;
  DistanceMetric metric_;
  double effective_n_;
  std::optional<std::size_t> target_index_;
};

inline bool improves(double candidate, double incumbent) {
  return candidate < incumbent - 1e-15 * std::max(1.0, std::abs(incumbent));
}

// Rank by rank, give the slot to the class whose exposure lags its target
// share the most.
inline std::vector<std::size_t> greedy_lag_order(const std::vector<std::size_t>& counts,
                                                 const std::vector<double>& target, const WeightVector& w) {
  std::vector<std::size_t> remaining = counts;
  std::vector<double> exposed(counts.size(), 0.0);
  std::vector<std::size_t> order;
  order.reserve(w.size());
  double cumulative = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cumulative += w[i];
    std::optional<std::size_t> pick;
    double best_lag = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (remaining[c] == 0) continue;
      const double lag = target[c] * cumulative - exposed[c];
      if (!pick || lag > best_lag + 1e-15) {
        pick = c;
        best_lag = lag;
      }
    }
    order.push_back(*pick);
    --remaining[*pick];
    exposed[*pick] += w[i];
  }
  return order;
}

inline std::vector<double> shares_of(const std::vector<std::size_t>& order, std::size_t classes,
                                     const WeightVector& w) {
  std::vector<double> shares(classes, 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) shares[order[i]] += w[i];
  return shares;
}

// Best-improvement pairwise swaps until no swap lowers the distance.
inline double swap_descent(std::vector<std::size_t>& order, std::vector<double>& shares, const WeightVector& w,
                           const ShareDistance& dist) {
  double current = dist(shares);
  std::vector<double> trial;
  while (true) {
    std::optional<std::pair<std::size_t, std::size_t>> best_swap;
    double best = current;
    for (std::size_t i = 0; i < order.size(); ++i) {
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        if (order[i] == order[j] || w[i] == w[j]) continue;
        trial = shares;
        trial[order[i]] += w[j] - w[i];
        trial[order[j]] += w[i] - w[j];
        const double d = dist(trial);
        if (improves(d, best)) {
          best = d;
          best_swap = {i, j};
        }
      }
    }
    if (!best_swap) return current;
    const auto [i, j] = *best_swap;
    shares[order[i]] += w[j] - w[i];
    shares[order[j]] += w[i] - w[j];
    std::swap(order[i], order[j]);
    current = best;
  }
}

// Depth-first branch and bound over class assignments, rank by rank. With
// non-increasing weights the r heaviest remaining slots are the next r ranks
// and the r lightest are the last r, which bounds each class's final share.
class ExactRefiner {
 public:
  ExactRefiner(const WeightVector& w, const ShareDistance& dist, std::size_t budget)
      : w_(w), dist_(dist), budget_(budget), prefix_(w.size() + 1, 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) prefix_[i + 1] = prefix_[i] + w[i];
  }

  // Returns true when the search finished inside the budget.
  bool run(std::vector<std::size_t> counts, std::vector<std::size_t>& best_order, double& best_distance) {
    best_order_ = &best_order;
    best_distance_ = &best_distance;
    order_.assign(w_.size(), 0);
    shares_.assign(counts.size(), 0.0);
    remaining_ = std::move(counts);
    nodes_ = 0;
    exhausted_ = false;
    descend(0);
    return !exhausted_;
  }

 private:
  double range_sum(std::size_t from, std::size_t to) const { return prefix_[to] - prefix_[from]; }

  void descend(std::size_t pos) {
    if (exhausted_) return;
    if (++nodes_ > budget_) {
      exhausted_ = true;
      return;
    }
    const std::size_t n = w_.size();
    if (pos == n) {
      const double d = dist_(shares_);
      if (improves(d, *best_distance_)) {
        *best_distance_ = d;
        *best_order_ = order_;
      }
      return;
    }
    std::vector<double> lo(shares_.size());
    std::vector<double> hi(shares_.size());
    for (std::size_t c = 0; c < shares_.size(); ++c) {
      lo[c] = shares_[c] + range_sum(n - remaining_[c], n);
      hi[c] = shares_[c] + range_sum(pos, pos + remaining_[c]);
    }
    const double bound = dist_.lower_bound(lo, hi);
    if (!improves(bound, *best_distance_)) return;

    for (std::size_t c = 0; c < remaining_.size(); ++c) {
      if (remaining_[c] == 0) continue;
      --remaining_[c];
      shares_[c] += w_[pos];
      order_[pos] = c;
      descend(pos + 1);
      shares_[c] -= w_[pos];
      ++remaining_[c];
    }
  }

  const WeightVector& w_;
  const ShareDistance& dist_;
  std::size_t budget_;
  std::vector<double> prefix_;
  std::vector<std::size_t> order_;
  std::vector<double> shares_;
  std::vector<std::size_t> remaining_;
  std::vector<std::size_t>* best_order_ = nullptr;
  double* best_distance_ = nullptr;
  std::size_t nodes_ = 0;
  bool exhausted_ = false;
};

inline bool non_increasing(const WeightVector& w) {
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i] > w[i - 1]) return false;
  }
  return true;
}

}  // namespace detail

// Ordering of one-hot items whose exposure is as close as possible to the
// target shares. Greedy lag placement, then pairwise-swap descent, then an
// exact branch-and-bound refinement within the search budget.
inline FairRanking generate_fair(const CompositionSpec& spec, const AttentionModel& model,
                                 const GenerateOptions& options = {}) {
  const std::size_t n = spec.n();
  if (n == 0) throw ShapeError("composition has no items");
  if (model.n() != n) {
    throw ShapeError("attention model covers " + std::to_string(model.n()) + " ranks but the composition has " +
                     std::to_string(n) + " items");
  }
  const ClassSpace space = spec.class_space();
  const AlignmentDistribution p_hat = options.p_hat.value_or(spec.proportions());
  validate_distribution(space, p_hat);

  DistanceSpec distance_spec{options.metric, options.effective_n == 0 ? n : options.effective_n,
                             options.effective_n == 0 ? SampleBasis::ListLength : SampleBasis::Explicit};
  distance_spec.validate(space);
  std::optional<std::size_t> target_index;
  if (options.target_class) target_index = space.index_of(*options.target_class);
  if (options.metric == DistanceMetric::BinomialZ && !target_index) {
    throw ConfigError("the binomial Z distance needs a target class");
  }

  std::vector<std::size_t> counts;
  for (const auto& [label, count] : spec.class_counts) counts.push_back(count);
  const std::vector<double> target(p_hat.probabilities().begin(), p_hat.probabilities().end());
  const WeightVector w = weights(model);
  const detail::ShareDistance dist(target, options.metric, distance_spec.effective_n, target_index);

  std::vector<std::size_t> order = detail::greedy_lag_order(counts, target, w);
  std::vector<double> shares = detail::shares_of(order, counts.size(), w);
  double best = detail::swap_descent(order, shares, w, dist);

  bool proven = false;
  if (detail::non_increasing(w)) {
    detail::ExactRefiner refiner(w, dist, options.search_budget);
    proven = refiner.run(counts, order, best);
  }

  std::vector<AlignmentDistribution> entries;
  entries.reserve(n);
  for (std::size_t c : order) entries.push_back(make_one_hot(space.labels()[c], space));
  AlignmentVector list(space, std::move(entries));
  const ExposureResult e = exposure(list, w);
  const double achieved = distance(e, p_hat, distance_spec, options.target_class);
  return {std::move(list), std::move(order), achieved, proven};
}

// How successive realizations differ.
struct SynthesisPolicy {
  enum class Kind { UniformShuffle, ChurnShuffle };
  Kind kind = Kind::UniformShuffle;
  // Fraction of items replaced between consecutive realizations (churn only).
  double churn_rate = 0.0;

  static SynthesisPolicy uniform_shuffle() { return {}; }
  static SynthesisPolicy churn(double rate) { return {Kind::ChurnShuffle, rate}; }
};

namespace detail {

// Uniform integer in [0, bound) from raw engine output; stable across
// standard libraries, unlike std::uniform_int_distribution.
inline std::size_t uniform_below(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t range = static_cast<std::uint64_t>(bound);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = 0;
  do {
    draw = rng();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % range);
}

inline void shuffle_in_place(std::vector<std::size_t>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_below(rng, i)]);
}

// Partial Fisher-Yates: `count` distinct elements of `candidates`, in draw order.
inline std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> candidates, std::size_t count,
                                                         std::mt19937_64& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(candidates[i], candidates[i + uniform_below(rng, candidates.size() - i)]);
  }
  candidates.resize(count);
  return candidates;
}

}  // namespace detail

// Pool indices for k realizations of length n. Deterministic under seed.
inline std::vector<std::vector<std::size_t>> synthesize_realization_indices(std::size_t pool_size, std::size_t n,
                                                                            std::size_t k, SynthesisPolicy policy,
                                                                            std::uint64_t seed) {
  if (n == 0 || k == 0) throw DomainError("need n >= 1 and k >= 1");
  if (pool_size < n) {
    throw DomainError("pool of " + std::to_string(pool_size) + " items cannot fill lists of length " +
                      std::to_string(n));
  }
  if (policy.kind == SynthesisPolicy::Kind::ChurnShuffle && !(policy.churn_rate >= 0.0 && policy.churn_rate <= 1.0)) {
    throw DomainError("churn rate must lie in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> everything(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) everything[i] = i;

  auto fresh = [&] {
    auto picked = detail::draw_without_replacement(everything, n, rng);
    detail::shuffle_in_place(picked, rng);
    return picked;
  };

  const std::size_t replaced =
      static_cast<std::size_t>(std::llround(policy.churn_rate * static_cast<double>(n)));
  std::vector<std::vector<std::size_t>> out;
  out.reserve(k);
  out.push_back(fresh());
  for (std::size_t r = 1; r < k; ++r) {
    if (policy.kind == SynthesisPolicy::Kind::UniformShuffle || replaced >= n) {
      out.push_back(fresh());
      continue;
    }
    // Keep n - replaced of the previous items and refill with items the
    // previous realization did not show, or from the rest of the pool when
    // too few of those remain.
    const std::vector<std::size_t>& previous = out.back();
    std::vector<std::size_t> kept = detail::draw_without_replacement(previous, n - replaced, rng);
    std::vector<bool> in_use(pool_size, false);
    for (std::size_t idx : (pool_size - n >= replaced ? previous : kept)) in_use[idx] = true;
    std::vector<std::size_t> candidates;
    candidates.reserve(pool_size - kept.size());
    for (std::size_t i = 0; i < pool_size; ++i) {
      if (!in_use[i]) candidates.push_back(i);
    }
    auto added = detail::draw_without_replacement(std::move(candidates), replaced, rng);
    kept.insert(kept.end(), added.begin(), added.end());
    detail::shuffle_in_place(kept, rng);
    out.push_back(std::move(kept));
  }
  return out;
}

inline RealizationSet synthesize_realizations(const ClassSpace& space, std::span<const AlignmentDistribution> pool,
                                              std::size_t n, std::size_t k, SynthesisPolicy policy,
                                              std::uint64_t seed) {
  const auto indices = synthesize_realization_indices(pool.size(), n, k, policy, seed);
  std::vector<AlignmentVector> realizations;
  realizations.reserve(k);
  for (const auto& picks : indices) {
    std::vector<AlignmentDistribution> entries;
    entries.reserve(n);
    for (std::size_t idx : picks) entries.push_back(pool[idx]);
    realizations.emplace_back(space, std::move(entries));
  }
  return RealizationSet(std::move(realizations));
}

}  // namespace viable
