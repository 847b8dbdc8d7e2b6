#pragma once

// Group alignment of ranked items.
//
// Categorical alignment is a probability distribution over an ordered set of
// class labels, which covers one-hot membership, ambiguous membership and
// per-rank averages over many realizations alike. Scalar alignment is a score
// in [-1, 1] (e.g. a partisan lean); scalar entries may be absent for items
// the score source does not cover.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "viable/errors.hpp"

namespace viable {

inline constexpr double kProbabilityTolerance = 1e-9;

enum class AlignmentMode { Categorical, Scalar };

class ClassSpace {
 public:
  static ClassSpace categorical(std::vector<std::string> labels) {
    if (labels.size() < 2) throw LabelError("a categorical class space needs at least two labels");
    std::unordered_set<std::string> seen;
    for (const auto& label : labels) {
      if (label.empty()) throw LabelError("class labels must be non-empty");
      if (!seen.insert(label).second) throw LabelError("duplicate class label '" + label + "'");
    }
    return ClassSpace(AlignmentMode::Categorical, std::move(labels));
  }

  static ClassSpace scalar() { return ClassSpace(AlignmentMode::Scalar, {}); }

  AlignmentMode mode() const noexcept { return mode_; }
  bool is_scalar() const noexcept { return mode_ == AlignmentMode::Scalar; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::size_t index_of(const std::string& label) const {
    if (is_scalar()) throw ModeError("scalar class space has no labels");
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw LabelError("unknown class label '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  bool contains(const std::string& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
  }

  friend bool operator==(const ClassSpace&, const ClassSpace&) = default;

 private:
  ClassSpace(AlignmentMode mode, std::vector<std::string> labels) : mode_(mode), labels_(std::move(labels)) {}

  AlignmentMode mode_;
  std::vector<std::string> labels_;
};

// How absent scalar scores enter means and exposure.
enum class MissingScorePolicy {
  Zero,         // absent = neutral score 0.0
  Renormalize,  // absent items are skipped and the remaining weights rescaled
};

class AlignmentDistribution {
 public:
  static AlignmentDistribution categorical(std::vector<double> probabilities) {
    AlignmentDistribution d;
    d.probabilities_ = std::move(probabilities);
    return d;
  }
  static AlignmentDistribution scalar(double score) {
    AlignmentDistribution d;
    d.scalar_ = true;
    d.score_ = score;
    return d;
  }
  static AlignmentDistribution missing_score() {
    AlignmentDistribution d;
    d.scalar_ = true;
    return d;
  }

  bool is_scalar() const noexcept { return scalar_; }
  bool has_score() const noexcept { return score_.has_value(); }
  double score() const {
    if (!scalar_) throw ModeError("categorical alignment has no scalar score");
    if (!score_) throw DomainError("alignment score is missing");
    return *score_;
  }
  std::optional<double> score_or_missing() const noexcept { return score_; }

  std::span<const double> probabilities() const noexcept { return probabilities_; }
  double operator[](std::size_t c) const { return probabilities_.at(c); }
  std::size_t size() const noexcept { return probabilities_.size(); }

  friend bool operator==(const AlignmentDistribution&, const AlignmentDistribution&) = default;

 private:
  AlignmentDistribution() = default;

  bool scalar_ = false;
  std::vector<double> probabilities_;
  std::optional<double> score_;
};

// Throws unless `d` is a valid member of `space`.
inline void validate_distribution(const ClassSpace& space, const AlignmentDistribution& d,
                                  double tolerance = kProbabilityTolerance) {
  if (space.is_scalar()) {
    if (!d.is_scalar()) throw ModeError("categorical entry in a scalar class space");
    if (d.has_score()) {
      const double s = d.score();
      if (!(s >= -1.0 && s <= 1.0)) throw DomainError("scalar score " + std::to_string(s) + " outside [-1, 1]");
    }
    return;
  }
  if (d.is_scalar()) throw ModeError("scalar entry in a categorical class space");
  if (d.size() != space.size()) {
    throw ShapeError("distribution has " + std::to_string(d.size()) + " classes, class space has " +
                     std::to_string(space.size()));
  }
  double total = 0.0;
  for (double p : d.probabilities()) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probability " + std::to_string(p) + " outside [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > tolerance) {
    throw DomainError("probabilities sum to " + std::to_string(total) + ", expected 1");
  }
}

// Alignment of a ranked list; entry 0 is rank 1.
class AlignmentVector {
 public:
  AlignmentVector(ClassSpace space, std::vector<AlignmentDistribution> entries)
      : space_(std::move(space)), entries_(std::move(entries)) {
    if (entries_.empty()) throw DomainError("alignment vector must have at least one entry");
    for (const auto& e : entries_) validate_distribution(space_, e);
  }

  const ClassSpace& class_space() const noexcept { return space_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const AlignmentDistribution& operator[](std::size_t i) const { return entries_[i]; }
  std::span<const AlignmentDistribution> entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  friend bool operator==(const AlignmentVector&, const AlignmentVector&) = default;

 private:
  ClassSpace space_;
  std::vector<AlignmentDistribution> entries_;
};

// k realizations of the same query, all of length n over one class space.
class RealizationSet {
 public:
  explicit RealizationSet(std::vector<AlignmentVector> realizations) : realizations_(std::move(realizations)) {
    if (realizations_.empty()) throw DomainError("realization set must hold at least one realization");
    const auto& first = realizations_.front();
    for (const auto& r : realizations_) {
      if (!(r.class_space() == first.class_space())) {
        throw DomainError("realizations use different class spaces");
      }
      if (r.size() != first.size()) {
        throw DomainError("realizations have different lengths (" + std::to_string(first.size()) + " vs " +
                          std::to_string(r.size()) + ")");
      }
    }
  }

  std::size_t k() const noexcept { return realizations_.size(); }
  std::size_t n() const noexcept { return realizations_.front().size(); }
  const ClassSpace& class_space() const noexcept { return realizations_.front().class_space(); }
  const AlignmentVector& operator[](std::size_t i) const { return realizations_[i]; }
  std::span<const AlignmentVector> realizations() const noexcept { return realizations_; }
  auto begin() const noexcept { return realizations_.begin(); }
  auto end() const noexcept { return realizations_.end(); }

 private:
  std::vector<AlignmentVector> realizations_;
};

inline AlignmentDistribution make_one_hot(const std::string& label, const ClassSpace& space) {
  std::vector<double> probs(space.size(), 0.0);
  probs[space.index_of(label)] = 1.0;
  return AlignmentDistribution::categorical(std::move(probs));
}

namespace detail {

// Equal-weight mean of a collection of entries from `space`.
inline AlignmentDistribution mean_of(const ClassSpace& space, std::span<const AlignmentDistribution> items,
                                     MissingScorePolicy policy) {
  if (items.empty()) throw DomainError("cannot take the mean of an empty collection");
  if (space.is_scalar()) {
    double total = 0.0;
    std::size_t present = 0;
    for (const auto& item : items) {
      if (item.has_score()) {
        total += item.score();
        ++present;
      }
    }
    if (policy == MissingScorePolicy::Zero) {
      return AlignmentDistribution::scalar(total / static_cast<double>(items.size()));
    }
    if (present == 0) return AlignmentDistribution::missing_score();
    return AlignmentDistribution::scalar(total / static_cast<double>(present));
  }
  std::vector<double> mean(space.size(), 0.0);
  for (const auto& item : items) {
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += item[c];
  }
  for (double& m : mean) m /= static_cast<double>(items.size());
  return AlignmentDistribution::categorical(std::move(mean));
}

}  // namespace detail

// Equal-weight mean alignment of a ranked list.
inline AlignmentDistribution population_estimator(const AlignmentVector& list,
                                                  MissingScorePolicy policy = MissingScorePolicy::Zero) {
  auto mean = detail::mean_of(list.class_space(), list.entries(), policy);
  if (mean.is_scalar() && !mean.has_score()) throw DomainError("every scalar score is missing");
  return mean;
}

// Equal-weight mean alignment of an unordered pool of unique items.
inline AlignmentDistribution population_estimator(const ClassSpace& space,
                                                  std::span<const AlignmentDistribution> pool,
                                                  MissingScorePolicy policy = MissingScorePolicy::Zero) {
  for (const auto& item : pool) validate_distribution(space, item);
  auto mean = detail::mean_of(space, pool, policy);
  if (mean.is_scalar() && !mean.has_score()) throw DomainError("every scalar score is missing");
  return mean;
}

// Per-rank mean alignment across realizations.
inline AlignmentVector aggregate_realizations(const RealizationSet& set,
                                              MissingScorePolicy policy = MissingScorePolicy::Zero) {
  std::vector<AlignmentDistribution> ranks;
  ranks.reserve(set.n());
  std::vector<AlignmentDistribution> column;
  column.reserve(set.k());
  for (std::size_t i = 0; i < set.n(); ++i) {
    column.clear();
    for (const auto& r : set) column.push_back(r[i]);
    ranks.push_back(detail::mean_of(set.class_space(), column, policy));
  }
  return AlignmentVector(set.class_space(), std::move(ranks));
}

inline ClassSpace binary_class_space(const std::string& target) {
  return ClassSpace::categorical({target, "non-" + target});
}

// Collapses one distribution onto {target, non-target}.
inline AlignmentDistribution project_binary(const AlignmentDistribution& d, const ClassSpace& space,
                                            const std::string& target) {
  if (space.is_scalar()) throw ModeError("binary projection needs categorical alignment");
  const double p = d[space.index_of(target)];
  return AlignmentDistribution::categorical({p, 1.0 - p});
}

inline AlignmentVector project_binary(const AlignmentVector& list, const std::string& target) {
  const ClassSpace& space = list.class_space();
  if (space.is_scalar()) throw ModeError("binary projection needs categorical alignment");
  space.index_of(target);
  std::vector<AlignmentDistribution> projected;
  projected.reserve(list.size());
  for (const auto& e : list) projected.push_back(project_binary(e, space, target));
  return AlignmentVector(binary_class_space(target), std::move(projected));
}

}  // namespace viable
