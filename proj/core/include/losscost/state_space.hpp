#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "losscost/model.hpp"

namespace losscost {

using State = std::vector<int>;

/// The admitted states of a loss system, lexicographically ordered with the
/// empty state at index 0, plus dense neighbour tables.
///
/// up(i, j) is the index of q + e_j when class j is admitted in q, otherwise
/// kNone. down(i, j) is the index of q - e_j when q_j > 0, otherwise kNone.
/// Immutable after construction.
class StateSpace {
 public:
  static constexpr std::size_t kDefaultMaxStates = 2'000'000;
  static constexpr std::int64_t kNone = -1;

  /// Hand-built space: `states` need not be sorted; `admitted[i]` is the
  /// admissible-class bitmask for states[i]. Throws ValidationError when the
  /// set is not closed under call completion, lacks the empty state, or
  /// admits a class into a state outside the set.
  static StateSpace from_states(int class_count, std::vector<State> states,
                                std::vector<std::uint64_t> admitted);

  std::size_t size() const { return count_; }
  int classes() const { return k_; }

  std::span<const int> state(std::size_t i) const {
    return {calls_.data() + i * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
  }
  int calls(std::size_t i, int j) const { return calls_[i * k_ + j]; }
  int total_calls(std::size_t i) const;

  std::int64_t up(std::size_t i, int j) const { return up_[i * k_ + j]; }
  std::int64_t down(std::size_t i, int j) const { return down_[i * k_ + j]; }

  /// j in R_q.
  bool admits(std::size_t i, int j) const { return (admitted_[i] >> j) & 1U; }
  std::uint64_t admitted_mask(std::size_t i) const { return admitted_[i]; }
  std::uint64_t blocked_mask(std::size_t i) const { return ~admitted_[i] & full_mask(); }
  std::uint64_t full_mask() const { return k_ == 64 ? ~0ULL : ((1ULL << k_) - 1ULL); }
  bool blocks_any(std::size_t i) const { return blocked_mask(i) != 0; }

  /// Index of a state vector, or nullopt when it is not in the space.
  std::optional<std::size_t> find(std::span<const int> q) const;

  /// "q1:q2:...:qK", the textual form used in CSV files.
  std::string label(std::size_t i) const;

 private:
  friend StateSpace enumerate_states(std::span<const TrafficClass>, const AdmissionPolicy&,
                                     std::size_t);
  StateSpace() = default;
  void link(bool require_admitted_inside);

  int k_ = 0;
  std::size_t count_ = 0;
  std::vector<int> calls_;
  std::vector<std::uint64_t> admitted_;
  std::vector<std::int64_t> up_;
  std::vector<std::int64_t> down_;
};

/// Enumerates every admitted state under `policy`. Throws SizeError when more
/// than `max_states` states would be produced.
StateSpace enumerate_states(std::span<const TrafficClass> classes, const AdmissionPolicy& policy,
                            std::size_t max_states = StateSpace::kDefaultMaxStates);

/// Coordinate convexity of the blocking sets: whenever class j is blocked in
/// q, q + e_j is not an admitted state.
bool coordinate_convex(const StateSpace& space);

}  // namespace losscost
