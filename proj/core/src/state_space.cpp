#include "losscost/state_space.hpp"

#include <algorithm>
#include <numeric>

#include "losscost/error.hpp"

namespace losscost {

namespace {

bool lex_less(std::span<const int> a, std::span<const int> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

int StateSpace::total_calls(std::size_t i) const {
  auto q = state(i);
  return std::accumulate(q.begin(), q.end(), 0);
}

std::optional<std::size_t> StateSpace::find(std::span<const int> q) const {
  if (q.size() != static_cast<std::size_t>(k_)) return std::nullopt;
  std::size_t lo = 0;
  std::size_t hi = count_;
  while (lo < hi) {
    std::size_t mid = lo + (hi - lo) / 2;
    if (lex_less(state(mid), q))
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < count_ && std::ranges::equal(state(lo), q)) return lo;
  return std::nullopt;
}

std::string StateSpace::label(std::size_t i) const {
  std::string out;
  for (int j = 0; j < k_; ++j) {
    if (j) out += ':';
    out += std::to_string(calls(i, j));
  }
  return out;
}

void StateSpace::link(bool require_admitted_inside) {
  up_.assign(count_ * k_, kNone);
  down_.assign(count_ * k_, kNone);
  State probe(k_);
  for (std::size_t i = 0; i < count_; ++i) {
    auto q = state(i);
    std::copy(q.begin(), q.end(), probe.begin());
    for (int j = 0; j < k_; ++j) {
      if (probe[j] > 0) {
        --probe[j];
        auto lower = find(probe);
        ++probe[j];
        if (!lower)
          throw ValidationError("state space is not closed under call completion at state " +
                                label(i));
        down_[i * k_ + j] = static_cast<std::int64_t>(*lower);
      }
      if (admits(i, j)) {
        ++probe[j];
        auto upper = find(probe);
        --probe[j];
        if (upper)
          up_[i * k_ + j] = static_cast<std::int64_t>(*upper);
        else if (require_admitted_inside)
          throw ValidationError("class " + std::to_string(j) + " is admitted in state " +
                                label(i) + " but the resulting state is not in the space");
      }
    }
  }
}

StateSpace StateSpace::from_states(int class_count, std::vector<State> states,
                                   std::vector<std::uint64_t> admitted) {
  if (class_count < 1 || class_count > 64)
    throw ValidationError("class count must be between 1 and 64");
  if (states.size() != admitted.size())
    throw ValidationError("one admissible-class mask is required per state");
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& q : states) {
    if (q.size() != static_cast<std::size_t>(class_count))
      throw ValidationError("state vector has the wrong number of classes");
    if (std::ranges::any_of(q, [](int x) { return x < 0; }))
      throw ValidationError("state vectors must be non-negative");
  }
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return states[a] < states[b]; });

  StateSpace space;
  space.k_ = class_count;
  space.count_ = states.size();
  space.calls_.reserve(states.size() * class_count);
  space.admitted_.reserve(states.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && states[order[i]] == states[order[i - 1]])
      throw ValidationError("duplicate state in hand-built state space");
    space.calls_.insert(space.calls_.end(), states[order[i]].begin(), states[order[i]].end());
    space.admitted_.push_back(admitted[order[i]] & space.full_mask());
  }
  if (space.count_ == 0 || space.total_calls(0) != 0)
    throw ValidationError("state space must contain the empty state");
  space.link(true);
  return space;
}

StateSpace enumerate_states(std::span<const TrafficClass> classes, const AdmissionPolicy& policy,
                            std::size_t max_states) {
  validate_classes(classes);
  validate_policy(policy, classes.size());
  const int k = static_cast<int>(classes.size());

  // Per-class upper bounds on q_j; the odometer below walks the box in
  // lexicographic order and skips infeasible suffixes.
  std::vector<int> bound(k);
  const auto* fs = std::get_if<FullSharing>(&policy);
  const auto* pc = std::get_if<PerClassThreshold>(&policy);
  for (int j = 0; j < k; ++j)
    bound[j] = fs ? fs->capacity / classes[j].bandwidth : pc->thresholds[j];

  auto used = [&](const State& q) {
    long long c = 0;
    for (int j = 0; j < k; ++j) c += static_cast<long long>(q[j]) * classes[j].bandwidth;
    return c;
  };
  auto feasible = [&](const State& q) { return !fs || used(q) <= fs->capacity; };
  auto admitted = [&](const State& q) {
    std::uint64_t mask = 0;
    const long long c = fs ? used(q) : 0;
    for (int j = 0; j < k; ++j) {
      bool ok = fs ? c <= static_cast<long long>(fs->capacity) - classes[j].bandwidth
                   : q[j] < pc->thresholds[j];
      if (ok) mask |= 1ULL << j;
    }
    return mask;
  };

  StateSpace space;
  space.k_ = k;
  State q(k, 0);
  while (true) {
    if (space.count_ >= max_states)
      throw SizeError("state space exceeds the configured cap of " + std::to_string(max_states) +
                      " states");
    space.calls_.insert(space.calls_.end(), q.begin(), q.end());
    space.admitted_.push_back(admitted(q));
    ++space.count_;

    // Advance to the next feasible state in lexicographic order.
    int pos = k - 1;
    while (pos >= 0) {
      ++q[pos];
      if (q[pos] <= bound[pos] && feasible(q)) break;
      q[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  space.link(true);
  return space;
}

bool coordinate_convex(const StateSpace& space) {
  State probe(space.classes());
  for (std::size_t i = 0; i < space.size(); ++i) {
    auto q = space.state(i);
    for (int j = 0; j < space.classes(); ++j) {
      if (space.admits(i, j)) continue;
      std::copy(q.begin(), q.end(), probe.begin());
      ++probe[j];
      if (space.find(probe)) return false;
    }
  }
  return true;
}

}  // namespace losscost
