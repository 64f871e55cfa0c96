#pragma once

#include <random>
#include <span>
#include <vector>

#include "rb2/logic.hpp"

namespace rb2 {

struct BufferEntry {
  GroundAtom query;
  int arm = -1;
  int reward = 0;  // 0 or 1
  double p = 0.0;  // model probability recorded at interaction time
};

struct PriorityDistribution {
  std::vector<BufferEntry> entries;
  std::vector<double> probabilities;  // sums to 1, all > 0
  bool empty() const { return entries.empty(); }
};

/// Softmax priorities over exponent 1 - p_i (hard positives first).
/// Expects reward = 1 on every entry; empty input yields an empty
/// distribution.
PriorityDistribution priority_positive(std::span<const BufferEntry> entries);

/// Softmax priorities over exponent p_i (hard negatives first).
PriorityDistribution priority_negative(std::span<const BufferEntry> entries);

/// Collapses repeated ground query atoms, keeping the most recent entry.
/// Survivors keep the order of their last occurrence.
std::vector<BufferEntry> dedup_groundings(std::span<const BufferEntry> buffer);

/// Stochastic prioritization: after dedup, splits the buffer by reward and
/// alternately draws K/2 entries per side without replacement, recomputing
/// priorities after each removal. A short side is taken whole and the
/// remaining slots are filled from the other side.
std::vector<BufferEntry> informed_sample(std::span<const BufferEntry> buffer, int k,
                                         std::mt19937_64& rng);

/// Deterministic counterpart: lowest-p positives and highest-p negatives,
/// ties broken by buffer order.
std::vector<BufferEntry> greedy_sample(std::span<const BufferEntry> buffer, int k);

/// Uniform without replacement after dedup.
std::vector<BufferEntry> random_sample(std::span<const BufferEntry> buffer, int k,
                                       std::mt19937_64& rng);

}  // namespace rb2
