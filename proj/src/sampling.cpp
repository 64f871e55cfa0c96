#include "rb2/sampling.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "rb2/numeric.hpp"

namespace rb2 {

namespace {

PriorityDistribution make_distribution(std::span<const BufferEntry> entries, bool positive) {
  PriorityDistribution dist;
  if (entries.empty()) return dist;
  dist.entries.assign(entries.begin(), entries.end());
  std::vector<double> exponents(entries.size());
  for (size_t i = 0; i < entries.size(); ++i)
    exponents[i] = positive ? 1.0 - entries[i].p : entries[i].p;
  dist.probabilities = stable_softmax(exponents);
  return dist;
}

// One categorical draw by inverse CDF; u in [0,1).
size_t draw_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;  // guard against rounding at the top
}

// Draws `take` entries from `pool` by the side's priority rule, removing
// each drawn entry and recomputing priorities.
std::vector<BufferEntry> draw_prioritized(std::vector<BufferEntry> pool, size_t take,
                                          bool positive, std::mt19937_64& rng) {
  std::vector<BufferEntry> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (out.size() < take && !pool.empty()) {
    PriorityDistribution dist = make_distribution(pool, positive);
    size_t i = draw_index(dist.probabilities, unit(rng));
    out.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<ptrdiff_t>(i));
  }
  return out;
}

// take_p/take_n quotas with shortage spill-over to the other side.
std::pair<size_t, size_t> side_quotas(size_t n_pos, size_t n_neg, int k) {
  size_t quota_p = static_cast<size_t>(k) / 2;
  size_t quota_n = static_cast<size_t>(k) - quota_p;
  size_t take_p = std::min(n_pos, quota_p);
  size_t take_n = std::min(n_neg, quota_n);
  size_t rem = static_cast<size_t>(k) - take_p - take_n;
  if (rem > 0) {
    size_t extra_p = std::min(rem, n_pos - take_p);
    take_p += extra_p;
    rem -= extra_p;
  }
  if (rem > 0) take_n += std::min(rem, n_neg - take_n);
  return {take_p, take_n};
}

void split_by_reward(std::span<const BufferEntry> buffer, std::vector<BufferEntry>& pos,
                     std::vector<BufferEntry>& neg) {
  for (const BufferEntry& e : buffer) (e.reward ? pos : neg).push_back(e);
}

}  // namespace

PriorityDistribution priority_positive(std::span<const BufferEntry> entries) {
  for ([[maybe_unused]] const BufferEntry& e : entries) assert(e.reward == 1);
  return make_distribution(entries, true);
}

PriorityDistribution priority_negative(std::span<const BufferEntry> entries) {
  for ([[maybe_unused]] const BufferEntry& e : entries) assert(e.reward == 0);
  return make_distribution(entries, false);
}

std::vector<BufferEntry> dedup_groundings(std::span<const BufferEntry> buffer) {
  std::unordered_map<GroundAtom, size_t, GroundAtomHash> last;
  for (size_t i = 0; i < buffer.size(); ++i) last[buffer[i].query] = i;
  std::vector<BufferEntry> out;
  out.reserve(last.size());
  for (size_t i = 0; i < buffer.size(); ++i)
    if (last.at(buffer[i].query) == i) out.push_back(buffer[i]);
  return out;
}

std::vector<BufferEntry> informed_sample(std::span<const BufferEntry> buffer, int k,
                                         std::mt19937_64& rng) {
  if (k < 2) throw UsageError("informed_sample: batch size must be >= 2");
  std::vector<BufferEntry> deduped = dedup_groundings(buffer);
  if (deduped.empty()) return {};
  std::vector<BufferEntry> pos, neg;
  split_by_reward(deduped, pos, neg);
  auto [take_p, take_n] = side_quotas(pos.size(), neg.size(), k);
  std::vector<BufferEntry> drawn_p = draw_prioritized(std::move(pos), take_p, true, rng);
  std::vector<BufferEntry> drawn_n = draw_prioritized(std::move(neg), take_n, false, rng);
  drawn_p.insert(drawn_p.end(), drawn_n.begin(), drawn_n.end());
  return drawn_p;
}

std::vector<BufferEntry> greedy_sample(std::span<const BufferEntry> buffer, int k) {
  if (k < 2) throw UsageError("greedy_sample: batch size must be >= 2");
  std::vector<BufferEntry> deduped = dedup_groundings(buffer);
  if (deduped.empty()) return {};
  std::vector<BufferEntry> pos, neg;
  split_by_reward(deduped, pos, neg);
  // hardest first on each side; stable sort keeps buffer order on ties
  std::stable_sort(pos.begin(), pos.end(),
                   [](const BufferEntry& a, const BufferEntry& b) { return a.p < b.p; });
  std::stable_sort(neg.begin(), neg.end(),
                   [](const BufferEntry& a, const BufferEntry& b) { return a.p > b.p; });
  auto [take_p, take_n] = side_quotas(pos.size(), neg.size(), k);
  std::vector<BufferEntry> out(pos.begin(), pos.begin() + static_cast<ptrdiff_t>(take_p));
  out.insert(out.end(), neg.begin(), neg.begin() + static_cast<ptrdiff_t>(take_n));
  return out;
}

std::vector<BufferEntry> random_sample(std::span<const BufferEntry> buffer, int k,
                                       std::mt19937_64& rng) {
  if (k < 1) throw UsageError("random_sample: batch size must be >= 1");
  std::vector<BufferEntry> deduped = dedup_groundings(buffer);
  size_t take = std::min<size_t>(static_cast<size_t>(k), deduped.size());
  // partial Fisher-Yates
  for (size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<size_t> pick(i, deduped.size() - 1);
    std::swap(deduped[i], deduped[pick(rng)]);
  }
  deduped.resize(take);
  return deduped;
}

}  // namespace rb2
