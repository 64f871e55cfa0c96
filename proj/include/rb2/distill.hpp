#pragma once

#include <span>

#include "rb2/boosting.hpp"

namespace rb2 {

/// Merges sibling leaves whose values differ by less than delta, bottom-up
/// to a fixed point; the merged leaf holds the n-weighted mean.
RelationalTree delta_prune(RelationalTree tree, double delta);

/// Relabels the queries with the boosted model's probabilities and fits a
/// single mean-leaf tree to them, then delta-prunes. Leaf values are
/// probabilities in [0,1].
RelationalTree distill(const BoostedModel& model, std::span<const GroundAtom> queries,
                       const FactStore& store, const TreeParams& params, const ModeSet& modes,
                       double delta = 0.01);

/// Fraction of queries where tree and model agree at the 0.5 threshold.
double fidelity(const RelationalTree& tree, const BoostedModel& model,
                std::span<const GroundAtom> queries, const FactStore& store);

}  // namespace rb2
