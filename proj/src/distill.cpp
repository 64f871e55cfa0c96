#include "rb2/distill.hpp"

#include <cmath>
#include <functional>

namespace rb2 {

namespace {

// Rebuilds the node vector dropping unreachable nodes after merges.
RelationalTree compact(const RelationalTree& tree) {
  RelationalTree out(tree.target(), tree.num_vars());
  if (tree.nodes().empty()) return out;
  // recursive copy keeps parent-before-child ordering
  std::function<int(int)> copy_rec = [&](int idx) {
    int self = static_cast<int>(out.nodes().size());
    out.nodes().push_back(tree.nodes()[idx]);
    if (!tree.nodes()[idx].is_leaf()) {
      int yes = copy_rec(tree.nodes()[idx].yes);
      int no = copy_rec(tree.nodes()[idx].no);
      out.nodes()[self].yes = yes;
      out.nodes()[self].no = no;
    }
    return self;
  };
  copy_rec(0);
  return out;
}

}  // namespace

RelationalTree delta_prune(RelationalTree tree, double delta) {
  if (tree.nodes().empty()) return tree;
  bool changed = true;
  while (changed) {
    changed = false;
    auto& nodes = tree.nodes();
    for (TreeNode& n : nodes) {
      if (n.is_leaf()) continue;
      TreeNode& yes = nodes[n.yes];
      TreeNode& no = nodes[n.no];
      if (!yes.is_leaf() || !no.is_leaf()) continue;
      if (std::fabs(yes.value - no.value) >= delta) continue;
      size_t total = yes.n_examples + no.n_examples;
      double merged = total > 0 ? (yes.value * static_cast<double>(yes.n_examples) +
                                   no.value * static_cast<double>(no.n_examples)) /
                                      static_cast<double>(total)
                                : 0.5 * (yes.value + no.value);
      n.value = merged;
      n.n_examples = total > 0 ? total : n.n_examples;
      n.yes = -1;
      n.no = -1;
      n.test.atoms.clear();
      changed = true;
    }
  }
  return compact(tree);
}

RelationalTree distill(const BoostedModel& model, std::span<const GroundAtom> queries,
                       const FactStore& store, const TreeParams& params, const ModeSet& modes,
                       double delta) {
  if (queries.empty()) throw UsageError("distill: no queries");
  std::vector<RegressionExample> examples;
  examples.reserve(queries.size());
  for (const GroundAtom& q : queries)
    examples.push_back({q, &store, model.predict_prob(q, store), 1.0});
  RelationalTree tree = learn_tree(examples, modes, params, LeafRule::kWeightedMean);
  return delta_prune(std::move(tree), delta);
}

double fidelity(const RelationalTree& tree, const BoostedModel& model,
                std::span<const GroundAtom> queries, const FactStore& store) {
  if (queries.empty()) throw UsageError("fidelity: no queries");
  size_t agree = 0;
  for (const GroundAtom& q : queries) {
    bool tree_pos = tree.evaluate(q, store) >= 0.5;
    bool model_pos = model.predict_prob(q, store) >= 0.5;
    agree += (tree_pos == model_pos) ? 1u : 0u;
  }
  return static_cast<double>(agree) / static_cast<double>(queries.size());
}

}  // namespace rb2
