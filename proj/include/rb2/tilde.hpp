#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rb2/logic.hpp"

namespace rb2 {

/// Language bias per predicate: how each argument position may be filled
/// when a refinement literal is generated. `+` reuses an in-scope variable
/// of the matching type, `-` introduces a fresh variable, `#` enumerates
/// constants observed in the store.
enum class ArgMode : uint8_t { kInput, kOutput, kConstant };

struct ModeDeclaration {
  PredId pred;
  std::vector<ArgMode> position_modes;
  int max_occurrences = 2;  // per path
};

struct ModeSet {
  std::vector<ModeDeclaration> decls;
  const ModeDeclaration* find(PredId p) const {
    for (const auto& d : decls)
      if (d.pred == p) return &d;
    return nullptr;
  }
};

struct RegressionExample {
  GroundAtom query;
  const FactStore* store;  // context snapshot
  double target;
  double weight = 1.0;
};

struct TreeParams {
  int max_depth = 3;
  int min_examples_leaf = 2;
  int max_literals_per_test = 2;
  int candidate_constants_per_position = 8;
};

/// Leaf aggregation: the boosting gradient step (sum of gradients over the
/// summed |g|(1-|g|) curvature) or a plain weighted mean of targets
/// (distillation mode).
enum class LeafRule : uint8_t { kGradientStep, kWeightedMean };

struct TreeNode {
  Conjunction test;  // literals added at this node; empty for leaves
  int yes = -1;
  int no = -1;
  double value = 0.0;
  size_t n_examples = 0;
  bool is_leaf() const { return yes < 0; }
};

/// TILDE-style tree with single-path semantics. Node tests are evaluated
/// existentially together with all ancestor true-branch tests under the
/// query bindings; false branches add nothing to the accumulated
/// conjunction. Variables 0..arity-1 are the target query variables.
class RelationalTree {
 public:
  RelationalTree() = default;
  RelationalTree(PredId target, int num_vars) : target_(target), num_vars_(num_vars) {}

  PredId target() const { return target_; }
  int num_vars() const { return num_vars_; }
  void set_num_vars(int n) { num_vars_ = n; }
  std::vector<TreeNode>& nodes() { return nodes_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  double evaluate(const GroundAtom& query, const FactStore& store) const;
  int depth() const;
  size_t num_leaves() const;
  /// True when any node tests the given predicate.
  bool mentions(PredId p) const;

  std::string pretty(const Schema& schema) const;

 private:
  PredId target_ = -1;
  int num_vars_ = 0;
  std::vector<TreeNode> nodes_;  // nodes_[0] is the root when nonempty
};

/// One candidate node test produced by refinement: the new literals plus
/// the variable typing extended with any fresh variables they introduce.
struct RefinementCandidate {
  Conjunction literals;
  std::vector<TypeId> var_types;  // full typing; prefix equals the input scope
  std::string sort_key;           // canonical tie-break key
};

/// Generates candidate node tests for a node whose accumulated true-branch
/// conjunction is `path` with in-scope variable typing `var_types`.
/// Respects per-predicate occurrence caps and the literal-count cap.
std::vector<RefinementCandidate> refinements(const Conjunction& path,
                                             const std::vector<TypeId>& var_types,
                                             const ModeSet& modes, const FactStore& store,
                                             const TreeParams& params);

struct SplitScore {
  std::vector<uint32_t> true_idx;
  std::vector<uint32_t> false_idx;
  double weighted_variance_after = 0.0;
  bool feasible = false;  // both sides >= min_examples_leaf
};

/// Partitions examples by existential satisfaction of path+candidate under
/// each example's query bindings and scores the split by the summed
/// weighted variance of the two sides.
SplitScore score_split(const Conjunction& path, const Conjunction& candidate,
                       std::span<const RegressionExample> examples,
                       std::span<const uint32_t> subset, int min_examples_leaf);

/// Greedy top-down induction minimizing weighted variance at each split.
RelationalTree learn_tree(std::span<const RegressionExample> examples, const ModeSet& modes,
                          const TreeParams& params, LeafRule leaf_rule = LeafRule::kGradientStep);

/// Text form of the modes file: `mode: pred(+t,-t,#t) [max=N].` lines plus
/// one `target: pred/arity.` line. Predicates are declared by their mode
/// line; the target predicate needs one for its types but is never used as
/// a refinement.
struct ParsedModes {
  ModeSet modes;
  PredId target = -1;
};
ParsedModes parse_modes_file(std::istream& in, Schema& schema);
void write_modes_file(std::ostream& out, const ModeSet& modes, PredId target,
                      const Schema& schema);

}  // namespace rb2
