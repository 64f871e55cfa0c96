#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "rb2/bandit.hpp"
#include "rb2/data.hpp"

namespace rb2 {

/// Binary propositionalization of a relational context: one column per
/// fact template touching the context tuple, the tuple entity abstracted
/// away. Built once from the available facts, capped at a configurable
/// dimension with most-frequent-first retention; facts unseen at build
/// time map to no column.
class FeatureEncoder {
 public:
  static FeatureEncoder build(const FactStore& store, std::span<const TypeId> context_types,
                              int max_dim);

  int dimension() const { return static_cast<int>(templates_.size()); }
  /// Sorted unique active column indices for the context tuple.
  std::vector<int> encode_indices(std::span<const ConstId> context,
                                  const FactStore& store) const;
  Eigen::VectorXd encode(std::span<const ConstId> context, const FactStore& store) const;

  void dump_vocabulary(std::ostream& out, const Schema& schema) const;

 private:
  // A template: the fact's predicate, which argument position held the
  // context entity, which context slot it came from, and the remaining
  // constants.
  struct Template {
    int slot;
    PredId pred;
    int pos;
    std::vector<ConstId> rest;
    bool operator==(const Template&) const = default;
  };
  struct TemplateHash {
    size_t operator()(const Template& t) const {
      size_t h = std::hash<int>()(t.slot * 131 + t.pred * 31 + t.pos);
      for (ConstId c : t.rest) h = h * 1000003u + static_cast<size_t>(c) + 0x9e3779b9;
      return h;
    }
  };
  std::vector<Template> templates_;
  std::unordered_map<Template, int, TemplateHash> index_;
};

/// Per-arm ridge state. A starts at the identity and only receives rank-1
/// PSD updates, so the Cholesky factor stays valid throughout; solves go
/// through the factor, never an explicit inverse.
class LinUCBArmState {
 public:
  LinUCBArmState(int dim, double alpha);

  double alpha() const { return alpha_; }
  int dim() const { return dim_; }
  double ucb(const Eigen::VectorXd& x) const;
  void update(const Eigen::VectorXd& x, double reward);

  Eigen::VectorXd theta() const;      // A^-1 b
  Eigen::MatrixXd a_matrix() const;   // reconstructed, for audits/tests
  double width_squared(const Eigen::VectorXd& x) const;  // x' A^-1 x

 private:
  int dim_;
  double alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd b_;
  mutable Eigen::VectorXd theta_cache_;
  mutable bool theta_dirty_ = true;
};

/// Highest-UCB arm, ties toward the lowest index.
int linucb_select(std::span<const LinUCBArmState> arm_states, const Eigen::VectorXd& x);

struct LinUCBConfig {
  double alpha = 0.1;
  int max_dim = 4096;
};

/// Online LinUCB over the environment: the encoder and per-arm states are
/// primed from the cold-start logged data, then each round encodes the
/// context, selects by UCB and updates the chosen arm.
RunResult run_linucb(BanditEnvironment& env, const LinUCBConfig& config);

}  // namespace rb2
