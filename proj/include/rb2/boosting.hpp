#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "rb2/tilde.hpp"

namespace rb2 {

struct BoostStage {
  RelationalTree tree;
  double eta = 1.0;
};

struct GradientPoint {
  GroundAtom query;
  int indicator = 0;  // 1 when this action/label was the observed positive
  double p = 0.0;     // model probability at computation time
  double gradient = 0.0;  // indicator - p
};

struct LabeledQuery {
  GroundAtom query;
  int indicator = 0;
};

/// The potential function: psi0 plus an ordered sum of eta-scaled tree
/// outputs. Stages are append-only; summation is a fixed left fold.
class BoostedModel {
 public:
  BoostedModel() = default;
  BoostedModel(PredId target, double psi0) : target_(target), psi0_(psi0) {}

  PredId target() const { return target_; }
  double psi0() const { return psi0_; }
  const std::vector<BoostStage>& stages() const { return stages_; }
  void append_stage(RelationalTree tree, double eta) {
    stages_.push_back({std::move(tree), eta});
  }

  double predict_psi(const GroundAtom& query, const FactStore& store) const;
  /// Sigmoid of the potential, clamped strictly inside (0,1).
  double predict_prob(const GroundAtom& query, const FactStore& store) const;

 private:
  PredId target_ = -1;
  double psi0_ = 0.0;
  std::vector<BoostStage> stages_;
};

std::vector<GradientPoint> compute_gradients(const BoostedModel& model,
                                             std::span<const LabeledQuery> batch,
                                             const FactStore& store);

/// Negative log-likelihood of the batch under the model (natural log).
double batch_nll(const BoostedModel& model, std::span<const LabeledQuery> batch,
                 const FactStore& store);

struct FitStats {
  // nll[0] is before the first added tree, nll[k] after the k-th
  std::vector<double> nll;
};

/// Runs `k_trees` boosting iterations on the batch: recompute point-wise
/// gradients under the current model, fit a tree to them, append it with
/// step size eta. Training NLL on the batch is checked non-increasing
/// (tolerance 1e-9).
BoostedModel fit_stage(BoostedModel model, std::span<const LabeledQuery> batch,
                       const FactStore& store, int k_trees, double eta,
                       const TreeParams& params, const ModeSet& modes,
                       FitStats* stats = nullptr);

/// Fresh model: psi0 = clamped log-odds of the positive rate in the logged
/// data, then one fit_stage over the full logged set.
BoostedModel cold_start(std::span<const LabeledQuery> logged, const FactStore& store,
                        int k_trees, double eta, const TreeParams& params, const ModeSet& modes,
                        FitStats* stats = nullptr);

/// Versioned text serialization; round-trips losslessly. Human-readable
/// if-then renderings are embedded as comment lines.
void write_model(const BoostedModel& model, const Schema& schema, std::ostream& out);
BoostedModel read_model(std::istream& in, Schema& schema);

}  // namespace rb2
