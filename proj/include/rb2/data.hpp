#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rb2/boosting.hpp"
#include "rb2/tilde.hpp"

namespace rb2 {

struct DatasetExample {
  std::vector<ConstId> context;  // target arguments except the label position
  std::vector<ConstId> labels;   // the true-label set, sorted unique
};

/// A relational classification dataset recast as a bandit problem: facts
/// form the background knowledge, examples pair a context tuple with its
/// set of correct labels.
struct Dataset {
  std::shared_ptr<Schema> schema;
  std::shared_ptr<FactStore> facts;
  ModeSet modes;
  PredId target = -1;
  int label_position = -1;  // argument position of the target carrying the label
  std::vector<DatasetExample> examples;
  std::string name;

  /// Sorted unique constants observed in any example's label set.
  std::vector<ConstId> arm_universe() const;
  GroundAtom make_query(const std::vector<ConstId>& context, ConstId arm) const;
};

/// Parses `pred(c1,c2).` lines; '%' starts a comment; constants are
/// lowered. Reports malformed lines with their line number.
std::vector<GroundAtom> parse_fact_file(std::istream& in, Schema& schema,
                                        const std::string& filename);

Dataset load_dataset(const std::filesystem::path& facts_path,
                     const std::filesystem::path& examples_path,
                     const std::filesystem::path& modes_path);
/// Directory convention: facts.pl, examples.pl, modes.txt.
Dataset load_dataset_dir(const std::filesystem::path& dir);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct FactDelta {
  long t = 0;  // global round index at which the facts appear
  std::vector<GroundAtom> facts;
};
std::vector<FactDelta> parse_delta_schedule(std::istream& in, Schema& schema);

/// Replay of a dataset as a context stream: a seeded shuffle fixes the
/// round order, a front slice becomes the cold-start logged data, and the
/// hidden label sets answer reward queries. The optimal reward is 1 on
/// every round.
class BanditEnvironment {
 public:
  size_t num_rounds() const { return rounds_.size(); }
  /// Dataset example index behind stream position i, for the round log.
  long context_id(size_t i) const { return rounds_.at(i); }
  const DatasetExample& context(size_t i) const { return examples_[rounds_.at(i)]; }
  int reward(size_t round_idx, ConstId arm) const;
  const std::vector<ConstId>& arms() const { return arms_; }
  GroundAtom make_query(size_t round_idx, ConstId arm) const;

  const std::vector<LabeledQuery>& logged() const { return logged_; }
  FactStore& store() { return *store_; }
  const FactStore& store() const { return *store_; }
  const Schema& schema() const { return store_->schema(); }
  const ModeSet& modes() const { return modes_; }
  PredId target() const { return target_; }
  int label_position() const { return label_position_; }

  /// Applies all scheduled fact deltas with delta.t <= t (background
  /// knowledge updates). No-op when nothing is scheduled.
  void apply_deltas_up_to(long t);

 private:
  friend BanditEnvironment make_environment(const Dataset&, const struct EnvOptions&);
  std::shared_ptr<FactStore> store_;  // private copy when deltas are scheduled
  ModeSet modes_;
  PredId target_ = -1;
  int label_position_ = -1;
  std::vector<DatasetExample> examples_;
  std::vector<long> rounds_;  // shuffled example indices, logged slice removed
  std::vector<ConstId> arms_;
  std::vector<LabeledQuery> logged_;
  std::vector<FactDelta> deltas_;
  size_t next_delta_ = 0;
};

struct EnvOptions {
  uint64_t seed = 1;
  double holdout_fraction = 0.05;
  std::optional<std::filesystem::path> delta_schedule;
  /// Deceptive cold start: the logged random policy never picks the
  /// globally most-frequent correct arm.
  bool deceptive_coldstart = false;
};

BanditEnvironment make_environment(const Dataset& dataset, const EnvOptions& options);

struct SyntheticParams {
  int n_users = 1000;
  int n_movies = 120;
  int n_arms = 8;
  long target_facts = 20000;
  double noise = 0.0;
  uint64_t seed = 7;
};

struct SyntheticDataset {
  Dataset dataset;
  std::string rule;  // the generating rule, for oracle tests
};

/// Movie-recommendation style domain. The true label set follows the
/// conjunctive rule
///   willclick(U,M) iff goodmovie(M), friends(U,V), liked(V,M)
/// over the generated facts, with optional label-flip noise on the
/// promoted arm movies.
SyntheticDataset generate_synthetic(const SyntheticParams& params);

/// Propositional control domain: reward for arm k is exactly one binary
/// attribute per user, so a linear model over the fact encoding realizes
/// the reward.
SyntheticDataset generate_linear_control(int n_users, int n_arms, uint64_t seed);

}  // namespace rb2
