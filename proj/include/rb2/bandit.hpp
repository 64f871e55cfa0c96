#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "rb2/boosting.hpp"
#include "rb2/data.hpp"
#include "rb2/sampling.hpp"

namespace rb2 {

enum class Exploration : uint8_t { kSoftmax, kEpsilonGreedy, kNone };
enum class SamplerKind : uint8_t { kInformed, kGreedy, kRandom };

struct PolicyConfig {
  double tau = 0.1;        // softmax temperature
  double epsilon = 0.1;    // epsilon-greedy exploration rate
  Exploration exploration = Exploration::kSoftmax;
  int batch_length = 128;  // rounds per mini-batch, also the sample size
  int n_batches = 10;
  int trees_per_batch = 6;
  SamplerKind sampler = SamplerKind::kInformed;
  double eta = 1.0;
  uint64_t seed = 1;
  TreeParams tree_params;
  /// When set, the buffer keeps all past interactions instead of being
  /// cleared per batch, so prioritized sampling draws from full history.
  bool accumulate_buffer = false;

  void validate() const;
};

struct RoundRecord {
  long t = 0;  // 1-based global round index
  int batch = 0;
  long context_id = 0;
  int chosen_arm = 0;  // index into the arm set
  int reward = 0;
  long regret_cum = 0;
  double p_chosen = 0.0;
};

struct RunResult {
  BoostedModel model;
  std::vector<long> regret_series;  // cumulative, one entry per round
  std::vector<RoundRecord> rounds;
};

/// Invoked after every mini-batch update, e.g. for checkpointing.
using BatchCallback = std::function<void(int batch, const BoostedModel&)>;

/// Model reward probabilities for every arm given the round's context.
std::vector<double> arm_probabilities(const BoostedModel& model, const BanditEnvironment& env,
                                      size_t round_idx, const FactStore& store);

/// Samples an arm from the softmax over arm probabilities at temperature
/// tau, max-subtraction stable.
int select_softmax(std::span<const double> arm_probs, double tau, std::mt19937_64& rng);

/// Argmax with probability 1-epsilon (ties toward the lowest index), else
/// a uniformly random arm, which may coincide with the argmax.
int select_epsilon_greedy(std::span<const double> arm_probs, double epsilon,
                          std::mt19937_64& rng);

/// The full online loop: cold start on the logged data, then per batch T
/// rounds of observe / select / reward / buffer append / background
/// update, followed by sampling the buffer and a K-tree boosting update.
RunResult run_rb2(BanditEnvironment& env, const PolicyConfig& config,
                  const BatchCallback& on_batch = {});

/// Baseline: pure argmax selection with uniform-random batch sampling.
RunResult run_batch_no_exploration(BanditEnvironment& env, PolicyConfig config,
                                   const BatchCallback& on_batch = {});

void write_round_log_csv(std::ostream& out, std::span<const RoundRecord> rounds,
                         std::span<const std::string> metadata,
                         const std::vector<std::string>& arm_names);

}  // namespace rb2
