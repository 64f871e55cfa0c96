#include "rb2/bandit.hpp"

#include <cstdio>
#include <ostream>

#include "rb2/numeric.hpp"

namespace rb2 {

void PolicyConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("epsilon must be in [0,1]");
  if (batch_length < 1 || n_batches < 1 || trees_per_batch < 1)
    throw ConfigError("batch length, batch count and trees per batch must be >= 1");
}

std::vector<double> arm_probabilities(const BoostedModel& model, const BanditEnvironment& env,
                                      size_t round_idx, const FactStore& store) {
  const std::vector<ConstId>& arms = env.arms();
  std::vector<double> probs(arms.size());
  for (size_t a = 0; a < arms.size(); ++a)
    probs[a] = model.predict_prob(env.make_query(round_idx, arms[a]), store);
  return probs;
}

int select_softmax(std::span<const double> arm_probs, double tau, std::mt19937_64& rng) {
  if (!(tau > 0.0)) throw ConfigError("softmax temperature must be > 0");
  std::vector<double> logits(arm_probs.size());
  for (size_t i = 0; i < arm_probs.size(); ++i) logits[i] = arm_probs[i] / tau;
  std::vector<double> weights = stable_softmax(logits);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng), acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

int select_epsilon_greedy(std::span<const double> arm_probs, double epsilon,
                          std::mt19937_64& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("epsilon must be in [0,1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (epsilon > 0.0 && unit(rng) < epsilon) {
    std::uniform_int_distribution<size_t> pick(0, arm_probs.size() - 1);
    return static_cast<int>(pick(rng));
  }
  return argmax_index(arm_probs);
}

namespace {

int select_arm(std::span<const double> arm_probs, const PolicyConfig& config,
               std::mt19937_64& rng) {
  switch (config.exploration) {
    case Exploration::kSoftmax: return select_softmax(arm_probs, config.tau, rng);
    case Exploration::kEpsilonGreedy:
      return select_epsilon_greedy(arm_probs, config.epsilon, rng);
    case Exploration::kNone: return argmax_index(arm_probs);
  }
  return 0;
}

std::vector<BufferEntry> sample_buffer(std::span<const BufferEntry> buffer,
                                       const PolicyConfig& config, std::mt19937_64& rng) {
  switch (config.sampler) {
    case SamplerKind::kInformed: return informed_sample(buffer, config.batch_length, rng);
    case SamplerKind::kGreedy: return greedy_sample(buffer, config.batch_length);
    case SamplerKind::kRandom: return random_sample(buffer, config.batch_length, rng);
  }
  return {};
}

}  // namespace

RunResult run_rb2(BanditEnvironment& env, const PolicyConfig& config,
                  const BatchCallback& on_batch) {
  config.validate();
  if (env.logged().empty()) throw ConfigError("run_rb2: environment has no cold-start data");

  std::mt19937_64 rng(config.seed);
  RunResult result;
  result.model = cold_start(env.logged(), env.store(), config.trees_per_batch, config.eta,
                            config.tree_params, env.modes());

  size_t total = env.num_rounds();
  size_t wanted = static_cast<size_t>(config.n_batches) *
                  static_cast<size_t>(config.batch_length);
  if (total < wanted)
    std::fprintf(stderr,
                 "warning: environment has %zu rounds, %zu requested; final batch truncated\n",
                 total, wanted);

  std::vector<BufferEntry> buffer;
  long regret = 0;
  long t = 0;  // global round counter
  size_t pos = 0;
  for (int batch = 1; batch <= config.n_batches && pos < total; ++batch) {
    if (!config.accumulate_buffer) buffer.clear();
    for (int step = 0; step < config.batch_length && pos < total; ++step, ++pos) {
      ++t;
      std::vector<double> probs = arm_probabilities(result.model, env, pos, env.store());
      int a = select_arm(probs, config, rng);
      ConstId arm = env.arms()[a];
      int r = env.reward(pos, arm);
      regret += 1 - r;  // the optimal arm always pays 1
      buffer.push_back({env.make_query(pos, arm), a, r, probs[a]});
      env.apply_deltas_up_to(t);

      result.rounds.push_back({t, batch, env.context_id(pos), a, r, regret, probs[a]});
      result.regret_series.push_back(regret);
    }
    std::vector<BufferEntry> sampled = sample_buffer(buffer, config, rng);
    if (!sampled.empty()) {
      std::vector<LabeledQuery> training;
      training.reserve(sampled.size());
      for (const BufferEntry& e : sampled) training.push_back({e.query, e.reward});
      result.model = fit_stage(std::move(result.model), training, env.store(),
                               config.trees_per_batch, config.eta, config.tree_params,
                               env.modes());
    }
    if (on_batch) on_batch(batch, result.model);
  }
  return result;
}

RunResult run_batch_no_exploration(BanditEnvironment& env, PolicyConfig config,
                                   const BatchCallback& on_batch) {
  config.exploration = Exploration::kNone;
  config.sampler = SamplerKind::kRandom;
  return run_rb2(env, config, on_batch);
}

void write_round_log_csv(std::ostream& out, std::span<const RoundRecord> rounds,
                         std::span<const std::string> metadata,
                         const std::vector<std::string>& arm_names) {
  for (const std::string& m : metadata) out << "# " << m << '\n';
  out << "t,batch,context_id,chosen_arm,reward,regret_cum,p_chosen\n";
  char buf[40];
  for (const RoundRecord& r : rounds) {
    std::snprintf(buf, sizeof buf, "%.17g", r.p_chosen);
    out << r.t << ',' << r.batch << ',' << r.context_id << ','
        << arm_names.at(static_cast<size_t>(r.chosen_arm)) << ',' << r.reward << ','
        << r.regret_cum << ',' << buf << '\n';
  }
}

}  // namespace rb2
