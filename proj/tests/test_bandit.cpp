#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "oracles.hpp"
#include "rb2/bandit.hpp"
#include "test_util.hpp"

using namespace rb2;

namespace {

// Handcrafted domain: movies as arms, goodmovie(m0) makes arm 0 the only
// correct label for every user.
Dataset oracle_dataset(int n_users) {
  Dataset ds;
  ds.name = "oracle";
  ds.schema = std::make_shared<Schema>();
  Schema& schema = *ds.schema;
  TypeId t_user = schema.add_type("user");
  TypeId t_movie = schema.add_type("movie");
  PredId p_target = schema.add_predicate("willclick", {t_user, t_movie});
  PredId p_good = schema.add_predicate("goodmovie", {t_movie});
  ds.target = p_target;
  ds.label_position = 1;
  ds.modes.decls.push_back({p_good, {ArgMode::kInput}, 1});

  std::vector<ConstId> movies;
  for (int m = 0; m < 3; ++m)
    movies.push_back(schema.add_constant("m" + std::to_string(m), t_movie));
  ds.facts = std::make_shared<FactStore>(ds.schema);
  ds.facts->add_fact({p_good, {movies[0]}});

  for (int u = 0; u < n_users; ++u) {
    ConstId user = schema.add_constant("u" + std::to_string(u), t_user);
    // every movie must appear as a label somewhere so all three are arms;
    // u0/u1 carry the side labels, everyone else only m0
    DatasetExample e;
    e.context = {user};
    e.labels = {movies[0]};
    if (u == 0) e.labels.push_back(movies[1]);
    if (u == 1) e.labels.push_back(movies[2]);
    std::sort(e.labels.begin(), e.labels.end());
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

PolicyConfig small_config() {
  PolicyConfig c;
  c.batch_length = 20;
  c.n_batches = 3;
  c.trees_per_batch = 4;
  c.tree_params.min_examples_leaf = 2;
  c.tau = 1e-6;
  return c;
}

}  // namespace

TEST_CASE("arm_probabilities matches per-arm predict_prob") {
  Dataset ds = oracle_dataset(30);
  EnvOptions opt;
  opt.holdout_fraction = 0.2;
  BanditEnvironment env = make_environment(ds, opt);

  BoostedModel fresh(ds.target, 0.0);
  std::vector<double> probs = arm_probabilities(fresh, env, 0, env.store());
  REQUIRE(probs.size() == 3);
  for (double p : probs) CHECK(p == doctest::Approx(0.5).epsilon(1e-12));

  BoostedModel skewed(ds.target, 1.3);
  probs = arm_probabilities(skewed, env, 2, env.store());
  for (size_t a = 0; a < probs.size(); ++a)
    CHECK(probs[a] == skewed.predict_prob(env.make_query(2, env.arms()[a]), env.store()));
}

TEST_CASE("select_softmax converges to its exact weights") {
  std::vector<double> probs{0.8, 0.2};
  auto weights = oracle::softmax_longdouble({0.8, 0.2});
  CHECK(weights[0] == doctest::Approx(0.645655).epsilon(2e-6));
  CHECK(weights[1] == doctest::Approx(0.354345).epsilon(2e-6));

  std::mt19937_64 rng(2024);
  const int draws = 100000;
  int first = 0;
  for (int i = 0; i < draws; ++i)
    if (select_softmax(probs, 1.0, rng) == 0) ++first;
  double freq = static_cast<double>(first) / draws;
  CHECK(freq == doctest::Approx(weights[0]).epsilon(0.01));

  // chi-square over four arms at tau = 0.5
  std::vector<double> four{0.9, 0.6, 0.3, 0.1};
  std::vector<double> logits;
  for (double p : four) logits.push_back(p / 0.5);
  auto w4 = oracle::softmax_longdouble(logits);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<size_t>(select_softmax(four, 0.5, rng))];
  double chi2 = 0;
  for (int a = 0; a < 4; ++a) {
    double expected = w4[static_cast<size_t>(a)] * draws;
    chi2 += (counts[static_cast<size_t>(a)] - expected) * (counts[static_cast<size_t>(a)] - expected) / expected;
  }
  CHECK(chi2 < 16.266);  // df=3 critical value at p=0.001
}

TEST_CASE("softmax temperature limits: greedy and uniform") {
  std::mt19937_64 rng(7);
  std::vector<double> probs{0.9, 0.1};
  const int draws = 10000;
  int zero = 0;
  for (int i = 0; i < draws; ++i)
    if (select_softmax(probs, 1e-6, rng) == 0) ++zero;
  CHECK(static_cast<double>(zero) / draws > 0.999);

  const int draws_hot = 100000;
  std::vector<double> three{0.9, 0.5, 0.1};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < draws_hot; ++i) ++counts[static_cast<size_t>(select_softmax(three, 1e6, rng))];
  for (int c : counts)
    CHECK(std::fabs(static_cast<double>(c) / draws_hot - 1.0 / 3.0) < 0.01);

  CHECK_THROWS_AS(select_softmax(probs, 0.0, rng), ConfigError);
}

TEST_CASE("softmax modal arm equals the argmax at any temperature") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> probs(4);
    for (double& p : probs) p = unit(rng);
    for (double tau : {1e-3, 0.1, 1.0, 50.0}) {
      std::vector<double> logits;
      for (double p : probs) logits.push_back(p / tau);
      auto w = oracle::softmax_longdouble(logits);
      int modal = 0;
      for (size_t i = 1; i < w.size(); ++i)
        if (w[i] > w[static_cast<size_t>(modal)]) modal = static_cast<int>(i);
      int greedy = 0;
      for (size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[static_cast<size_t>(greedy)]) greedy = static_cast<int>(i);
      CHECK(modal == greedy);
    }
  }
}

TEST_CASE("epsilon-greedy limit behaviors") {
  std::mt19937_64 rng(5);
  std::vector<double> probs{0.9, 0.1};

  for (int i = 0; i < 200; ++i) CHECK(select_epsilon_greedy(probs, 0.0, rng) == 0);

  const int draws = 100000;
  int zero = 0;
  for (int i = 0; i < draws; ++i)
    if (select_epsilon_greedy(probs, 1.0, rng) == 0) ++zero;
  CHECK(std::fabs(static_cast<double>(zero) / draws - 0.5) < 0.01);

  zero = 0;
  for (int i = 0; i < draws; ++i)
    if (select_epsilon_greedy(probs, 0.2, rng) == 0) ++zero;
  // 1 - eps + eps/2
  CHECK(std::fabs(static_cast<double>(zero) / draws - 0.9) < 0.01);

  // argmax ties break to the lowest index
  std::vector<double> tied{0.4, 0.4, 0.1};
  CHECK(select_epsilon_greedy(tied, 0.0, rng) == 0);
}

TEST_CASE("run_rb2 on the oracle domain accrues zero regret") {
  Dataset ds = oracle_dataset(80);
  EnvOptions opt;
  opt.holdout_fraction = 0.25;  // plenty of logged data to saturate the model
  opt.seed = 3;
  BanditEnvironment env = make_environment(ds, opt);

  PolicyConfig config = small_config();
  RunResult result = run_rb2(env, config);
  REQUIRE(!result.rounds.empty());
  CHECK(result.regret_series.back() == 0);
}

TEST_CASE("model bookkeeping: cold-start stages plus N*K stages") {
  Dataset ds = oracle_dataset(60);
  EnvOptions opt;
  opt.holdout_fraction = 0.2;
  BanditEnvironment env = make_environment(ds, opt);
  PolicyConfig config = small_config();
  RunResult result = run_rb2(env, config);
  CHECK(result.model.stages().size() ==
        static_cast<size_t>(config.trees_per_batch) * (1 + config.n_batches));
}

TEST_CASE("round log is bit-reproducible under a fixed seed") {
  Dataset ds = oracle_dataset(60);
  for (Exploration e : {Exploration::kSoftmax, Exploration::kEpsilonGreedy}) {
    EnvOptions opt;
    opt.holdout_fraction = 0.2;
    opt.seed = 11;
    PolicyConfig config = small_config();
    config.exploration = e;
    config.tau = 0.05;
    config.seed = 42;

    BanditEnvironment env1 = make_environment(ds, opt);
    BanditEnvironment env2 = make_environment(ds, opt);
    RunResult a = run_rb2(env1, config);
    RunResult b = run_rb2(env2, config);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (size_t i = 0; i < a.rounds.size(); ++i) {
      CHECK(a.rounds[i].chosen_arm == b.rounds[i].chosen_arm);
      CHECK(a.rounds[i].reward == b.rounds[i].reward);
      CHECK(a.rounds[i].p_chosen == b.rounds[i].p_chosen);
      CHECK(a.rounds[i].regret_cum == b.rounds[i].regret_cum);
      CHECK(a.rounds[i].context_id == b.rounds[i].context_id);
    }
  }
}

TEST_CASE("regret is nondecreasing with 0/1 increments") {
  Dataset ds = oracle_dataset(60);
  EnvOptions opt;
  opt.holdout_fraction = 0.2;
  BanditEnvironment env = make_environment(ds, opt);
  PolicyConfig config = small_config();
  config.exploration = Exploration::kSoftmax;
  config.tau = 1.0;  // plenty of exploration so regret actually moves
  RunResult result = run_rb2(env, config);
  long prev = 0;
  for (long r : result.regret_series) {
    CHECK(r >= prev);
    CHECK(r - prev <= 1);
    prev = r;
  }
  CHECK(result.regret_series.back() > 0);
}

TEST_CASE("recorded p_chosen replays against per-batch checkpoints") {
  Dataset ds = oracle_dataset(60);
  EnvOptions opt;
  opt.holdout_fraction = 0.2;
  opt.seed = 9;
  PolicyConfig config = small_config();
  config.exploration = Exploration::kSoftmax;
  config.tau = 0.2;

  std::map<int, BoostedModel> checkpoints;
  BanditEnvironment env = make_environment(ds, opt);
  RunResult result =
      run_rb2(env, config, [&](int batch, const BoostedModel& m) { checkpoints[batch] = m; });

  // the model in play during batch i is the cold start for i=1, else the
  // checkpoint written after batch i-1
  BanditEnvironment replay_env = make_environment(ds, opt);
  BoostedModel coldstart =
      cold_start(replay_env.logged(), replay_env.store(), config.trees_per_batch, config.eta,
                 config.tree_params, replay_env.modes());
  for (size_t pos = 0; pos < result.rounds.size(); ++pos) {
    const RoundRecord& r = result.rounds[pos];
    const BoostedModel& m = r.batch == 1 ? coldstart : checkpoints.at(r.batch - 1);
    ConstId arm = replay_env.arms()[static_cast<size_t>(r.chosen_arm)];
    double p = m.predict_prob(replay_env.make_query(pos, arm), replay_env.store());
    CHECK(r.p_chosen == p);
  }
}

TEST_CASE("no-exploration baseline is run_rb2 with argmax and random sampling") {
  Dataset ds = oracle_dataset(60);
  EnvOptions opt;
  opt.holdout_fraction = 0.2;
  PolicyConfig config = small_config();

  BanditEnvironment env1 = make_environment(ds, opt);
  RunResult base = run_batch_no_exploration(env1, config);

  PolicyConfig manual = config;
  manual.exploration = Exploration::kNone;
  manual.sampler = SamplerKind::kRandom;
  BanditEnvironment env2 = make_environment(ds, opt);
  RunResult same = run_rb2(env2, manual);

  REQUIRE(base.rounds.size() == same.rounds.size());
  for (size_t i = 0; i < base.rounds.size(); ++i) {
    CHECK(base.rounds[i].chosen_arm == same.rounds[i].chosen_arm);
    CHECK(base.rounds[i].p_chosen == same.rounds[i].p_chosen);
  }
  long prev = 0;
  for (long r : base.regret_series) {
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("environment exhaustion truncates the final batch") {
  Dataset ds = oracle_dataset(30);  // 30 examples, ~24 streamed
  EnvOptions opt;
  opt.holdout_fraction = 0.2;
  BanditEnvironment env = make_environment(ds, opt);
  PolicyConfig config = small_config();
  config.batch_length = 10;
  config.n_batches = 100;  // far more than available
  RunResult result = run_rb2(env, config);
  CHECK(result.rounds.size() == env.num_rounds());
}

TEST_CASE("config validation rejects bad parameters") {
  PolicyConfig c;
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PolicyConfig{};
  c.epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PolicyConfig{};
  c.batch_length = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
