#include "rb2/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace rb2 {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Parses `pred(c1,...,ck)` (no trailing dot) into a ground atom, interning
// constants with the types declared for the predicate's positions.
GroundAtom parse_ground(const std::string& text, Schema& schema, const std::string& where) {
  size_t open = text.find('(');
  size_t close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw ParseError(where + ": expected pred(args)");
  std::string pname = lower(trim(text.substr(0, open)));
  auto pid = schema.find_predicate(pname);
  if (!pid) throw SchemaError(where + ": unknown predicate '" + pname + "'");
  const PredicateSignature& sig = schema.pred(*pid);
  GroundAtom g;
  g.pred = *pid;
  std::istringstream as(text.substr(open + 1, close - open - 1));
  std::string tok;
  while (std::getline(as, tok, ',')) {
    tok = lower(trim(tok));
    if (tok.empty()) throw ParseError(where + ": empty argument");
    size_t pos = g.args.size();
    if (pos >= sig.arg_types.size())
      throw ValidationError(where + ": too many arguments for '" + pname + "'");
    g.args.push_back(schema.add_constant(tok, sig.arg_types[pos]));
  }
  if (static_cast<int>(g.args.size()) != sig.arity())
    throw ValidationError(where + ": arity mismatch for '" + pname + "' (got " +
                          std::to_string(g.args.size()) + ", declared " +
                          std::to_string(sig.arity()) + ")");
  return g;
}

// Strips '%' comment and surrounding space; returns empty for blank lines.
std::string content_of(const std::string& raw) {
  std::string line = raw;
  size_t cmt = line.find('%');
  if (cmt != std::string::npos) line = line.substr(0, cmt);
  return trim(line);
}

std::ifstream open_or_throw(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  return in;
}

}  // namespace

std::vector<GroundAtom> parse_fact_file(std::istream& in, Schema& schema,
                                        const std::string& filename) {
  std::vector<GroundAtom> out;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = content_of(raw);
    if (line.empty()) continue;
    std::string where = filename + ":" + std::to_string(lineno);
    if (line.back() != '.') throw ParseError(where + ": missing trailing '.'");
    line.pop_back();
    out.push_back(parse_ground(trim(line), schema, where));
  }
  return out;
}

std::vector<ConstId> Dataset::arm_universe() const {
  std::vector<ConstId> arms;
  for (const DatasetExample& e : examples)
    arms.insert(arms.end(), e.labels.begin(), e.labels.end());
  std::sort(arms.begin(), arms.end());
  arms.erase(std::unique(arms.begin(), arms.end()), arms.end());
  return arms;
}

GroundAtom Dataset::make_query(const std::vector<ConstId>& context, ConstId arm) const {
  GroundAtom q;
  q.pred = target;
  const PredicateSignature& sig = schema->pred(target);
  size_t ci = 0;
  for (int pos = 0; pos < sig.arity(); ++pos) {
    if (pos == label_position)
      q.args.push_back(arm);
    else
      q.args.push_back(context.at(ci++));
  }
  return q;
}

Dataset load_dataset(const fs::path& facts_path, const fs::path& examples_path,
                     const fs::path& modes_path) {
  Dataset ds;
  ds.schema = std::make_shared<Schema>();

  auto modes_in = open_or_throw(modes_path);
  ParsedModes pm = parse_modes_file(modes_in, *ds.schema);
  ds.modes = std::move(pm.modes);
  ds.target = pm.target;
  ds.label_position = ds.schema->pred(ds.target).arity() - 1;  // label is the last argument

  auto facts_in = open_or_throw(facts_path);
  std::vector<GroundAtom> facts = parse_fact_file(facts_in, *ds.schema, facts_path.string());
  ds.facts = std::make_shared<FactStore>(ds.schema);
  ds.facts->add_facts(facts);

  auto ex_in = open_or_throw(examples_path);
  std::vector<GroundAtom> example_atoms =
      parse_fact_file(ex_in, *ds.schema, examples_path.string());
  // group example atoms by context tuple, keeping first-appearance order
  std::map<std::vector<ConstId>, size_t> index_of;
  int dropped = 0;
  for (const GroundAtom& g : example_atoms) {
    if (g.pred != ds.target) {
      ++dropped;
      std::fprintf(stderr, "warning: %s: example with non-target predicate dropped\n",
                   examples_path.string().c_str());
      continue;
    }
    std::vector<ConstId> context;
    ConstId label = -1;
    for (int pos = 0; pos < static_cast<int>(g.args.size()); ++pos) {
      if (pos == ds.label_position)
        label = g.args[pos];
      else
        context.push_back(g.args[pos]);
    }
    auto it = index_of.find(context);
    if (it == index_of.end()) {
      index_of.emplace(context, ds.examples.size());
      ds.examples.push_back({context, {label}});
    } else {
      ds.examples[it->second].labels.push_back(label);
    }
  }
  for (DatasetExample& e : ds.examples) {
    std::sort(e.labels.begin(), e.labels.end());
    e.labels.erase(std::unique(e.labels.begin(), e.labels.end()), e.labels.end());
  }
  if (ds.examples.empty()) throw ConfigError(examples_path.string() + ": no examples");
  ds.name = facts_path.parent_path().filename().string();
  return ds;
}

Dataset load_dataset_dir(const fs::path& dir) {
  return load_dataset(dir / "facts.pl", dir / "examples.pl", dir / "modes.txt");
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "modes.txt");
    write_modes_file(out, dataset.modes, dataset.target, *dataset.schema);
  }
  {
    std::ofstream out(dir / "facts.pl");
    for (PredId p = 0; p < dataset.schema->num_predicates(); ++p)
      for (const GroundAtom& g : dataset.facts->facts(p))
        out << to_string(g, *dataset.schema) << ".\n";
  }
  {
    std::ofstream out(dir / "examples.pl");
    for (const DatasetExample& e : dataset.examples) {
      // label order by name, stable across re-interning
      std::vector<ConstId> labels = e.labels;
      std::sort(labels.begin(), labels.end(), [&](ConstId a, ConstId b) {
        return dataset.schema->constant_name(a) < dataset.schema->constant_name(b);
      });
      for (ConstId label : labels)
        out << to_string(dataset.make_query(e.context, label), *dataset.schema) << ".\n";
    }
  }
}

std::vector<FactDelta> parse_delta_schedule(std::istream& in, Schema& schema) {
  std::vector<FactDelta> out;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = content_of(raw);
    if (line.empty()) continue;
    std::string where = "schedule:" + std::to_string(lineno);
    size_t colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(where + ": expected 't: add fact.'");
    long t = 0;
    try {
      t = std::stol(trim(line.substr(0, colon)));
    } catch (const std::exception&) {
      throw ParseError(where + ": bad timestep");
    }
    std::string rest = trim(line.substr(colon + 1));
    if (rest.rfind("add ", 0) != 0) throw ParseError(where + ": expected 'add'");
    rest = trim(rest.substr(4));
    if (rest.empty() || rest.back() != '.') throw ParseError(where + ": missing trailing '.'");
    rest.pop_back();
    GroundAtom g = parse_ground(trim(rest), schema, where);
    if (!out.empty() && out.back().t == t)
      out.back().facts.push_back(std::move(g));
    else
      out.push_back({t, {std::move(g)}});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FactDelta& a, const FactDelta& b) { return a.t < b.t; });
  return out;
}

int BanditEnvironment::reward(size_t round_idx, ConstId arm) const {
  const DatasetExample& e = examples_[rounds_.at(round_idx)];
  return std::binary_search(e.labels.begin(), e.labels.end(), arm) ? 1 : 0;
}

GroundAtom BanditEnvironment::make_query(size_t round_idx, ConstId arm) const {
  const DatasetExample& e = examples_[rounds_.at(round_idx)];
  GroundAtom q;
  q.pred = target_;
  const PredicateSignature& sig = store_->schema().pred(target_);
  size_t ci = 0;
  for (int pos = 0; pos < sig.arity(); ++pos) {
    if (pos == label_position_)
      q.args.push_back(arm);
    else
      q.args.push_back(e.context.at(ci++));
  }
  return q;
}

void BanditEnvironment::apply_deltas_up_to(long t) {
  while (next_delta_ < deltas_.size() && deltas_[next_delta_].t <= t) {
    store_->add_facts(deltas_[next_delta_].facts);
    ++next_delta_;
  }
}

BanditEnvironment make_environment(const Dataset& dataset, const EnvOptions& options) {
  if (!(options.holdout_fraction > 0.0 && options.holdout_fraction < 1.0))
    throw ConfigError("holdout fraction must be inside (0,1)");
  BanditEnvironment env;
  env.target_ = dataset.target;
  env.label_position_ = dataset.label_position;
  env.modes_ = dataset.modes;
  env.examples_ = dataset.examples;
  env.arms_ = dataset.arm_universe();
  if (env.arms_.empty()) throw ConfigError("dataset has no labels, so no arms");

  std::mt19937_64 rng(options.seed);
  std::vector<long> order(dataset.examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<long>(i);
  std::shuffle(order.begin(), order.end(), rng);

  size_t n_logged = static_cast<size_t>(options.holdout_fraction *
                                        static_cast<double>(order.size()));
  n_logged = std::max<size_t>(1, std::min(n_logged, order.size() - 1));

  // arms the logged random policy may choose
  std::vector<ConstId> logged_arms = env.arms_;
  if (options.deceptive_coldstart && env.arms_.size() > 1) {
    std::map<ConstId, size_t> freq;
    for (const DatasetExample& e : dataset.examples)
      for (ConstId label : e.labels) ++freq[label];
    ConstId top = freq.begin()->first;
    size_t best = 0;
    for (const auto& [arm, n] : freq)
      if (n > best) {
        best = n;
        top = arm;
      }
    std::erase(logged_arms, top);
  }

  std::uniform_int_distribution<size_t> pick_arm(0, logged_arms.size() - 1);
  for (size_t i = 0; i < n_logged; ++i) {
    const DatasetExample& e = dataset.examples[order[i]];
    ConstId arm = logged_arms[pick_arm(rng)];
    int r = std::binary_search(e.labels.begin(), e.labels.end(), arm) ? 1 : 0;
    env.logged_.push_back({dataset.make_query(e.context, arm), r});
  }
  env.rounds_.assign(order.begin() + static_cast<ptrdiff_t>(n_logged), order.end());

  if (options.delta_schedule) {
    auto in = open_or_throw(*options.delta_schedule);
    // deltas mutate the background store, so the environment owns a copy
    env.store_ = std::make_shared<FactStore>(*dataset.facts);
    env.deltas_ = parse_delta_schedule(in, *dataset.schema);
  } else {
    env.store_ = dataset.facts;
  }
  return env;
}

namespace {

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticParams& params) {
  if (params.n_users < 4 || params.n_movies < params.n_arms || params.n_arms < 2)
    throw ConfigError("generate_synthetic: bad sizes");
  if (!(params.noise >= 0.0 && params.noise < 0.5))
    throw ConfigError("generate_synthetic: noise must be in [0, 0.5)");

  SyntheticDataset out;
  Dataset& ds = out.dataset;
  ds.name = "synthetic-movies";
  ds.schema = std::make_shared<Schema>();
  Schema& schema = *ds.schema;

  TypeId t_user = schema.add_type("user");
  TypeId t_movie = schema.add_type("movie");
  TypeId t_genre = schema.add_type("genre");
  PredId p_target = schema.add_predicate("willclick", {t_user, t_movie});
  PredId p_friends = schema.add_predicate("friends", {t_user, t_user});
  PredId p_liked = schema.add_predicate("liked", {t_user, t_movie});
  PredId p_good = schema.add_predicate("goodmovie", {t_movie});
  PredId p_genre = schema.add_predicate("genre", {t_movie, t_genre});

  ds.target = p_target;
  ds.label_position = 1;
  ds.modes.decls.push_back({p_friends, {ArgMode::kInput, ArgMode::kOutput}, 1});
  ds.modes.decls.push_back({p_liked, {ArgMode::kInput, ArgMode::kInput}, 1});
  ds.modes.decls.push_back({p_good, {ArgMode::kInput}, 1});
  ds.modes.decls.push_back({p_genre, {ArgMode::kInput, ArgMode::kConstant}, 1});
  out.rule = "willclick(U,M) :- goodmovie(M), friends(U,V), liked(V,M).";

  std::vector<ConstId> users(params.n_users), movies(params.n_movies);
  for (int i = 0; i < params.n_users; ++i)
    users[i] = schema.add_constant("u" + zero_pad(i, 5), t_user);
  for (int i = 0; i < params.n_movies; ++i)
    movies[i] = schema.add_constant("m" + zero_pad(i, 4), t_movie);
  std::vector<ConstId> genres;
  for (int i = 0; i < 5; ++i) genres.push_back(schema.add_constant("g" + std::to_string(i), t_genre));

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // promoted arm movies are the first n_arms movies, all good; the first
  // is liked far more widely than the rest
  std::vector<char> good(params.n_movies, 0);
  for (int m = 0; m < params.n_arms; ++m) good[m] = 1;
  for (int m = params.n_arms; m < params.n_movies; ++m) good[m] = unit(rng) < 0.25;
  std::vector<double> popularity(params.n_arms);
  for (int m = 0; m < params.n_arms; ++m)
    popularity[m] = m == 0 ? 0.30 : 0.14 / (1.0 + 0.5 * (m - 1));

  std::set<std::pair<int, int>> friend_edges, liked_edges;
  std::uniform_int_distribution<int> any_user(0, params.n_users - 1);
  std::uniform_int_distribution<int> any_movie(0, params.n_movies - 1);
  std::uniform_int_distribution<int> n_friends(1, 3);
  std::uniform_int_distribution<int> n_likes(2, 5);

  for (int u = 0; u < params.n_users; ++u) {
    int want = n_friends(rng);
    for (int j = 0; j < want; ++j) {
      int v = any_user(rng);
      if (v != u) friend_edges.insert({u, v});
    }
    for (int m = 0; m < params.n_arms; ++m)
      if (unit(rng) < popularity[m]) liked_edges.insert({u, m});
    int likes = n_likes(rng);
    for (int j = 0; j < likes; ++j) liked_edges.insert({u, any_movie(rng)});
  }

  auto fact_count = [&]() {
    return friend_edges.size() + liked_edges.size() +
           static_cast<size_t>(std::count(good.begin(), good.end(), 1)) +
           static_cast<size_t>(params.n_movies);  // one genre fact per movie
  };
  // pad with random relations until the requested fact volume is reached
  long guard = 0;
  while (static_cast<long>(fact_count()) < params.target_facts && guard < 100 * params.target_facts) {
    ++guard;
    if (guard % 3 == 0) {
      int u = any_user(rng), v = any_user(rng);
      if (u != v) friend_edges.insert({u, v});
    } else {
      liked_edges.insert({any_user(rng), any_movie(rng)});
    }
  }

  std::vector<GroundAtom> facts;
  for (const auto& [u, v] : friend_edges) facts.push_back({p_friends, {users[u], users[v]}});
  for (const auto& [u, m] : liked_edges) facts.push_back({p_liked, {users[u], movies[m]}});
  for (int m = 0; m < params.n_movies; ++m)
    if (good[m]) facts.push_back({p_good, {movies[m]}});
  for (int m = 0; m < params.n_movies; ++m) {
    // deterministic genre from index, not rng, to keep padding independent
    facts.push_back({p_genre, {movies[m], genres[m % 5]}});
  }
  ds.facts = std::make_shared<FactStore>(ds.schema);
  ds.facts->add_facts(facts);

  // label sets from the generating rule over the final fact set
  std::vector<std::vector<int>> out_friends(params.n_users);
  for (const auto& [u, v] : friend_edges) out_friends[u].push_back(v);
  std::vector<std::vector<char>> liked_by(params.n_arms,
                                          std::vector<char>(params.n_users, 0));
  for (const auto& [u, m] : liked_edges)
    if (m < params.n_arms) liked_by[m][u] = 1;

  for (int u = 0; u < params.n_users; ++u) {
    DatasetExample ex;
    ex.context = {users[u]};
    for (int m = 0; m < params.n_arms; ++m) {
      bool label = false;
      if (good[m]) {
        for (int v : out_friends[u])
          if (liked_by[m][v]) {
            label = true;
            break;
          }
      }
      if (params.noise > 0.0 && unit(rng) < params.noise) label = !label;
      if (label) ex.labels.push_back(movies[m]);
    }
    if (!ex.labels.empty()) {
      std::sort(ex.labels.begin(), ex.labels.end());
      ds.examples.push_back(std::move(ex));
    }
  }
  if (ds.examples.empty()) throw ConfigError("generate_synthetic: no example got a label");
  return out;
}

SyntheticDataset generate_linear_control(int n_users, int n_arms, uint64_t seed) {
  if (n_users < 4 || n_arms < 2) throw ConfigError("generate_linear_control: bad sizes");
  SyntheticDataset out;
  Dataset& ds = out.dataset;
  ds.name = "linear-control";
  ds.schema = std::make_shared<Schema>();
  Schema& schema = *ds.schema;

  TypeId t_user = schema.add_type("user");
  TypeId t_offer = schema.add_type("offer");
  TypeId t_tag = schema.add_type("tag");
  PredId p_target = schema.add_predicate("clicks", {t_user, t_offer});
  PredId p_trait = schema.add_predicate("trait", {t_user, t_tag});
  ds.target = p_target;
  ds.label_position = 1;
  ds.modes.decls.push_back({p_trait, {ArgMode::kInput, ArgMode::kConstant}, 2});
  out.rule = "clicks(U,o_k) :- trait(U,t_k).";

  std::vector<ConstId> users(n_users);
  for (int i = 0; i < n_users; ++i)
    users[i] = schema.add_constant("u" + zero_pad(i, 5), t_user);
  std::vector<ConstId> offers(n_arms), tags(n_arms);
  for (int k = 0; k < n_arms; ++k) {
    offers[k] = schema.add_constant("o" + std::to_string(k), t_offer);
    tags[k] = schema.add_constant("t" + std::to_string(k), t_tag);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GroundAtom> facts;
  for (int u = 0; u < n_users; ++u) {
    DatasetExample ex;
    ex.context = {users[u]};
    for (int k = 0; k < n_arms; ++k) {
      if (unit(rng) < 0.25) {
        facts.push_back({p_trait, {users[u], tags[k]}});
        ex.labels.push_back(offers[k]);
      }
    }
    if (!ex.labels.empty()) {
      std::sort(ex.labels.begin(), ex.labels.end());
      ds.examples.push_back(std::move(ex));
    }
  }
  ds.facts = std::make_shared<FactStore>(ds.schema);
  ds.facts->add_facts(facts);
  if (ds.examples.empty()) throw ConfigError("generate_linear_control: no example got a label");
  return out;
}

}  // namespace rb2
