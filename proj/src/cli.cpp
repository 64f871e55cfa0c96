#include "rb2/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rb2/distill.hpp"
#include "rb2/linucb.hpp"

namespace rb2 {

namespace fs = std::filesystem;

namespace {

struct AlgoSpec {
  bool is_linucb = false;
  Exploration exploration = Exploration::kSoftmax;
  SamplerKind sampler = SamplerKind::kInformed;
};

std::optional<AlgoSpec> resolve_algo(const std::string& name) {
  if (name == "rb2-informed") return AlgoSpec{false, Exploration::kSoftmax, SamplerKind::kInformed};
  if (name == "rb2-greedy") return AlgoSpec{false, Exploration::kSoftmax, SamplerKind::kGreedy};
  if (name == "epsilon-greedy")
    return AlgoSpec{false, Exploration::kEpsilonGreedy, SamplerKind::kRandom};
  if (name == "batch-noexplore") return AlgoSpec{false, Exploration::kNone, SamplerKind::kRandom};
  if (name == "linucb") return AlgoSpec{true, Exploration::kNone, SamplerKind::kRandom};
  return std::nullopt;
}

std::optional<SamplerKind> resolve_sampler(const std::string& name) {
  if (name == "informed") return SamplerKind::kInformed;
  if (name == "greedy") return SamplerKind::kGreedy;
  if (name == "random") return SamplerKind::kRandom;
  return std::nullopt;
}

const char* sampler_name(SamplerKind s) {
  switch (s) {
    case SamplerKind::kInformed: return "informed";
    case SamplerKind::kGreedy: return "greedy";
    case SamplerKind::kRandom: return "random";
  }
  return "?";
}

const char* exploration_name(Exploration e) {
  switch (e) {
    case Exploration::kSoftmax: return "softmax";
    case Exploration::kEpsilonGreedy: return "epsilon-greedy";
    case Exploration::kNone: return "none";
  }
  return "?";
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> run_metadata(const RunOptions& o, uint64_t seed) {
  std::vector<std::string> m;
  m.push_back(std::string("version=") + kVersion);
  m.push_back("dataset=" + o.dataset_dir);
  m.push_back("algo=" + o.algo);
  m.push_back("seed=" + std::to_string(seed));
  m.push_back("batch_size=" + std::to_string(o.policy.batch_length));
  m.push_back("batches=" + std::to_string(o.policy.n_batches));
  m.push_back("trees_per_batch=" + std::to_string(o.policy.trees_per_batch));
  m.push_back("tau=" + format_g(o.policy.tau));
  m.push_back("epsilon=" + format_g(o.policy.epsilon));
  m.push_back("eta=" + format_g(o.policy.eta));
  m.push_back(std::string("exploration=") + exploration_name(o.policy.exploration));
  m.push_back(std::string("sampler=") + sampler_name(o.policy.sampler));
  m.push_back("alpha=" + format_g(o.alpha));
  m.push_back("linucb_dim=" + std::to_string(o.linucb_dim));
  m.push_back("coldstart_frac=" + format_g(o.coldstart_frac));
  m.push_back(std::string("deceptive_coldstart=") + (o.deceptive_coldstart ? "1" : "0"));
  m.push_back(std::string("accumulate_buffer=") + (o.policy.accumulate_buffer ? "1" : "0"));
  m.push_back("max_depth=" + std::to_string(o.policy.tree_params.max_depth));
  m.push_back("min_examples_leaf=" + std::to_string(o.policy.tree_params.min_examples_leaf));
  m.push_back("max_literals_per_test=" +
              std::to_string(o.policy.tree_params.max_literals_per_test));
  m.push_back("candidate_constants=" +
              std::to_string(o.policy.tree_params.candidate_constants_per_position));
  if (o.delta_schedule) m.push_back("delta_schedule=" + *o.delta_schedule);
  return m;
}

}  // namespace

int cmd_run(const RunOptions& options) {
  auto algo = resolve_algo(options.algo);
  if (!algo) {
    std::cerr << "unknown algorithm '" << options.algo
              << "'; expected one of rb2-informed, rb2-greedy, epsilon-greedy, "
                 "batch-noexplore, linucb\n";
    return 2;
  }
  try {
    Dataset dataset = load_dataset_dir(options.dataset_dir);
    fs::create_directories(options.out_dir);

    std::vector<std::string> arm_names;
    for (ConstId arm : dataset.arm_universe())
      arm_names.push_back(dataset.schema->constant_name(arm));

    std::vector<long> finals;
    for (uint64_t seed : options.seeds) {
      RunOptions o = options;
      o.policy.seed = seed;
      o.policy.exploration = algo->exploration;
      o.policy.sampler = algo->sampler;
      if (o.sampler_override) {
        auto s = resolve_sampler(*o.sampler_override);
        if (!s) {
          std::cerr << "unknown sampler '" << *o.sampler_override << "'\n";
          return 2;
        }
        o.policy.sampler = *s;
      }

      EnvOptions env_opt;
      env_opt.seed = seed;
      env_opt.holdout_fraction = o.coldstart_frac;
      env_opt.deceptive_coldstart = o.deceptive_coldstart;
      if (o.delta_schedule) env_opt.delta_schedule = fs::path(*o.delta_schedule);
      BanditEnvironment env = make_environment(dataset, env_opt);

      std::string stem = options.algo + "_seed" + std::to_string(seed);
      RunResult result;
      if (algo->is_linucb) {
        result = run_linucb(env, {o.alpha, o.linucb_dim});
      } else {
        BatchCallback on_batch;
        if (o.save_checkpoints) {
          on_batch = [&](int batch, const BoostedModel& model) {
            std::ofstream mf(fs::path(o.out_dir) /
                             (stem + "_batch" + std::to_string(batch) + ".model"));
            write_model(model, *dataset.schema, mf);
          };
        }
        result = run_rb2(env, o.policy, on_batch);
        std::ofstream mf(fs::path(o.out_dir) / (stem + ".model"));
        write_model(result.model, *dataset.schema, mf);
      }

      std::ofstream csv(fs::path(o.out_dir) / (stem + ".csv"));
      write_round_log_csv(csv, result.rounds, run_metadata(o, seed), arm_names);
      finals.push_back(result.regret_series.empty() ? 0 : result.regret_series.back());
      std::cout << stem << ": rounds=" << result.rounds.size()
                << " final_regret=" << finals.back() << '\n';
    }

    double mean = 0;
    for (long f : finals) mean += static_cast<double>(f);
    mean /= static_cast<double>(finals.size());
    double var = 0;
    for (long f : finals) var += (static_cast<double>(f) - mean) * (static_cast<double>(f) - mean);
    double stddev = finals.size() > 1 ? std::sqrt(var / static_cast<double>(finals.size() - 1)) : 0.0;

    std::ostringstream summary;
    summary << "algo=" << options.algo << " seeds=" << finals.size()
            << " final_regret_mean=" << mean << " final_regret_std=" << stddev << '\n';
    std::cout << summary.str();
    std::ofstream sf(fs::path(options.out_dir) / "summary.txt", std::ios::app);
    sf << summary.str();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_distill(const std::string& model_path, const std::string& dataset_dir, double delta,
                const TreeParams& params) {
  try {
    Dataset dataset = load_dataset_dir(dataset_dir);
    std::ifstream mf(model_path);
    if (!mf) throw ConfigError("cannot open model '" + model_path + "'");
    BoostedModel model = read_model(mf, *dataset.schema);

    std::vector<GroundAtom> queries;
    for (const DatasetExample& e : dataset.examples)
      for (ConstId arm : dataset.arm_universe())
        queries.push_back(dataset.make_query(e.context, arm));

    RelationalTree tree = distill(model, queries, *dataset.facts, params, dataset.modes, delta);
    std::cout << tree.pretty(*dataset.schema);
    std::cout << "fidelity=" << fidelity(tree, model, queries, *dataset.facts) << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

CsvSeries parse_round_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  CsvSeries s;
  s.label = fs::path(path).stem().string();
  std::string line;
  bool saw_header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!saw_header) {
      if (line != "t,batch,context_id,chosen_arm,reward,regret_cum,p_chosen")
        throw ParseError(path + ": unexpected CSV header");
      saw_header = true;
      continue;
    }
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 7 fields");
    s.t.push_back(std::stol(fields[0]));
    s.regret_cum.push_back(std::stol(fields[5]));
  }
  if (!saw_header) throw ParseError(path + ": missing CSV header");
  return s;
}

std::string render_regret_svg(const std::vector<CsvSeries>& series) {
  const int width = 800, height = 500;
  const int ml = 70, mr = 180, mt = 30, mb = 50;
  long t_max = 1, r_max = 1;
  for (const CsvSeries& s : series) {
    if (!s.t.empty()) t_max = std::max(t_max, s.t.back());
    for (long r : s.regret_cum) r_max = std::max(r_max, r);
  }
  auto sx = [&](double t) { return ml + t / static_cast<double>(t_max) * (width - ml - mr); };
  auto sy = [&](double r) {
    return height - mb - r / static_cast<double>(r_max) * (height - mt - mb);
  };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">t</text>\n";
  svg << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
      << (mt + height - mb) / 2 << ")\">cumulative regret</text>\n";
  svg << "<text x=\"" << ml << "\" y=\"" << height - mb + 18 << "\" font-size=\"11\">0</text>\n";
  svg << "<text x=\"" << width - mr << "\" y=\"" << height - mb + 18
      << "\" text-anchor=\"end\" font-size=\"11\">" << t_max << "</text>\n";
  svg << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << r_max << "</text>\n";
  for (size_t i = 0; i < series.size(); ++i) {
    const CsvSeries& s = series[i];
    const char* color = palette[i % 8];
    if (!s.t.empty()) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t j = 0; j < s.t.size(); ++j) {
        if (j) svg << ' ';
        svg << sx(static_cast<double>(s.t[j])) << ',' << sy(static_cast<double>(s.regret_cum[j]));
      }
      svg << "\"/>\n";
    }
    int ly = mt + 16 + static_cast<int>(i) * 18;
    svg << "<line x1=\"" << width - mr + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << width - mr + 34 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << width - mr + 40 << "\" y=\"" << ly
        << "\" font-size=\"12\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_svg) {
  try {
    std::vector<CsvSeries> series;
    for (const std::string& p : csv_paths) series.push_back(parse_round_csv(p));
    std::ofstream out(out_svg);
    if (!out) throw ConfigError("cannot write '" + out_svg + "'");
    out << render_regret_svg(series);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_gen(const GenOptions& options) {
  try {
    SyntheticDataset gen;
    if (options.linear_control) {
      gen = generate_linear_control(options.users, options.arms, options.seed);
    } else {
      SyntheticParams p;
      p.n_users = options.users;
      p.n_movies = options.movies;
      p.n_arms = options.arms;
      p.target_facts = options.facts;
      p.noise = options.noise;
      p.seed = options.seed;
      gen = generate_synthetic(p);
    }
    save_dataset(gen.dataset, options.out_dir);
    std::ofstream rf(fs::path(options.out_dir) / "rule.txt");
    rf << gen.rule << '\n';
    std::cout << "wrote " << options.out_dir << ": facts=" << gen.dataset.facts->size()
              << " examples=" << gen.dataset.examples.size()
              << " arms=" << gen.dataset.arm_universe().size() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

namespace {

// Flat key=value config; command-line flags take precedence over file
// entries, file entries over defaults. Keys are the long flag names.
void apply_run_config(const std::string& path, const CLI::App& cmd, RunOptions& run,
                      std::string& sampler_flag, std::string& delta_schedule) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::map<std::string, std::function<void(const std::string&)>> setters;
  auto num = [](const std::string& v) { return std::stod(v); };
  setters["dataset"] = [&](const std::string& v) { run.dataset_dir = v; };
  setters["algo"] = [&](const std::string& v) { run.algo = v; };
  setters["seeds"] = [&](const std::string& v) {
    run.seeds.clear();
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) run.seeds.push_back(std::stoull(tok));
  };
  setters["batch-size"] = [&](const std::string& v) { run.policy.batch_length = std::stoi(v); };
  setters["batches"] = [&](const std::string& v) { run.policy.n_batches = std::stoi(v); };
  setters["trees-per-batch"] = [&](const std::string& v) {
    run.policy.trees_per_batch = std::stoi(v);
  };
  setters["tau"] = [&](const std::string& v) { run.policy.tau = num(v); };
  setters["epsilon"] = [&](const std::string& v) { run.policy.epsilon = num(v); };
  setters["eta"] = [&](const std::string& v) { run.policy.eta = num(v); };
  setters["sampler"] = [&](const std::string& v) { sampler_flag = v; };
  setters["alpha"] = [&](const std::string& v) { run.alpha = num(v); };
  setters["linucb-dim"] = [&](const std::string& v) { run.linucb_dim = std::stoi(v); };
  setters["out-dir"] = [&](const std::string& v) { run.out_dir = v; };
  setters["coldstart-frac"] = [&](const std::string& v) { run.coldstart_frac = num(v); };
  setters["delta-schedule"] = [&](const std::string& v) { delta_schedule = v; };
  setters["deceptive-coldstart"] = [&](const std::string& v) {
    run.deceptive_coldstart = (v == "1" || v == "true");
  };
  setters["accumulate-buffer"] = [&](const std::string& v) {
    run.policy.accumulate_buffer = (v == "1" || v == "true");
  };
  setters["save-checkpoints"] = [&](const std::string& v) {
    run.save_checkpoints = (v == "1" || v == "true");
  };
  setters["max-depth"] = [&](const std::string& v) {
    run.policy.tree_params.max_depth = std::stoi(v);
  };
  setters["min-leaf"] = [&](const std::string& v) {
    run.policy.tree_params.min_examples_leaf = std::stoi(v);
  };
  setters["max-literals"] = [&](const std::string& v) {
    run.policy.tree_params.max_literals_per_test = std::stoi(v);
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t cmt = line.find('#');
    if (cmt != std::string::npos) line = line.substr(0, cmt);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (cmd.count("--" + key) > 0) continue;  // explicit flag wins
    try {
      it->second(value);
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"RB2: relational boosted bandits"};
  app.require_subcommand(1);

  RunOptions run;
  std::string sampler_flag;
  std::string config_path;
  auto* c_run = app.add_subcommand("run", "run a bandit experiment");
  c_run->add_option("--config", config_path, "flat key=value config file");
  c_run->add_option("--dataset", run.dataset_dir, "dataset directory")->required();
  c_run->add_option("--algo", run.algo,
                    "rb2-informed | rb2-greedy | epsilon-greedy | batch-noexplore | linucb");
  c_run->add_option("--seeds", run.seeds, "seeds, one run each");
  c_run->add_option("--batch-size", run.policy.batch_length, "rounds per mini-batch");
  c_run->add_option("--batches", run.policy.n_batches, "number of mini-batches");
  c_run->add_option("--trees-per-batch", run.policy.trees_per_batch, "boosted trees per update");
  c_run->add_option("--tau", run.policy.tau, "softmax temperature");
  c_run->add_option("--epsilon", run.policy.epsilon, "epsilon-greedy rate");
  c_run->add_option("--eta", run.policy.eta, "boosting step size");
  c_run->add_option("--sampler", sampler_flag, "informed | greedy | random (override)");
  c_run->add_option("--alpha", run.alpha, "LinUCB exploration width");
  c_run->add_option("--linucb-dim", run.linucb_dim, "LinUCB feature cap");
  c_run->add_option("--out-dir", run.out_dir, "output directory");
  c_run->add_option("--coldstart-frac", run.coldstart_frac, "logged-data fraction");
  std::string delta_schedule;
  c_run->add_option("--delta-schedule", delta_schedule, "background update schedule file");
  c_run->add_flag("--deceptive-coldstart", run.deceptive_coldstart,
                  "logged policy never picks the top arm");
  c_run->add_flag("--accumulate-buffer", run.policy.accumulate_buffer,
                  "keep the interaction buffer across batches");
  c_run->add_flag("--save-checkpoints", run.save_checkpoints, "serialize the model per batch");
  c_run->add_option("--max-depth", run.policy.tree_params.max_depth, "tree depth cap");
  c_run->add_option("--min-leaf", run.policy.tree_params.min_examples_leaf,
                    "min examples per leaf");
  c_run->add_option("--max-literals", run.policy.tree_params.max_literals_per_test,
                    "literals per node test");

  std::string d_model, d_dataset;
  double d_delta = 0.01;
  TreeParams d_params;
  d_params.max_depth = 5;
  auto* c_distill = app.add_subcommand("distill", "distill a model into one tree");
  c_distill->add_option("--model", d_model, "model checkpoint")->required();
  c_distill->add_option("--dataset", d_dataset, "dataset directory")->required();
  c_distill->add_option("--delta", d_delta, "leaf merge threshold");
  c_distill->add_option("--max-depth", d_params.max_depth, "tree depth cap");
  c_distill->add_option("--min-leaf", d_params.min_examples_leaf, "min examples per leaf");

  std::vector<std::string> p_csvs;
  std::string p_out = "regret.svg";
  auto* c_plot = app.add_subcommand("plot", "plot cumulative regret curves");
  c_plot->add_option("csvs", p_csvs, "round-log CSV files")->required();
  c_plot->add_option("--out", p_out, "output SVG path");

  GenOptions gen;
  auto* c_gen = app.add_subcommand("gen", "generate a synthetic dataset");
  c_gen->add_option("--out-dir", gen.out_dir, "output directory");
  c_gen->add_option("--users", gen.users, "number of users");
  c_gen->add_option("--movies", gen.movies, "number of movies");
  c_gen->add_option("--arms", gen.arms, "number of promoted arm movies");
  c_gen->add_option("--facts", gen.facts, "target fact count");
  c_gen->add_option("--noise", gen.noise, "label flip rate");
  c_gen->add_option("--seed", gen.seed, "generator seed");
  c_gen->add_flag("--linear-control", gen.linear_control,
                  "propositional linearly-realizable domain");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (c_run->parsed()) {
    if (!config_path.empty()) {
      try {
        apply_run_config(config_path, *c_run, run, sampler_flag, delta_schedule);
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
      }
    }
    if (!sampler_flag.empty()) run.sampler_override = sampler_flag;
    if (!delta_schedule.empty()) run.delta_schedule = delta_schedule;
    return cmd_run(run);
  }
  if (c_distill->parsed()) return cmd_distill(d_model, d_dataset, d_delta, d_params);
  if (c_plot->parsed()) return cmd_plot(p_csvs, p_out);
  if (c_gen->parsed()) return cmd_gen(gen);
  return 2;
}

}  // namespace rb2
