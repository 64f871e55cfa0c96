#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rb2/cli.hpp"

using namespace rb2;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("rb2_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// one small generated dataset shared by the run tests
const fs::path& small_dataset() {
  static fs::path dir = [] {
    fs::path d = temp_dir("dataset");
    GenOptions gen;
    gen.out_dir = d.string();
    gen.users = 200;
    gen.movies = 30;
    gen.arms = 4;
    gen.facts = 2000;
    gen.seed = 12;
    REQUIRE(cmd_gen(gen) == 0);
    return d;
  }();
  return dir;
}

RunOptions small_run(const std::string& algo, const fs::path& out) {
  RunOptions o;
  o.dataset_dir = small_dataset().string();
  o.algo = algo;
  o.seeds = {5};
  o.policy.batch_length = 16;
  o.policy.n_batches = 3;
  o.policy.trees_per_batch = 4;
  o.policy.tree_params.min_examples_leaf = 2;
  o.coldstart_frac = 0.1;
  o.out_dir = out.string();
  return o;
}

}  // namespace

TEST_CASE("cmd_run produces a metadata-annotated round log") {
  fs::path out = temp_dir("run1");
  RunOptions o = small_run("rb2-informed", out);
  REQUIRE(cmd_run(o) == 0);

  std::string csv = read_file(out / "rb2-informed_seed5.csv");
  CHECK(csv.find("# version=rb2") != std::string::npos);
  CHECK(csv.find("# algo=rb2-informed") != std::string::npos);
  CHECK(csv.find("# batch_size=16") != std::string::npos);
  CHECK(csv.find("# sampler=informed") != std::string::npos);
  CHECK(csv.find("t,batch,context_id,chosen_arm,reward,regret_cum,p_chosen") !=
        std::string::npos);
  CHECK(fs::exists(out / "rb2-informed_seed5.model"));
  CHECK(fs::exists(out / "summary.txt"));
}

TEST_CASE("same seed and config produce byte-identical CSVs") {
  fs::path out1 = temp_dir("repro1"), out2 = temp_dir("repro2");
  for (const char* algo : {"rb2-informed", "epsilon-greedy", "batch-noexplore", "linucb"}) {
    RunOptions o1 = small_run(algo, out1);
    RunOptions o2 = small_run(algo, out2);
    o1.linucb_dim = o2.linucb_dim = 128;
    REQUIRE(cmd_run(o1) == 0);
    REQUIRE(cmd_run(o2) == 0);
    std::string name = std::string(algo) + "_seed5.csv";
    std::string a = read_file(out1 / name);
    CHECK(a == read_file(out2 / name));
    CHECK(!a.empty());
  }
}

TEST_CASE("unknown algorithm exits 2 and bad dataset exits nonzero") {
  fs::path out = temp_dir("bad");
  RunOptions o = small_run("banditron", out);
  CHECK(cmd_run(o) == 2);

  RunOptions missing = small_run("rb2-informed", out);
  missing.dataset_dir = (out / "nope").string();
  CHECK(cmd_run(missing) != 0);
}

TEST_CASE("cmd_run never mutates the dataset directory") {
  fs::path out = temp_dir("nomut");
  std::map<std::string, std::string> before;
  for (const auto& entry : fs::directory_iterator(small_dataset()))
    before[entry.path().filename().string()] = read_file(entry.path());
  RunOptions o = small_run("rb2-greedy", out);
  REQUIRE(cmd_run(o) == 0);
  for (const auto& entry : fs::directory_iterator(small_dataset()))
    CHECK(before.at(entry.path().filename().string()) == read_file(entry.path()));
  CHECK(before.size() == 4);  // facts, examples, modes, rule
}

TEST_CASE("cmd_distill prints a tree and its fidelity") {
  fs::path out = temp_dir("distill");
  RunOptions o = small_run("rb2-informed", out);
  REQUIRE(cmd_run(o) == 0);

  TreeParams params;
  params.max_depth = 4;
  CHECK(cmd_distill((out / "rb2-informed_seed5.model").string(), small_dataset().string(), 0.01,
                    params) == 0);

  // corrupt checkpoint
  fs::path broken = out / "broken.model";
  std::ofstream(broken) << "rb2-model v1\ntarget willclick/2\npsi0 not-a-number\nstages 0\n";
  CHECK(cmd_distill(broken.string(), small_dataset().string(), 0.01, params) != 0);
}

TEST_CASE("cmd_plot renders one polyline per CSV") {
  fs::path out = temp_dir("plot");
  RunOptions o = small_run("rb2-informed", out);
  REQUIRE(cmd_run(o) == 0);
  RunOptions o2 = small_run("batch-noexplore", out);
  REQUIRE(cmd_run(o2) == 0);

  fs::path svg = out / "regret.svg";
  std::vector<std::string> csvs{(out / "rb2-informed_seed5.csv").string(),
                                (out / "batch-noexplore_seed5.csv").string()};
  REQUIRE(cmd_plot(csvs, svg.string()) == 0);
  std::string content = read_file(svg);
  CHECK(content.rfind("<?xml", 0) == 0);
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("</svg>") != std::string::npos);
  size_t polylines = 0;
  for (size_t pos = 0; (pos = content.find("<polyline", pos)) != std::string::npos; ++pos)
    ++polylines;
  CHECK(polylines == 2);
  CHECK(content.find("cumulative regret") != std::string::npos);

  // header-only CSV: empty plot, success
  fs::path header_only = out / "empty.csv";
  std::ofstream(header_only) << "t,batch,context_id,chosen_arm,reward,regret_cum,p_chosen\n";
  REQUIRE(cmd_plot({header_only.string()}, (out / "empty.svg").string()) == 0);
  std::string empty_svg = read_file(out / "empty.svg");
  CHECK(empty_svg.find("</svg>") != std::string::npos);
  CHECK(empty_svg.find("<polyline") == std::string::npos);

  // schema mismatch: nonzero
  fs::path bad = out / "bad.csv";
  std::ofstream(bad) << "time,regret\n1,2\n";
  CHECK(cmd_plot({bad.string()}, (out / "bad.svg").string()) != 0);
}

TEST_CASE("run_cli dispatches subcommands and honors config files") {
  fs::path out = temp_dir("dispatch");
  fs::path cfg = out / "run.cfg";
  std::ofstream(cfg) << "batch-size=16\nbatches=2\ntrees-per-batch=4\ncoldstart-frac=0.1\n";

  std::string dataset = small_dataset().string();
  std::string out_dir = (out / "artifacts").string();
  std::string config_path = cfg.string();
  const char* argv[] = {"rb2",   "run",          "--dataset", dataset.c_str(),
                        "--algo", "rb2-informed", "--config",  config_path.c_str(),
                        "--batches", "3",         "--out-dir", out_dir.c_str(),
                        "--seeds", "5"};
  REQUIRE(run_cli(14, argv) == 0);
  std::string csv = read_file(fs::path(out_dir) / "rb2-informed_seed5.csv");
  // flag wins over config for batches, config supplies batch size
  CHECK(csv.find("# batches=3") != std::string::npos);
  CHECK(csv.find("# batch_size=16") != std::string::npos);

  const char* bad_argv[] = {"rb2", "run", "--dataset", dataset.c_str(), "--algo", "nope"};
  CHECK(run_cli(6, bad_argv) == 2);

  // the installed binary behaves the same end to end
  if (const char* bin = std::getenv("RB2_CLI")) {
    std::string cmd = std::string(bin) + " run --dataset " + dataset +
                      " --algo nope --out-dir " + out_dir + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(rc) == 2);
  }
}
